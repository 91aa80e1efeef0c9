import numpy as np
import pytest

from rankdir import DataError
from rankdir.ranks import (
    RankedResponse,
    empirical_cdf,
    grouped_rank_transform,
    hstar_transform,
    rank_vector,
)


def test_rank_vector_strict_ordering():
    assert np.array_equal(rank_vector([3.2, 1.1, 2.5]), [3.0, 1.0, 2.0])


def test_rank_vector_midranks_and_singleton():
    assert np.array_equal(rank_vector([5.0, 5.0]), [1.5, 1.5])
    assert np.array_equal(rank_vector([7.0]), [1.0])


def test_rank_vector_is_permutation_without_ties():
    rng = np.random.default_rng(3)
    for n in (2, 5, 17, 101):
        r = rank_vector(rng.standard_normal(n))
        assert np.array_equal(np.sort(r), np.arange(1, n + 1))


def test_rank_vector_missing_entries_stay_missing():
    r = rank_vector([2.0, np.nan, 1.0, 3.0])
    assert np.isnan(r[1])
    assert np.array_equal(r[[0, 2, 3]], [2.0, 1.0, 3.0])


def test_rank_vector_empty_and_all_missing():
    with pytest.raises(DataError, match="empty response vector"):
        rank_vector([])
    with pytest.raises(DataError, match="missing"):
        rank_vector([np.nan, np.nan])


def test_rank_vector_rejects_unknown_tie_policy():
    with pytest.raises(ValueError, match="tie policy"):
        rank_vector([1.0, 2.0], tie_policy="dense")


def test_monotone_invariance_bit_identical():
    # ranks depend on values only through their ordering, so any strictly
    # increasing transform must leave every transform output bit-identical
    rng = np.random.default_rng(11)
    y = rng.standard_normal(40)
    y[5] = y[9]  # include a tie
    groups = np.repeat(["a", "b"], 20)
    for f in (np.exp, lambda v: v**3 + v, lambda v: 2.5 * v - 7.0):
        assert np.array_equal(rank_vector(y), rank_vector(f(y)))
        assert np.array_equal(hstar_transform(y), hstar_transform(f(y)))
        assert np.array_equal(
            grouped_rank_transform(y, groups), grouped_rank_transform(f(y), groups)
        )


def test_hstar_examples():
    assert np.allclose(hstar_transform([10.0, 20.0, 30.0]), [0.25, 0.5, 0.75])
    assert np.allclose(hstar_transform([2.0, 1.0]), [2.0 / 3.0, 1.0 / 3.0])


def test_hstar_range():
    rng = np.random.default_rng(7)
    for n in (1, 2, 9, 50):
        u = hstar_transform(rng.integers(0, 5, size=n).astype(float))
        assert np.all(u >= 1.0 / (n + 1)) and np.all(u <= n / (n + 1.0))


def test_hstar_ignores_missing_in_effective_count():
    u = hstar_transform([1.0, np.nan, 2.0])
    # two non-missing values, so denominators use n_eff + 1 = 3
    assert np.isnan(u[1])
    assert np.allclose(u[[0, 2]], [1.0 / 3.0, 2.0 / 3.0])


def test_empirical_cdf_values():
    F = empirical_cdf([1.0, 2.0, 3.0])
    assert F(2.0) == pytest.approx(2.0 / 3.0)
    assert F(0.5) == 0.0
    assert F(3.0) == 1.0
    assert F(10.0) == 1.0


def test_empirical_cdf_right_continuous_and_vectorized():
    F = empirical_cdf([1.0, 2.0, 2.0, 4.0])
    assert F(2.0 - 1e-12) == 0.25
    assert F(2.0) == 0.75
    out = F(np.array([0.0, 2.0, 4.0]))
    assert np.allclose(out, [0.0, 0.75, 1.0])


def test_grouped_rank_example():
    values = [5.0, 1.0, 3.0, 2.0, 9.0]
    groups = ["A", "A", "A", "B", "B"]
    expect = [0.75, 0.25, 0.50, 1.0 / 3.0, 2.0 / 3.0]
    assert np.allclose(grouped_rank_transform(values, groups), expect)


def test_grouped_rank_single_group_matches_hstar():
    y = np.array([4.0, -1.0, 2.0, 2.0])
    g = np.zeros(4)
    assert np.array_equal(grouped_rank_transform(y, g), hstar_transform(y))


def test_grouped_rank_small_group_rejected():
    with pytest.raises(DataError, match="'B'"):
        grouped_rank_transform([1.0, 2.0, 3.0], ["A", "A", "B"])
    with pytest.raises(DataError, match="fewer than 2"):
        grouped_rank_transform([1.0, np.nan, 2.0, 3.0], ["A", "A", "B", "B"])


def test_grouped_rank_length_mismatch():
    with pytest.raises(DataError, match="one label per observation"):
        grouped_rank_transform([1.0, 2.0], ["A"])


def test_rank_uniformity_chi_square():
    # with i.i.d. continuous draws the rank of the first entry is uniform on
    # {1..n}; chi-square goodness of fit at n=10 over 10^4 replicates should
    # not reject at the 0.001 level (critical value 27.877 on 9 df)
    rng = np.random.default_rng(2024)
    n, reps = 10, 10_000
    counts = np.zeros(n)
    draws = rng.standard_normal((reps, n))
    for row in draws:
        counts[int(rank_vector(row)[0]) - 1] += 1
    expected = reps / n
    stat = float(np.sum((counts - expected) ** 2 / expected))
    assert stat < 27.877


def test_ranked_response_from_values():
    rr = RankedResponse.from_values([3.0, np.nan, 1.0])
    assert rr.n_effective == 2
    assert np.array_equal(rr.ranks[[0, 2]], [2.0, 1.0])
    assert np.allclose(rr.hstar[[0, 2]], [2.0 / 3.0, 1.0 / 3.0])
    assert np.isnan(rr.ranks[1]) and np.isnan(rr.hstar[1])
