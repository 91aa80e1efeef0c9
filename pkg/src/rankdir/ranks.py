"""Rank transforms of a response vector.

The estimators in this package never look at the raw responses, only at their
ranks. Ties get midranks, missing values are left out of the ranking and keep
NaN in the output so callers can decide what to do with them.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from ._validation import DataError, as_1d_float

__all__ = [
    "RankedResponse",
    "rank_vector",
    "hstar_transform",
    "empirical_cdf",
    "grouped_rank_transform",
]


def rank_vector(values, tie_policy: str = "midrank") -> np.ndarray:
    """Ranks of ``values`` (1 = smallest), ties averaged to midranks.

    Missing entries (NaN) are excluded from the ranking and stay NaN in the
    result. Raises :class:`DataError` if nothing is left to rank.
    """
    if tie_policy != "midrank":
        raise ValueError(f"unsupported tie policy: {tie_policy!r}")
    v = as_1d_float(values)
    if v.size == 0:
        raise DataError("empty response vector")
    ok = ~np.isnan(v)
    if not ok.any():
        raise DataError("empty response vector (all entries missing)")
    out = np.full(v.shape, np.nan)
    out[ok] = rankdata(v[ok], method="average")
    return out


def hstar_transform(values) -> np.ndarray:
    """Shrunken empirical CDF evaluated at each observation: rank / (n + 1).

    With n non-missing observations the output lies in
    [1/(n+1), n/(n+1)], strictly inside (0, 1), so a Gaussian quantile of it
    is always finite. Missing entries stay NaN.
    """
    r = rank_vector(values)
    n_eff = int(np.sum(~np.isnan(r)))
    return r / (n_eff + 1.0)


def empirical_cdf(values):
    """Right-continuous empirical CDF of the non-missing entries of ``values``.

    Returns a callable mapping a point (scalar or array) to the fraction of
    observations <= that point.
    """
    v = as_1d_float(values)
    v = v[~np.isnan(v)]
    if v.size == 0:
        raise DataError("empty response vector")
    sorted_v = np.sort(v)
    n = sorted_v.size

    def cdf(y):
        counts = np.searchsorted(sorted_v, y, side="right")
        return counts / n

    return cdf


def grouped_rank_transform(values, groups) -> np.ndarray:
    """Shrunken ranks computed separately within each group.

    Observations are ranked only against members of their own group, and each
    group's ranks are shrunk by its own size: rank_g / (n_g + 1). Use this when
    responses are only comparable within blocks (e.g. per-laboratory scores).
    Every group needs at least 2 non-missing members.
    """
    v = as_1d_float(values)
    g = np.asarray(groups)
    if g.shape[0] != v.shape[0]:
        raise DataError("groups must have one label per observation")
    out = np.full(v.shape, np.nan)
    for label in np.unique(g):
        idx = np.flatnonzero(g == label)
        sub = v[idx]
        ok = ~np.isnan(sub)
        if ok.sum() < 2:
            raise DataError(f"group {label!r} has fewer than 2 non-missing members")
        ranks = np.full(sub.shape, np.nan)
        ranks[ok] = rankdata(sub[ok], method="average")
        out[idx] = ranks / (ok.sum() + 1.0)
    return out


@dataclass(frozen=True, eq=False)
class RankedResponse:
    """A response vector together with its midranks.

    ``n_effective`` counts the non-missing entries; ``hstar`` holds the
    shrunken ranks rank/(n_effective + 1).
    """

    values: np.ndarray
    ranks: np.ndarray
    n_effective: int
    hstar: np.ndarray = field(repr=False)

    @classmethod
    def from_values(cls, values) -> "RankedResponse":
        v = as_1d_float(values)
        r = rank_vector(v)
        n_eff = int(np.sum(~np.isnan(r)))
        return cls(values=v, ranks=r, n_effective=n_eff, hstar=r / (n_eff + 1.0))
