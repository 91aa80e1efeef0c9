"""Direction estimators for monotone single-index data observed through ranks.

The data model is y_i = F(x_i' b + e_i) with F an unknown strictly increasing
transform. Because F is arbitrary, the scale of b is not identifiable; every
estimator here reports a unit-norm ``direction_`` (and for two covariates the
angle arctan(b2 / b1)). All of them consume only the ranks of y, never its
values, except for the ordinary least squares baseline.

Estimators
----------
GaussianQuantileRegressor
    Least squares of the Gaussian quantile of the shrunken ranks on X.
TruncatedGaussianQuantileRegressor
    Same, with the quantile clamped at +/- sqrt(log(n)/2). The clamp keeps
    the pseudo-response bounded, which is what the asymptotic normality
    argument needs; in practice it differs from the unclamped fit only
    through the most extreme ranks.
EmpiricalQuantileRegressor
    Iteratively reweights the pseudo-response through the empirical quantile
    map of the current fitted index, so the index itself plays the role of
    the unknown transform.
SpearmaxRegressor
    Maximizes the Spearman rank correlation between the response and the
    fitted index directly; with two covariates the search is an exhaustive
    angle grid plus local refinement, otherwise Nelder-Mead restarts.
OrdinaryLeastSquares
    Plain least squares on the raw responses, as a baseline. Requires raw
    responses and ignores grouping.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.stats import rankdata
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import DataError, NumericalError, as_1d_float, as_2d_float, drop_incomplete_rows
from .gaussian import std_normal_quantile, truncated_quantile, truncation_level
from .ranks import grouped_rank_transform, hstar_transform, rank_vector

__all__ = [
    "ModelTruth",
    "sigma_star",
    "dispersion_matrix",
    "least_squares",
    "normalize_direction",
    "direction_angle",
    "spearman_objective",
    "GaussianQuantileRegressor",
    "TruncatedGaussianQuantileRegressor",
    "EmpiricalQuantileRegressor",
    "SpearmaxRegressor",
    "OrdinaryLeastSquares",
    "ESTIMATORS",
    "make_estimator",
]


# ---------------------------------------------------------------------------
# population quantities


@dataclass(frozen=True, eq=False)
class ModelTruth:
    """True parameters of a Gaussian design: slope vector, covariate
    covariance, and error variance. Used by the simulation and verification
    layers to compute population targets."""

    beta0: np.ndarray
    covariance: np.ndarray
    noise_variance: float

    def __post_init__(self):
        b = as_1d_float(self.beta0, "beta0")
        S = as_2d_float(self.covariance, "covariance")
        object.__setattr__(self, "beta0", b)
        object.__setattr__(self, "covariance", S)
        object.__setattr__(self, "noise_variance", float(self.noise_variance))
        if S.shape[0] != S.shape[1] or S.shape[0] != b.size:
            raise DataError("covariance must be square and match beta0")
        if not np.allclose(S, S.T, atol=1e-12):
            raise DataError("covariance matrix must be symmetric")
        try:
            np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            raise DataError("covariance matrix must be positive definite") from None
        if self.noise_variance < 0:
            raise DataError("noise variance must be nonnegative")


def sigma_star(truth: ModelTruth) -> float:
    """Scale factor (b' S b + noise_variance)^(-1/2).

    This is the factor by which the latent index x'b + e is shrunk when it is
    standardized to unit variance, so the population slope of the Gaussian
    quantile of the response CDF on x is sigma_star * b.
    """
    quad = float(truth.beta0 @ truth.covariance @ truth.beta0)
    total = quad + truth.noise_variance
    if total <= 0.0:
        raise DataError("index variance is zero: beta0 = 0 with no noise")
    return 1.0 / math.sqrt(total)


def dispersion_matrix(truth: ModelTruth) -> np.ndarray:
    """Second-moment matrix A driving the estimator's asymptotic dispersion.

    A = E[x x' (x'b + e)^2] / (b'Sb + s2)  -  (Sb)(Sb)' / (b'Sb + s2).

    For Gaussian x the fourth-moment identity E[x x' (x'b)^2] =
    (b'Sb) S + 2 (Sb)(Sb)' collapses the expression to
    S + (Sb)(Sb)' / (b'Sb + s2), which is what is returned.
    """
    S = truth.covariance
    Sb = S @ truth.beta0
    denom = float(truth.beta0 @ Sb) + truth.noise_variance
    return S + np.outer(Sb, Sb) / denom


# ---------------------------------------------------------------------------
# small numerical pieces


def least_squares(design, target) -> np.ndarray:
    """Coefficients minimizing ||target - design @ beta||, by Householder QR.

    Raises :class:`NumericalError` ("singular design") when the design has no
    full column rank, including the underdetermined case.
    """
    D = as_2d_float(design, "design")
    z = as_1d_float(target, "target")
    if D.shape[0] != z.shape[0]:
        raise DataError("design and target disagree on sample size")
    q, r = np.linalg.qr(D)
    diag = np.abs(np.diag(r))
    if diag.size < D.shape[1]:
        raise NumericalError("singular design")
    tol = np.finfo(float).eps * max(D.shape) * (float(diag.max()) if diag.size else 0.0)
    if diag.size == 0 or (diag <= tol).any():
        raise NumericalError("singular design")
    return np.linalg.solve(r, q.T @ z)


def normalize_direction(beta) -> np.ndarray:
    """``beta`` scaled to unit Euclidean norm."""
    b = as_1d_float(beta, "beta")
    nrm = float(np.linalg.norm(b))
    if not math.isfinite(nrm):
        raise ValueError("cannot normalize a non-finite vector")
    if nrm == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return b / nrm


def direction_angle(beta) -> float:
    """arctan(b2 / b1) in radians, for a two-coefficient vector.

    The angle lives in (-pi/2, pi/2); it parameterizes the direction up to
    sign. Raises when there are not exactly two coefficients or b1 == 0.
    """
    b = as_1d_float(beta, "beta")
    if b.size != 2:
        raise ValueError("angle is defined only for exactly two coefficients")
    if b[0] == 0.0:
        raise ValueError("angle undefined: first coefficient is zero")
    return math.atan(b[1] / b[0])


def _centered_rank_corr(ac, sa, rb):
    """Pearson correlation of pre-centered ranks ``ac`` with ranks ``rb``.

    Computing sqrt(sa * sb) as one square root keeps the result exactly 1.0
    when the two rankings coincide.
    """
    bc = rb - rb.mean()
    sb = float(bc @ bc)
    if sb <= 0.0:
        raise NumericalError("index has no variation, rank correlation undefined")
    return float((ac @ bc) / math.sqrt(sa * sb))


def _response_rank_values(y, groups):
    """Rank-scale representation of the response used by Spearman objectives:
    plain midranks without groups, per-group shrunken ranks with them."""
    if groups is not None:
        return grouped_rank_transform(y, groups)
    return rank_vector(y)


def spearman_objective(X, y, beta, groups=None) -> float:
    """Spearman rank correlation between the response and the index X @ beta.

    Midranks on both sides; with ``groups`` the response is rank-transformed
    within each group first. This is the criterion SpearmaxRegressor
    maximizes over unit vectors ``beta``.
    """
    X, y, groups, _ = drop_incomplete_rows(X, y, groups)
    b = as_1d_float(beta, "beta")
    if b.size != X.shape[1]:
        raise DataError("beta length must match the number of covariates")
    ra = _response_rank_values(y, groups)
    if np.all(ra == ra[0]):
        raise DataError("degenerate ranks: response has no variation")
    ac = ra - ra.mean()
    sa = float(ac @ ac)
    rb = rankdata(X @ b, method="average")
    return _centered_rank_corr(ac, sa, rb)


# ---------------------------------------------------------------------------
# estimator classes


class _DirectionEstimatorBase(BaseEstimator):
    """Shared post-processing and prediction for the direction estimators."""

    def _finalize(self, beta_full, with_intercept, X, n_dropped, n_iter, converged, objective):
        if with_intercept:
            self.intercept_ = float(beta_full[0])
            coef = np.asarray(beta_full[1:], dtype=float)
        else:
            self.intercept_ = 0.0
            coef = np.asarray(beta_full, dtype=float)
        self.coef_ = coef
        self.direction_ = normalize_direction(coef)
        if coef.size == 2 and coef[0] != 0.0:
            self.angle_ = direction_angle(coef)
        else:
            self.angle_ = float("nan") if coef.size == 2 else None
        self.n_features_in_ = X.shape[1]
        self.n_effective_ = X.shape[0]
        self.n_dropped_ = int(n_dropped)
        self.n_iter_ = int(n_iter)
        self.converged_ = bool(converged)
        self.objective_ = objective
        return self

    def predict(self, X):
        """Fitted index X @ coef_ + intercept_ (monotone in the modeled response)."""
        check_is_fitted(self, "coef_")
        X = as_2d_float(X, "X")
        if X.shape[1] != self.n_features_in_:
            raise DataError(
                f"X has {X.shape[1]} columns, expected {self.n_features_in_}"
            )
        return X @ self.coef_ + self.intercept_


class _RankPseudoRegressor(_DirectionEstimatorBase):
    """Common fit loop: rank-transform y, map ranks to a pseudo-response,
    then least squares of the pseudo-response on X."""

    def fit(self, X, y, groups=None):
        X, y, groups, dropped = drop_incomplete_rows(X, y, groups)
        if groups is not None:
            u = grouped_rank_transform(y, groups)
        else:
            u = hstar_transform(y)
        if np.all(u == u[0]):
            raise DataError("degenerate ranks: response has no variation")
        z = self._pseudo_response(u, y.size)
        if self.fit_intercept:
            design = np.column_stack([np.ones(y.size), X])
        else:
            design = X
        beta_full = least_squares(design, z)
        return self._finalize(
            beta_full, self.fit_intercept, X, dropped,
            n_iter=1, converged=True, objective=None,
        )

    def _pseudo_response(self, u, n):  # pragma: no cover - subclasses override
        raise NotImplementedError


class GaussianQuantileRegressor(_RankPseudoRegressor):
    """Least squares of the Gaussian quantile of the shrunken ranks on X.

    The pseudo-response is Phi^{-1}(rank / (n+1)). Up to scale this recovers
    the direction of the slope vector whenever the response is a monotone
    transform of a Gaussian-like index.
    """

    _method_tag = "gqr"

    def __init__(self, fit_intercept=True):
        self.fit_intercept = fit_intercept

    def _pseudo_response(self, u, n):
        return std_normal_quantile(u)


class TruncatedGaussianQuantileRegressor(_RankPseudoRegressor):
    """Gaussian-quantile fit with the quantile clamped at +/- sqrt(log(n)/2).

    Identical to :class:`GaussianQuantileRegressor` except that ranks in the
    outer tails map onto the clamp value instead of diverging quantiles. When
    a grouping is supplied the clamp level is taken from the total effective
    sample size, not per group.
    """

    _method_tag = "tgqr"

    def __init__(self, fit_intercept=True):
        self.fit_intercept = fit_intercept

    def _pseudo_response(self, u, n):
        return truncated_quantile(u, n)


class EmpiricalQuantileRegressor(_DirectionEstimatorBase):
    """Iterated empirical-quantile fit.

    Starts from least squares of the shrunken ranks on X, then alternates:
    map the rank levels through the empirical quantile function of the
    current fitted index, refit, renormalize. A fixed point makes the fitted
    index its own quantile transform of the ranks, i.e. the index plays the
    role of the unknown monotone transform. With ``truncate=True`` the rank
    levels are clamped to [1 - alpha_n, alpha_n] (same level as the truncated
    Gaussian fit) before the quantile map, which protects the extremes.

    Iteration stops when the normalized coefficient vector (including the
    intercept) moves less than ``tol`` in Euclidean norm.
    """

    _method_tag = "eqr"

    def __init__(self, fit_intercept=True, truncate=True, tol=1e-5, max_iter=100):
        self.fit_intercept = fit_intercept
        self.truncate = truncate
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y, groups=None):
        X, y, groups, dropped = drop_incomplete_rows(X, y, groups)
        if groups is not None:
            u = grouped_rank_transform(y, groups)
        else:
            u = hstar_transform(y)
        if np.all(u == u[0]):
            raise DataError("degenerate ranks: response has no variation")
        n = y.size
        if self.fit_intercept:
            design = np.column_stack([np.ones(n), X])
        else:
            design = X
        if self.truncate:
            spec = truncation_level(n)
            levels = np.clip(u, 1.0 - spec.alpha_n, spec.alpha_n)
        else:
            levels = u
        grid = np.arange(1, n + 1) / n
        beta = normalize_direction(least_squares(design, u))
        n_iter = 0
        converged = False
        for n_iter in range(1, int(self.max_iter) + 1):
            index = design @ beta
            z = np.interp(levels, grid, np.sort(index))
            beta_new = normalize_direction(least_squares(design, z))
            delta = float(np.linalg.norm(beta_new - beta))
            beta = beta_new
            if delta < self.tol:
                converged = True
                break
        try:
            objective = spearman_objective(X, y, beta[1:] if self.fit_intercept else beta, groups)
        except (NumericalError, ValueError):
            objective = float("nan")
        return self._finalize(
            beta, self.fit_intercept, X, dropped,
            n_iter=n_iter, converged=converged, objective=objective,
        )


class SpearmaxRegressor(_DirectionEstimatorBase):
    """Direction maximizing the Spearman correlation of response and index.

    The objective depends on the coefficients only through the ordering of
    X @ beta, so it is piecewise constant on the unit sphere. With two
    covariates the ordering changes only at the finitely many angles where
    two projections tie; when the number of row pairs fits within the
    ``grid_points`` evaluation budget those crossing angles are enumerated
    outright and the global maximum is exact. Otherwise the maximizer is
    found by an exhaustive angle grid (``grid_points`` cells over [0, 2pi))
    with golden-section refinement inside the best cell, which can in
    principle miss a flat piece narrower than one cell. Either way the
    edges of the flat piece the maximum sits on are located and the
    reported angle is the midpoint of that plateau, which makes the output
    deterministic and centered rather than an arbitrary point of the flat
    region. With more covariates a Nelder-Mead search restarted from 2p
    random unit vectors (seeded by ``random_state``) is used.

    The intercept never affects the ranking of the index, so ``intercept_``
    is fixed at 0.
    """

    _method_tag = "spearmax"

    def __init__(self, method=None, grid_points=3600, random_state=0):
        self.method = method
        self.grid_points = grid_points
        self.random_state = random_state

    def fit(self, X, y, groups=None):
        X, y, groups, dropped = drop_incomplete_rows(X, y, groups)
        p = X.shape[1]
        if p < 1:
            raise DataError("X must have at least one column")
        col_span = X.max(axis=0) - X.min(axis=0)
        if np.any(col_span == 0.0):
            raise DataError("constant covariate column")
        ra = _response_rank_values(y, groups)
        if np.all(ra == ra[0]):
            raise DataError("degenerate ranks: response has no variation")
        ac = ra - ra.mean()
        sa = float(ac @ ac)

        method = self.method
        if method is None:
            method = "angle_grid_p2" if p == 2 else "nelder_mead"
        if method == "angle_grid_p2":
            if p != 2:
                raise DataError("angle_grid_p2 requires exactly two covariates")
            beta, value = self._fit_angle_grid(X, ac, sa)
            converged = True
        elif method == "nelder_mead":
            beta, value, converged = self._fit_nelder_mead(X, ac, sa)
        else:
            raise ValueError(f"unknown search method: {method!r}")
        return self._finalize(
            beta, False, X, dropped,
            n_iter=1, converged=converged, objective=value,
        )

    # -- two-covariate exhaustive search

    def _fit_angle_grid(self, X, ac, sa):
        G = int(self.grid_points)
        if G < 8:
            raise ValueError("grid_points must be at least 8")
        step = 2.0 * math.pi / G

        def f(theta):
            idx = X[:, 0] * math.cos(theta) + X[:, 1] * math.sin(theta)
            rb = rankdata(idx, method="average")
            bc = rb - rb.mean()
            sb = float(bc @ bc)
            if sb <= 0.0:
                return -2.0
            return float((ac @ bc) / math.sqrt(sa * sb))

        # Few enough rows: enumerate every angle where two projections swap
        # and evaluate one point per arc between them. Same budget as the
        # grid below, but a plateau narrower than a grid cell cannot be
        # missed, so on noiseless data the exact maximum is always found.
        if X.shape[0] * (X.shape[0] - 1) <= 2 * G:
            theta_mid = self._exact_plateau(X, f)
            if theta_mid is not None:
                return (
                    np.array([math.cos(theta_mid), math.sin(theta_mid)]),
                    f(theta_mid),
                )

        # coarse scan, vectorized: one rank pass per grid column
        thetas = np.arange(G) * step
        idx_all = np.outer(X[:, 0], np.cos(thetas)) + np.outer(X[:, 1], np.sin(thetas))
        rb_all = rankdata(idx_all, method="average", axis=0)
        bc_all = rb_all - rb_all.mean(axis=0)
        sb_all = (bc_all * bc_all).sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            vals = (ac @ bc_all) / np.sqrt(sa * sb_all)
        vals = np.where(sb_all > 0.0, vals, -2.0)
        i0 = int(np.argmax(vals))
        # everything below sticks to the scalar path so that plateau
        # membership can be decided by exact equality of the objective
        t0 = i0 * step
        best_t, best_v = t0, f(t0)

        # golden-section refinement over the two cells around the best node
        lo, hi = t0 - step, t0 + step
        invphi = (math.sqrt(5.0) - 1.0) / 2.0
        c = hi - invphi * (hi - lo)
        d = lo + invphi * (hi - lo)
        fc, fd = f(c), f(d)
        for _ in range(60):
            if fc >= fd:
                hi, d, fd = d, c, fc
                c = hi - invphi * (hi - lo)
                fc = f(c)
            else:
                lo, c, fc = c, d, fd
                d = lo + invphi * (hi - lo)
                fd = f(d)
            for t_cand, v_cand in ((c, fc), (d, fd)):
                if v_cand > best_v:
                    best_t, best_v = t_cand, v_cand

        theta_mid = self._plateau_midpoint(f, best_t, best_v, step, G)
        return np.array([math.cos(theta_mid), math.sin(theta_mid)]), f(theta_mid)

    @staticmethod
    def _exact_plateau(X, f):
        """Midpoint of the best flat arc, from the exact crossing angles.

        Rows i and j project to the same value at theta solving
        (xi - xj) . (cos theta, sin theta) = 0, one angle per pair modulo
        pi, so between consecutive crossing angles the objective is
        constant. One evaluation per arc over a half turn covers every
        attainable ordering; the other half repeats with the ranking
        reversed, so its values are the same with the sign flipped. The
        best value's run of equal-valued neighboring arcs (plateau
        membership is exact float equality, as in the grid path) is
        resolved to its angular midpoint. Returns None when no pair ever
        swaps, which only happens on degenerate data.
        """
        iu, ju = np.triu_indices(X.shape[0], 1)
        d = X[iu] - X[ju]
        keep = (d[:, 0] != 0.0) | (d[:, 1] != 0.0)
        if not np.any(keep):
            return None
        cross = np.arctan2(-d[keep, 0], d[keep, 1])
        cross = np.where(cross >= 0.5 * math.pi, cross - math.pi, cross)
        cross = np.where(cross < -0.5 * math.pi, cross + math.pi, cross)
        cross = np.unique(cross)
        nxt = np.append(cross[1:], cross[0] + math.pi)
        half_vals = [f(t) for t in 0.5 * (cross + nxt)]
        bounds = np.concatenate([cross, cross + math.pi])
        vals = np.array(half_vals + [-v for v in half_vals])
        M = vals.size
        k = int(np.argmax(vals))
        v = vals[k]
        lo = hi = k
        taken = 0
        while taken < M - 1 and vals[(lo - 1) % M] == v:
            lo = (lo - 1) % M
            taken += 1
        while taken < M - 1 and vals[(hi + 1) % M] == v:
            hi = (hi + 1) % M
            taken += 1
        two_pi = 2.0 * math.pi
        if taken >= M - 1:
            # flat all the way around; center of the best single arc
            width = (bounds[(k + 1) % M] - bounds[k]) % two_pi
            return float(bounds[k] + 0.5 * width)
        start = bounds[lo]
        span = (bounds[(hi + 1) % M] - start) % two_pi
        return float(start + 0.5 * span)

    @staticmethod
    def _plateau_midpoint(f, theta, value, step, G):
        """Midpoint of the flat arc {f == value} containing ``theta``.

        The objective takes the same floating-point value everywhere the
        ranking of the index is unchanged, so plateau membership is exact
        equality. Walk outward in grid steps until the value changes, then
        bisect each edge.
        """
        lo = theta
        k = 0
        while k < G and f(lo - step) == value:
            lo -= step
            k += 1
        if k >= G:
            return theta  # objective constant over the whole circle
        hi = theta
        k = 0
        while k < G and f(hi + step) == value:
            hi += step
            k += 1
        if k >= G:
            return theta

        def edge(inside, outside):
            for _ in range(60):
                mid = 0.5 * (inside + outside)
                if f(mid) == value:
                    inside = mid
                else:
                    outside = mid
            return inside

        left = edge(lo, lo - step)
        right = edge(hi, hi + step)
        mid = 0.5 * (left + right)
        if f(mid) == value:
            return mid
        return theta  # a nearby flat piece shares the value; keep the safe point

    # -- general-p stochastic search

    def _fit_nelder_mead(self, X, ac, sa):
        p = X.shape[1]

        def neg_obj(b):
            nrm = np.linalg.norm(b)
            if not np.isfinite(nrm) or nrm < 1e-12:
                return 2.0
            idx = X @ (b / nrm)
            rb = rankdata(idx, method="average")
            bc = rb - rb.mean()
            sb = float(bc @ bc)
            if sb <= 0.0:
                return 2.0
            return -float((ac @ bc) / math.sqrt(sa * sb))

        rng = np.random.default_rng(self.random_state)
        best = None
        success = False
        for _ in range(2 * p):
            start = rng.standard_normal(p)
            start /= np.linalg.norm(start)
            res = minimize(
                neg_obj, start, method="Nelder-Mead",
                options={"maxiter": 400 * p, "xatol": 1e-6, "fatol": 1e-12},
            )
            if best is None or res.fun < best.fun:
                best = res
                success = bool(res.success)
        beta = normalize_direction(best.x)
        return beta, -float(best.fun), success


class OrdinaryLeastSquares(_DirectionEstimatorBase):
    """Least squares on the raw responses, reported as a direction.

    This is the baseline the rank methods are compared against. It needs the
    actual response values: fitting with ``y=None`` is an error. Grouping is
    ignored (raw responses are globally comparable by assumption).
    """

    _method_tag = "ols"

    def __init__(self, fit_intercept=True):
        self.fit_intercept = fit_intercept

    def fit(self, X, y=None, groups=None):
        if y is None:
            raise DataError("OLS requires raw responses")
        X, y, groups, dropped = drop_incomplete_rows(X, y, groups)
        if self.fit_intercept:
            design = np.column_stack([np.ones(y.size), X])
        else:
            design = X
        beta_full = least_squares(design, y)
        return self._finalize(
            beta_full, self.fit_intercept, X, dropped,
            n_iter=1, converged=True, objective=None,
        )


ESTIMATORS = {
    "gqr": GaussianQuantileRegressor,
    "tgqr": TruncatedGaussianQuantileRegressor,
    "eqr": EmpiricalQuantileRegressor,
    "spearmax": SpearmaxRegressor,
    "ols": OrdinaryLeastSquares,
}


def make_estimator(method: str, **params):
    """Instantiate an estimator by its short method tag ("gqr", "tgqr", ...)."""
    try:
        cls = ESTIMATORS[method]
    except KeyError:
        known = ", ".join(sorted(ESTIMATORS))
        raise ValueError(f"unknown method {method!r} (known: {known})") from None
    return cls(**params)
