"""Random-variate generation and Monte Carlo comparisons of the estimators.

Three preset scenarios sweep sample size, skewness, and tail weight:

* ``gaussian_grid``: Gaussian covariates (diag(1,2)) and errors, beta0=(2,1),
  n in {25, 50, 100, 250, 500, 1000, 3000};
* ``skew_sweep``: covariates and errors drawn from a stable law with
  alpha=1 and skewness beta in {-1,...,1}, n=500;
* ``stability_sweep``: symmetric stable draws with alpha in {0.2,...,2.0},
  n=500.

Each trial draws a design, forms y = X beta0 + eps, fits every requested
method, and records the estimated direction angle. Trial t of sweep cell k
uses the random stream seeded by (seed, k, t), so results are reproducible
and independent of any parallel scheduling.
"""
from __future__ import annotations

import configparser
import csv
import math
from dataclasses import dataclass, field, replace
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ._validation import DataError, NumericalError, as_1d_float, as_2d_float
from .estimators import ESTIMATORS, direction_angle, make_estimator

__all__ = [
    "StableParams",
    "CovariateDist",
    "ErrorDist",
    "ScenarioConfig",
    "TrialRecord",
    "TrialSummary",
    "sample_mvn",
    "sample_stable",
    "run_scenario",
    "summarize_trials",
    "preset_scenarios",
    "load_scenario_config",
    "write_summary_csv",
]


def _as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


# ---------------------------------------------------------------------------
# distributions


@dataclass(frozen=True)
class StableParams:
    """Parameters of a stable law: stability alpha in (0,2], skewness beta in
    [-1,1], scale > 0, location. alpha=2 is Gaussian with variance
    2*scale^2 (beta then has no effect)."""

    alpha: float
    beta: float = 0.0
    scale: float = 1.0
    location: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 2.0:
            raise DataError("stability parameter alpha must lie in (0, 2]")
        if not -1.0 <= self.beta <= 1.0:
            raise DataError("skewness parameter beta must lie in [-1, 1]")
        if not self.scale > 0.0:
            raise DataError("scale must be positive")


@dataclass(frozen=True, eq=False)
class CovariateDist:
    """Covariate distribution: jointly Gaussian with a covariance matrix, or
    i.i.d. stable draws applied to every column."""

    kind: str
    covariance: np.ndarray | None = None
    stable: StableParams | None = None

    def __post_init__(self):
        if self.kind == "gaussian":
            if self.covariance is None:
                raise DataError("gaussian covariates need a covariance matrix")
            object.__setattr__(self, "covariance", as_2d_float(self.covariance, "covariance"))
        elif self.kind == "stable":
            if self.stable is None:
                raise DataError("stable covariates need StableParams")
        else:
            raise DataError(f"unknown covariate distribution kind: {self.kind!r}")


@dataclass(frozen=True)
class ErrorDist:
    """Error distribution: centered Gaussian with the given variance
    (0 allowed, meaning noiseless), or a stable law."""

    kind: str
    variance: float = 1.0
    stable: StableParams | None = None

    def __post_init__(self):
        if self.kind == "gaussian":
            if self.variance < 0.0:
                raise DataError("error variance must be nonnegative")
        elif self.kind == "stable":
            if self.stable is None:
                raise DataError("stable errors need StableParams")
        else:
            raise DataError(f"unknown error distribution kind: {self.kind!r}")


def sample_mvn(covariance, n: int, rng) -> np.ndarray:
    """n i.i.d. rows from N_p(0, covariance), by Cholesky factorization."""
    S = as_2d_float(covariance, "covariance")
    if S.shape[0] != S.shape[1]:
        raise DataError("covariance must be square")
    if not np.allclose(S, S.T, atol=1e-12):
        raise DataError("covariance matrix must be symmetric")
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise DataError("covariance matrix must be positive definite") from None
    rng = _as_generator(rng)
    return rng.standard_normal((int(n), S.shape[0])) @ L.T


def sample_stable(params: StableParams, n: int, rng) -> np.ndarray:
    """n i.i.d. stable draws via the Chambers-Mallows-Stuck transform.

    Uses a uniform angle V on (-pi/2, pi/2) and a unit exponential W, with
    the usual separate branch at alpha = 1. In the S1 parameterization used
    here, rescaling an alpha = 1 variable contributes an extra
    (2/pi) * beta * scale * log(scale) shift. Very small alpha can overflow
    to inf in double precision; downstream consumers treat non-finite draws
    as a failed trial.
    """
    if not isinstance(params, StableParams):
        params = StableParams(*params)
    rng = _as_generator(rng)
    n = int(n)
    alpha, beta = params.alpha, params.beta
    V = (rng.random(n) - 0.5) * math.pi
    W = rng.exponential(1.0, n)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        if alpha == 1.0:
            half_pi = math.pi / 2.0
            x = (
                (half_pi + beta * V) * np.tan(V)
                - beta * np.log(half_pi * W * np.cos(V) / (half_pi + beta * V))
            ) / half_pi
            return params.scale * x + (2.0 / math.pi) * beta * params.scale * math.log(
                params.scale
            ) + params.location
        tan_half = math.tan(math.pi * alpha / 2.0)
        B = math.atan(beta * tan_half) / alpha
        S = (1.0 + (beta * tan_half) ** 2) ** (1.0 / (2.0 * alpha))
        x = (
            S
            * np.sin(alpha * (V + B))
            / np.cos(V) ** (1.0 / alpha)
            * (np.cos(V - alpha * (V + B)) / W) ** ((1.0 - alpha) / alpha)
        )
        return params.scale * x + params.location


# ---------------------------------------------------------------------------
# scenarios


_SWEEPS = (None, "n", "skewness", "stability")


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """Everything needed to reproduce one Monte Carlo scenario.

    ``sweep_name`` of "n", "skewness", or "stability" reinterprets
    ``sweep_values`` as sample sizes, stable skewness values, or stable
    stability values respectively (the latter two applied to both the
    covariate and the error distribution). Without a sweep the single cell
    is labeled by ``n``.
    """

    beta0: np.ndarray
    covariate_dist: CovariateDist
    error_dist: ErrorDist
    n: int
    trials: int
    seed: int
    methods: tuple = ("tgqr",)
    sweep_name: str | None = None
    sweep_values: tuple = ()
    name: str = ""

    def __post_init__(self):
        b = as_1d_float(self.beta0, "beta0")
        if b.size != 2:
            raise DataError("scenarios track the direction angle, so beta0 must have length 2")
        object.__setattr__(self, "beta0", b)
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "sweep_values", tuple(float(v) for v in self.sweep_values))
        if int(self.trials) < 1:
            raise DataError("trials must be at least 1")
        if int(self.n) < 1:
            raise DataError("n must be at least 1")
        for m in self.methods:
            if m not in ESTIMATORS:
                raise DataError(f"unknown method {m!r}")
        if self.sweep_name not in _SWEEPS:
            raise DataError(f"unknown sweep {self.sweep_name!r}")
        if self.sweep_name is not None and not self.sweep_values:
            raise DataError("sweep_values must be non-empty when sweep_name is set")

    @property
    def theta0(self) -> float:
        """True direction angle arctan(beta0[1] / beta0[0])."""
        return direction_angle(self.beta0)


@dataclass(frozen=True)
class TrialRecord:
    """One (method, trial) outcome. ``status`` is "ok", "excluded" (fitted
    first coefficient not positive, angle unusable), or "failed"."""

    method: str
    sweep_value: float
    trial: int
    theta_hat: float
    theta0: float
    status: str


@dataclass(frozen=True)
class TrialSummary:
    method: str
    sweep_value: float
    bias_deg: float
    sd_deg: float
    trials_completed: int


def _swept_cell(config: ScenarioConfig, value: float):
    """Sample size and distributions for one sweep cell."""
    n = config.n
    cov = config.covariate_dist
    err = config.error_dist
    if config.sweep_name == "n":
        n = int(value)
    elif config.sweep_name == "skewness":
        if cov.kind != "stable" or err.kind != "stable":
            raise DataError("skewness sweep needs stable covariates and errors")
        cov = replace(cov, stable=replace(cov.stable, beta=value))
        err = replace(err, stable=replace(err.stable, beta=value))
    elif config.sweep_name == "stability":
        if cov.kind != "stable" or err.kind != "stable":
            raise DataError("stability sweep needs stable covariates and errors")
        cov = replace(cov, stable=replace(cov.stable, alpha=value))
        err = replace(err, stable=replace(err.stable, alpha=value))
    return n, cov, err


def _draw_covariates(cov: CovariateDist, n: int, p: int, rng) -> np.ndarray:
    if cov.kind == "gaussian":
        return sample_mvn(cov.covariance, n, rng)
    cols = [sample_stable(cov.stable, n, rng) for _ in range(p)]
    return np.column_stack(cols)


def _draw_errors(err: ErrorDist, n: int, rng) -> np.ndarray:
    if err.kind == "gaussian":
        if err.variance == 0.0:
            return np.zeros(n)
        return rng.standard_normal(n) * math.sqrt(err.variance)
    return sample_stable(err.stable, n, rng)


def _run_trial(config: ScenarioConfig, k: int, sweep_value: float, t: int):
    n, cov, err = _swept_cell(config, sweep_value)
    p = config.beta0.size
    theta0 = config.theta0
    rng = np.random.default_rng((config.seed, k, t))
    records = []
    X = _draw_covariates(cov, n, p, rng)
    eps = _draw_errors(err, n, rng)
    with np.errstate(invalid="ignore", over="ignore"):
        y = X @ config.beta0 + eps
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        # heavy-tail draws can overflow double precision; count the whole
        # trial as failed rather than fitting a silently reduced sample
        return [
            TrialRecord(m, sweep_value, t, float("nan"), theta0, "failed")
            for m in config.methods
        ]
    for method in config.methods:
        est = make_estimator(method)
        try:
            est.fit(X, y)
        except (DataError, NumericalError, ValueError, np.linalg.LinAlgError):
            records.append(TrialRecord(method, sweep_value, t, float("nan"), theta0, "failed"))
            continue
        if est.coef_[0] <= 0.0:
            records.append(TrialRecord(method, sweep_value, t, float("nan"), theta0, "excluded"))
            continue
        records.append(
            TrialRecord(method, sweep_value, t, direction_angle(est.coef_), theta0, "ok")
        )
    return records


def run_scenario(config: ScenarioConfig, threads: int = 1):
    """All trial records for the scenario, in (sweep cell, trial) order.

    Estimator failures and sign-degenerate fits are recorded per trial, not
    raised. Identical configs give identical record lists regardless of
    ``threads``.
    """
    if config.sweep_name is None:
        cells = [(0, float(config.n))]
    else:
        cells = list(enumerate(config.sweep_values))
    tasks = [(k, val, t) for k, val in cells for t in range(int(config.trials))]

    def one(task):
        k, val, t = task
        return _run_trial(config, k, val, t)

    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            per_trial = list(pool.map(one, tasks))
    else:
        per_trial = [one(task) for task in tasks]
    return [rec for batch in per_trial for rec in batch]


def summarize_trials(records):
    """Per (method, sweep_value) bias and sample SD of the angle, in degrees.

    Only "ok" records enter the statistics; ``trials_completed`` counts them.
    SD uses the n-1 denominator (a two-point sample theta0 +/- d gives
    SD = d * sqrt(2)); with a single completed trial the SD is reported as
    0.0, with none both moments are NaN.
    """
    if not records:
        raise DataError("no records to summarize")
    order = []
    bucket = {}
    for rec in records:
        key = (rec.method, rec.sweep_value)
        if key not in bucket:
            bucket[key] = []
            order.append(key)
        bucket[key].append(rec)
    out = []
    for key in order:
        recs = bucket[key]
        theta0 = recs[0].theta0
        ok = np.array([r.theta_hat for r in recs if r.status == "ok"])
        completed = ok.size
        if completed == 0:
            bias = sd = float("nan")
        else:
            bias = math.degrees(float(np.mean(ok)) - theta0)
            sd = math.degrees(float(np.std(ok, ddof=1))) if completed > 1 else 0.0
        out.append(
            TrialSummary(
                method=key[0], sweep_value=key[1], bias_deg=bias, sd_deg=sd,
                trials_completed=int(completed),
            )
        )
    return out


# ---------------------------------------------------------------------------
# presets and config files


def preset_scenarios(trials: int = 1000) -> dict:
    """The three named scenarios. ``trials`` scales all of them (the source
    experiments used 10,000; 1,000 keeps desk runtimes sane)."""
    beta0 = (2.0, 1.0)
    methods = ("ols", "tgqr", "eqr", "spearmax")
    gaussian = ScenarioConfig(
        beta0=beta0,
        covariate_dist=CovariateDist("gaussian", covariance=np.diag([1.0, 2.0])),
        error_dist=ErrorDist("gaussian", variance=1.0),
        n=500, trials=trials, seed=0, methods=methods,
        sweep_name="n", sweep_values=(25, 50, 100, 250, 500, 1000, 3000),
        name="gaussian_grid",
    )
    skew = ScenarioConfig(
        beta0=beta0,
        covariate_dist=CovariateDist("stable", stable=StableParams(alpha=1.0, beta=0.0)),
        error_dist=ErrorDist("stable", stable=StableParams(alpha=1.0, beta=0.0)),
        n=500, trials=trials, seed=0, methods=methods,
        sweep_name="skewness", sweep_values=(-1.0, -0.5, 0.0, 0.5, 1.0),
        name="skew_sweep",
    )
    stability = ScenarioConfig(
        beta0=beta0,
        covariate_dist=CovariateDist("stable", stable=StableParams(alpha=1.0, beta=0.0)),
        error_dist=ErrorDist("stable", stable=StableParams(alpha=1.0, beta=0.0)),
        n=500, trials=trials, seed=0, methods=methods,
        sweep_name="stability", sweep_values=(0.2, 0.5, 1.0, 1.5, 2.0),
        name="stability_sweep",
    )
    return {"gaussian_grid": gaussian, "skew_sweep": skew, "stability_sweep": stability}


def _parse_floats(text: str):
    return [float(tok) for tok in text.replace(",", " ").split()]


def _parse_matrix(text: str) -> np.ndarray:
    rows = [r.strip() for r in text.split(";") if r.strip()]
    return np.array([_parse_floats(r) for r in rows])


def _stable_from_section(section) -> StableParams:
    return StableParams(
        alpha=section.getfloat("alpha"),
        beta=section.getfloat("beta", fallback=0.0),
        scale=section.getfloat("scale", fallback=1.0),
        location=section.getfloat("location", fallback=0.0),
    )


def load_scenario_config(path) -> ScenarioConfig:
    """Read a ScenarioConfig from an INI file.

    Expected sections: [scenario] with beta0, n, trials, seed, methods;
    [covariates] with kind=gaussian (covariance = "1 0; 0 2") or kind=stable
    (alpha, beta, scale, location); [error] with kind=gaussian (variance) or
    kind=stable; optional [sweep] with name and values.
    """
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise DataError(f"cannot read scenario config {path!r}")
    try:
        sc = parser["scenario"]
        beta0 = _parse_floats(sc.get("beta0"))
        n = sc.getint("n")
        trials = sc.getint("trials", fallback=1000)
        seed = sc.getint("seed", fallback=0)
        methods = tuple(m.strip() for m in sc.get("methods", fallback="tgqr").split(",") if m.strip())

        cov_sec = parser["covariates"]
        if cov_sec.get("kind") == "gaussian":
            cov = CovariateDist("gaussian", covariance=_parse_matrix(cov_sec.get("covariance")))
        else:
            cov = CovariateDist(cov_sec.get("kind", ""), stable=_stable_from_section(cov_sec))

        err_sec = parser["error"]
        if err_sec.get("kind") == "gaussian":
            err = ErrorDist("gaussian", variance=err_sec.getfloat("variance", fallback=1.0))
        else:
            err = ErrorDist(err_sec.get("kind", ""), stable=_stable_from_section(err_sec))

        sweep_name = None
        sweep_values = ()
        if parser.has_section("sweep"):
            sweep_name = parser["sweep"].get("name")
            sweep_values = tuple(_parse_floats(parser["sweep"].get("values")))
    except (configparser.Error, AttributeError, KeyError, TypeError, ValueError) as exc:
        # a missing option surfaces as None.split(...) -> AttributeError
        raise DataError(f"invalid scenario config {path!r}: {exc}") from exc
    return ScenarioConfig(
        beta0=beta0, covariate_dist=cov, error_dist=err, n=n, trials=trials,
        seed=seed, methods=methods, sweep_name=sweep_name, sweep_values=sweep_values,
        name=str(path),
    )


def write_summary_csv(summaries, fp, comment: str | None = None):
    """Write TrialSummary rows as CSV (method, sweep_value, bias_deg, sd_deg,
    trials_completed), optionally preceded by a '#' comment line."""
    close = False
    if isinstance(fp, (str, bytes)) or hasattr(fp, "__fspath__"):
        fp = open(fp, "w", newline="")
        close = True
    try:
        if comment:
            fp.write(comment.rstrip("\n") + "\n")
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(["method", "sweep_value", "bias_deg", "sd_deg", "trials_completed"])
        for s in summaries:
            writer.writerow(
                [s.method, f"{s.sweep_value:.10g}", f"{s.bias_deg:.10g}",
                 f"{s.sd_deg:.10g}", s.trials_completed]
            )
    finally:
        if close:
            fp.close()
