"""Shared helpers for the test suite."""
import numpy as np

TRUE_BETA = np.array([2.0, 1.0])
TRUE_COV = np.diag([1.0, 2.0])
TRUE_ANGLE = 0.4636476090008061  # arctan(1/2)
SIGMA_STAR = 0.37796447300922725  # 7 ** -0.5


def gaussian_design(n, seed, noise=1.0):
    """Draw (X, y) from the reference Gaussian setup: X ~ N(0, diag(1,2)),
    y = X (2,1)' + noise * N(0,1)."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 2)) * np.sqrt(np.diag(TRUE_COV))
    y = X @ TRUE_BETA + noise * rng.standard_normal(n)
    return X, y
