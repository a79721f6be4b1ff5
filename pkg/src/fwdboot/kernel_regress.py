"""Local-constant (Nadaraya-Watson) estimation of the mean and volatility
functions of a first-order nonparametric autoregression.

The pairs ``(X[t-1], X[t])`` for ``t = 1..T`` are the regression data. The
mean estimate at ``x`` is the kernel-weighted average of the targets; the
variance estimate is the kernel-weighted average of squared mean residuals,
and the volatility is its square root. Both are clamped to finite bounds
before use in a recursion.
"""
from dataclasses import dataclass
import math

import numpy as np

from .backend import kernels
from .exceptions import DegenerateSample, EmptySample, ZeroDenominator

__all__ = [
    "KernelSpec",
    "Bandwidth",
    "TruncationBounds",
    "EstimatedModel",
    "kernel_eval",
    "nw_mean",
    "nw_var",
    "truncate_mean",
    "truncate_sd",
    "default_bounds",
    "select_bandwidth",
    "bandwidth_grid",
    "loocv_curve",
    "apply_strategy",
    "as_series",
]

SD_FLOOR = 0.01
STRATEGIES = ("B1", "B2", "opv")
_STRATEGY_ALIASES = {"b1": "B1", "u": "B1", "b2": "B2", "o": "B2", "opv": "opv"}


def as_series(x):
    """Return ``x`` as a contiguous 1-D float64 array."""
    arr = np.ascontiguousarray(x, dtype=np.float64).ravel()
    if arr.size == 0:
        raise EmptySample("empty series")
    return arr


@dataclass(frozen=True)
class KernelSpec:
    family: str = "epanechnikov"

    def __post_init__(self):
        if self.family not in ("epanechnikov", "gaussian"):
            raise ValueError(f"unknown kernel family {self.family!r}")

    @property
    def kind(self):
        return 0 if self.family == "epanechnikov" else 1

    def __call__(self, u):
        return kernel_eval(self, u)


EPANECHNIKOV = KernelSpec("epanechnikov")
GAUSSIAN = KernelSpec("gaussian")


def kernel_eval(spec, u):
    """Evaluate the kernel density at ``u`` (scalar or array)."""
    u = np.asarray(u, dtype=np.float64)
    if spec.kind == 0:
        out = np.where(np.abs(u) < 1.0, 0.75 * (1.0 - u * u), 0.0)
    else:
        out = np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Bandwidth:
    """Bandwidths for estimation, bootstrap generation and the variance fit."""

    h_est: float
    g_gen: float
    h_var: float
    strategy: str = "B1"

    def __post_init__(self):
        for name in ("h_est", "g_gen", "h_var"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")

    @property
    def g_var(self):
        """Variance bandwidth of the generating model."""
        return self.h_var if self.strategy == "opv" else self.g_gen


@dataclass(frozen=True)
class TruncationBounds:
    mean_cap: float
    sd_floor: float
    sd_cap: float

    def __post_init__(self):
        if not self.mean_cap > 0:
            raise ValueError("mean_cap must be positive")
        if not 0 < self.sd_floor <= self.sd_cap:
            raise ValueError("need 0 < sd_floor <= sd_cap")


def truncate_mean(v, bounds):
    return np.clip(v, -bounds.mean_cap, bounds.mean_cap)


def truncate_sd(v, bounds):
    return np.clip(v, bounds.sd_floor, bounds.sd_cap)


def default_bounds(sample, world="real", real_bounds=None):
    """Truncation constants computed from a series.

    In the real world the mean cap is five times the largest absolute value
    and the volatility cap twice the sample standard deviation. A bootstrap
    series gets ``min(2 * real_cap, 5 * max|x*|)`` for the mean and
    ``min(2 * real_sd_cap, 2 * sd(x*))`` for the volatility, i.e. at most four
    real-world standard deviations.
    """
    x = as_series(sample)
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    spread = 5.0 * float(np.max(np.abs(x)))
    if world == "real":
        mean_cap, sd_cap = spread, 2.0 * sd
    elif world == "bootstrap":
        if real_bounds is None:
            raise ValueError("bootstrap bounds need the real-world bounds")
        mean_cap = min(2.0 * real_bounds.mean_cap, spread)
        sd_cap = min(2.0 * real_bounds.sd_cap, 2.0 * sd)
    else:
        raise ValueError(f"unknown world {world!r}")
    # constant (or all-zero) input collapses the caps onto the floor
    if not mean_cap > 0:
        mean_cap = SD_FLOOR
    if not sd_cap >= SD_FLOOR:
        sd_cap = SD_FLOOR
    return TruncationBounds(mean_cap, SD_FLOOR, sd_cap)


class EstimatedModel:
    """Truncated local-constant mean and volatility fitted on a series.

    Parameters
    ----------
    sample : array_like
        Observations ``X_0, ..., X_T``.
    h : float
        Bandwidth of the mean function (also used for the mean residuals
        entering the variance fit).
    h_var : float, optional
        Bandwidth of the variance function. Defaults to ``h``.
    bounds : TruncationBounds, optional
        Defaults to :func:`default_bounds` of ``sample``.
    kernel : KernelSpec
    homoscedastic : bool
        Use one constant volatility, the root mean square of the mean
        residuals, instead of a kernel fit.
    excluded_index : int, optional
        Drop the pair ``(X[t-1], X[t])`` for this ``t`` in ``1..T``.
    sigma_const : float, optional
        Fix the constant volatility instead of estimating it. Only meaningful
        with ``homoscedastic=True``.
    """

    def __init__(self, sample, h, *, h_var=None, bounds=None, kernel=EPANECHNIKOV,
                 homoscedastic=False, excluded_index=None, sigma_const=None):
        x = as_series(sample)
        if x.size < 2:
            raise EmptySample("need at least two observations")
        pred, resp = x[:-1], x[1:]
        if excluded_index is not None:
            if not 1 <= excluded_index <= pred.size:
                raise IndexError(f"excluded_index {excluded_index} outside 1..{pred.size}")
            keep = np.arange(pred.size) != excluded_index - 1
            pred, resp = pred[keep], resp[keep]
        if bounds is None:
            bounds = default_bounds(x)
        self.sample = x
        self.excluded_index = excluded_index
        self._setup(pred, resp, h, h_var, bounds, kernel, homoscedastic)
        if sigma_const is not None:
            if not sigma_const > 0:
                raise ValueError("sigma_const must be positive")
            self.sigma_const = float(sigma_const)

    @classmethod
    def from_pairs(cls, pred, resp, h, *, bounds, h_var=None, kernel=EPANECHNIKOV,
                   homoscedastic=False):
        """Fit directly on regression pairs, e.g. after deleting some of them."""
        self = cls.__new__(cls)
        self.sample = None
        self.excluded_index = None
        pred = np.ascontiguousarray(pred, dtype=np.float64)
        resp = np.ascontiguousarray(resp, dtype=np.float64)
        if pred.shape != resp.shape or pred.size == 0:
            raise ValueError("pred and resp must be equal-length and nonempty")
        self._setup(pred, resp, h, h_var, bounds, kernel, homoscedastic)
        return self

    def _setup(self, pred, resp, h, h_var, bounds, kernel, homoscedastic):
        if not h > 0 or (h_var is not None and not h_var > 0):
            raise ValueError("bandwidths must be positive")
        self.pred, self.resp = pred, resp
        self.h = float(h)
        self.h_var = float(h if h_var is None else h_var)
        self.bounds = bounds
        self.kernel = kernel
        self.homoscedastic = bool(homoscedastic)
        self.residuals = kernels.mean_residuals(pred, resp, self.h, kernel.kind)
        self.r2 = self.residuals * self.residuals
        self.global_var = kernels.mean_square(self.residuals)
        self.sigma_const = float(truncate_sd(math.sqrt(self.global_var), bounds))

    @property
    def n_pairs(self):
        return self.pred.size

    def raw_mean(self, x):
        """Untruncated mean estimate; NaN where every weight vanishes."""
        return kernels.nw_eval(_query(x), self.pred, self.resp, self.h, self.kernel.kind)

    def raw_var(self, x):
        """Untruncated variance estimate (squared-volatility scale)."""
        q = _query(x)
        if self.homoscedastic:
            return np.full(q.size, self.global_var)
        return kernels.nw_eval(q, self.pred, self.r2, self.h_var, self.kernel.kind)

    def mean(self, x):
        return truncate_mean(self.raw_mean(x), self.bounds)

    def sd(self, x):
        if self.homoscedastic:
            return np.full(_query(x).size, self.sigma_const)
        v = self.raw_var(x)
        with np.errstate(invalid="ignore"):
            s = truncate_sd(np.sqrt(np.maximum(v, 0.0)), self.bounds)
        return np.where(np.isnan(v), np.nan, s)

    def simulate(self, x0, eps, guard):
        """Run the clamped recursion from ``x0`` along each row of ``eps``.

        Invalid mean evaluations and non-finite pseudo-values are replaced by
        ``guard``; an invalid volatility by the constant volatility.
        Returns ``(paths, n_guard)``.
        """
        eps = np.ascontiguousarray(eps, dtype=np.float64)
        if eps.ndim != 2:
            raise ValueError("eps must be a 2-D array")
        b = self.bounds
        return kernels.simulate(
            float(x0), eps, self.pred, self.resp, self.h, self.kernel.kind,
            b.mean_cap, float(guard), not self.homoscedastic, self.sigma_const,
            self.r2, self.h_var, b.sd_floor, b.sd_cap, self.sigma_const,
        )


def _query(x):
    return np.ascontiguousarray(np.atleast_1d(np.asarray(x, dtype=np.float64)).ravel())


def nw_mean(model, x):
    """Untruncated mean estimate at a single point."""
    v = model.raw_mean(x)[0]
    if np.isnan(v):
        raise ZeroDenominator(f"no kernel weight at x={x}")
    return float(v)


def nw_var(model, x):
    """Untruncated variance estimate at a single point."""
    v = model.raw_var(x)[0]
    if np.isnan(v):
        raise ZeroDenominator(f"no kernel weight at x={x}")
    return float(v)


def bandwidth_grid(sample, n_grid=25, low=0.1, high=10.0):
    """Log-spaced candidates around the rule-of-thumb pilot ``1.06 sd T^(-1/5)``."""
    x = as_series(sample)
    sd = float(np.std(x[:-1], ddof=1)) if x.size > 2 else 0.0
    if not sd > 0:
        raise DegenerateSample("predictors have zero variance")
    pilot = 1.06 * sd * (x.size - 1) ** -0.2
    return np.geomspace(low, high, n_grid) * pilot


def loocv_curve(sample, grid, kernel=EPANECHNIKOV):
    """Leave-one-out mean squared error of the mean fit at each bandwidth."""
    x = as_series(sample)
    pred, resp = np.ascontiguousarray(x[:-1]), np.ascontiguousarray(x[1:])
    grid = np.ascontiguousarray(grid, dtype=np.float64)
    return kernels.loocv_scores(pred, resp, grid, kernel.kind, float(np.mean(resp)))


def select_bandwidth(sample, kernel=EPANECHNIKOV, grid=None):
    """Cross-validated bandwidth of the mean function.

    Minimises the leave-one-out squared error over ``grid`` (default
    :func:`bandwidth_grid`). Ties go to the smallest candidate.
    """
    x = as_series(sample)
    if grid is None:
        if x.size < 10:
            raise ValueError("bandwidth selection needs at least 10 observations")
        grid = bandwidth_grid(x)
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 1:
        return float(grid[0])
    if not np.ptp(x[:-1]) > 0:
        raise DegenerateSample("predictors have zero variance")
    scores = loocv_curve(x, grid, kernel)
    return float(grid[int(np.argmin(scores))])


def apply_strategy(h_op, strategy, homoscedastic=False, under=0.5, over=2.0):
    """Turn the selected bandwidth into estimation/generation/variance bandwidths.

    ``B1`` under-smooths everything; ``B2`` estimates at ``h_op`` and generates
    bootstrap series at ``over * h_op``; ``opv`` under-smooths the mean but
    keeps ``h_op`` for the variance function.
    """
    if not h_op > 0:
        raise ValueError("h_op must be positive")
    key = _STRATEGY_ALIASES.get(str(strategy).lower())
    if key is None:
        raise ValueError(f"unknown strategy {strategy!r}")
    if key == "B1":
        h = under * h_op
        return Bandwidth(h, h, h, key)
    if key == "B2":
        return Bandwidth(h_op, over * h_op, h_op, key)
    h = under * h_op
    # no variance function to smooth separately
    return Bandwidth(h, h, h if homoscedastic else h_op, key)
