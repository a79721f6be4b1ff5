"""Forward-bootstrap forecasting: point predictions, quantile intervals (QPI)
and pertinent intervals (PPI) built from predictive roots.

All randomised functions take a :class:`numpy.random.Generator` and are pure
functions of their inputs and the generator state.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from . import dgp as _dgp
from .exceptions import DegenerateSample, NumericalError
from .kernel_regress import (
    EPANECHNIKOV,
    EstimatedModel,
    apply_strategy,
    as_series,
    default_bounds,
    select_bandwidth,
)
from .residuals import build_distribution, sample_innovations

__all__ = [
    "PathMatrix",
    "PredictionResult",
    "Fit",
    "guard_value",
    "guard_fill",
    "simulate_paths",
    "point_predict",
    "quantile",
    "qpi",
    "fit_forecaster",
    "qpi_predict",
    "qpi_from_fit",
    "generate_bootstrap_series",
    "ppi_predict",
    "ppi_from_fit",
    "oracle_predict",
]

GUARD_POLICIES = ("mean", "median")
RESIDUAL_BANDWIDTHS = ("optimal", "strategy")
MAX_RETRIES = 3


def guard_fill(policy, sample):
    """Replacement value for an invalid estimate: sample mean or median."""
    x = np.asarray(sample, dtype=np.float64)
    if policy == "mean":
        return float(np.mean(x))
    if policy == "median":
        return float(np.median(x))
    raise ValueError(f"unknown guard policy {policy!r}")


def guard_value(v, policy, sample, diagnostics=None):
    """Pass finite ``v`` through; otherwise return the policy's replacement.

    ``None`` and non-finite numbers count as invalid. Replacements are counted
    under ``"guard_events"`` in ``diagnostics`` when given.
    """
    try:
        ok = v is not None and math.isfinite(v)
    except TypeError:
        ok = False
    if ok:
        return float(v)
    if diagnostics is not None:
        diagnostics["guard_events"] = diagnostics.get("guard_events", 0) + 1
    return guard_fill(policy, sample)


@dataclass(frozen=True)
class PathMatrix:
    """Bootstrap trajectories; row ``m`` holds ``X*_{T+1}, ..., X*_{T+k}``."""

    paths: np.ndarray
    origin: float
    n_guard: int = 0

    @property
    def horizon(self):
        return self.paths.shape[1]


@dataclass
class PredictionResult:
    """Forecasts for steps ``1..horizon``; index ``i`` is step ``i + 1``.

    ``qpi``, ``ppi_l2`` and ``ppi_l1`` have shape ``(horizon, 2)`` holding
    lower and upper bounds. The PPI fields are ``None`` unless requested.
    """

    horizon: int
    alpha: float
    l2_point: np.ndarray
    l1_point: np.ndarray
    qpi: np.ndarray
    ppi_l2: np.ndarray = None
    ppi_l1: np.ndarray = None
    diagnostics: dict = field(default_factory=dict)

    def ppi(self, loss="L2"):
        return self.ppi_l2 if loss.upper() == "L2" else self.ppi_l1

    def to_dict(self, intervals=True):
        out = {
            "horizon": self.horizon,
            "alpha": self.alpha,
            "steps": [],
            "diagnostics": dict(self.diagnostics),
        }
        for i in range(self.horizon):
            row = {
                "step": i + 1,
                "l2_point": float(self.l2_point[i]),
                "l1_point": float(self.l1_point[i]),
            }
            if intervals:
                row["qpi"] = [float(v) for v in self.qpi[i]]
                if self.ppi_l2 is not None:
                    row["ppi_l2"] = [float(v) for v in self.ppi_l2[i]]
                    row["ppi_l1"] = [float(v) for v in self.ppi_l1[i]]
            out["steps"].append(row)
        return out


def simulate_paths(model, innov, x_T, k, M, rng, guard="mean", guard_sample=None):
    """Simulate ``M`` forward trajectories of length ``k`` from ``x_T``.

    Innovations are resampled from ``innov`` (a :class:`ResidualDist`).
    Invalid estimates are replaced according to ``guard``, using the mean or
    median of ``guard_sample`` (default: the model's own series).
    """
    if k < 1 or M < 1:
        raise ValueError("need k >= 1 and M >= 1")
    eps = sample_innovations(innov, (M, k), rng)
    fill = guard_fill(guard, _guard_source(model, guard_sample))
    paths, n_guard = model.simulate(x_T, eps, fill)
    return PathMatrix(paths, float(x_T), int(n_guard))


def _guard_source(model, guard_sample):
    if guard_sample is not None:
        return guard_sample
    if model.sample is not None:
        return model.sample
    return np.concatenate([model.pred[:1], model.resp])


def _endpoints(paths, step=None):
    arr = paths.paths if isinstance(paths, PathMatrix) else np.asarray(paths)
    if arr.ndim == 1:
        return arr
    return arr[:, -1 if step is None else step - 1]


def point_predict(paths, loss="L2", step=None):
    """Mean (L2) or median (L1) of the simulated values at ``step`` (default last)."""
    v = _endpoints(paths, step)
    if v.size == 0:
        raise ValueError("no paths")
    loss = loss.upper()
    if loss == "L2":
        return float(np.mean(v))
    if loss == "L1":
        return float(np.median(v))
    raise ValueError(f"unknown loss {loss!r}")


def quantile(values, beta):
    """Order statistic of rank ``ceil(n * beta)`` (1-based, clipped to ``1..n``)."""
    v = np.sort(np.asarray(values, dtype=np.float64), axis=0)
    n = v.shape[0]
    # round first so that e.g. 100 * 0.95 is not pushed to rank 96
    rank = math.ceil(round(n * beta, 9))
    return v[min(max(rank, 1), n) - 1]


def qpi(paths, alpha, step=None):
    """Equal-tailed quantile interval of the simulated values."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    v = _endpoints(paths, step)
    if v.size < 2:
        raise ValueError("need at least two paths")
    return float(quantile(v, alpha / 2)), float(quantile(v, 1 - alpha / 2))


def _columns(paths, alpha):
    l2 = paths.mean(axis=0)
    l1 = np.median(paths, axis=0)
    s = np.sort(paths, axis=0)
    lo = quantile(s, alpha / 2)
    hi = quantile(s, 1 - alpha / 2)
    return l2, l1, np.column_stack([lo, hi])


@dataclass
class Fit:
    """Estimated model, residual distribution and bandwidths for one series."""

    sample: np.ndarray
    h_op: float
    bandwidth: object
    model: EstimatedModel
    dist: object
    residual_kind: str
    kernel: object
    homoscedastic: bool
    diagnostics: dict
    residual_bandwidth: str = "optimal"


def _fit_models(x, bw, h_op, kernel, homoscedastic, residual_bandwidth, bounds=None):
    """Return ``(model, base)``: the model that iterates the recursion and the
    model whose residuals define the innovation law.
    """
    if residual_bandwidth not in RESIDUAL_BANDWIDTHS:
        raise ValueError(f"residual_bandwidth must be one of {RESIDUAL_BANDWIDTHS}")
    if residual_bandwidth == "strategy" or bw.h_est == h_op:
        model = EstimatedModel(x, bw.h_est, h_var=bw.h_var, bounds=bounds, kernel=kernel,
                               homoscedastic=homoscedastic)
        return model, model
    base = EstimatedModel(x, h_op, bounds=bounds, kernel=kernel, homoscedastic=homoscedastic)
    # the innovation scale goes with the residual law it standardises
    sigma = base.sigma_const if homoscedastic else None
    model = EstimatedModel(x, bw.h_est, h_var=bw.h_var, bounds=base.bounds, kernel=kernel,
                           homoscedastic=homoscedastic, sigma_const=sigma)
    return model, base


def fit_forecaster(sample, strategy="B2", residual_kind="fitted", *, kernel=EPANECHNIKOV,
                   homoscedastic=False, h_op=None, smoothing_sd=0.0, under=0.5, over=2.0,
                   residual_bandwidth="optimal"):
    """Select the bandwidth, fit the truncated estimators and build the residual law.

    With ``h_op=None`` the bandwidth is chosen by :func:`select_bandwidth`. A
    series with constant predictors has no meaningful bandwidth; ``h_op = 1``
    is used and flagged in the diagnostics.

    ``residual_bandwidth="optimal"`` takes residuals (and, with constant
    volatility, the innovation scale) from the fit at ``h_op`` while the mean
    that is iterated uses the strategy's bandwidth. ``"strategy"`` takes
    residuals from the strategy's own fit.
    """
    x = as_series(sample)
    if x.size < 10:
        raise ValueError("forecasting needs at least 10 observations")
    diagnostics = {}
    if h_op is None:
        try:
            h_op = select_bandwidth(x, kernel)
        except DegenerateSample:
            h_op = 1.0
            diagnostics["degenerate_sample"] = 1
    bw = apply_strategy(h_op, strategy, homoscedastic, under, over)
    model, base = _fit_models(x, bw, h_op, kernel, homoscedastic, residual_bandwidth)
    dist = build_distribution(x, base, residual_kind, smoothing_sd)
    diagnostics.update(dist.diagnostics)
    return Fit(x, float(h_op), bw, model, dist, residual_kind, kernel, bool(homoscedastic),
               diagnostics, residual_bandwidth)


def qpi_from_fit(fit, k, M, alpha, rng, guard="mean"):
    pm = simulate_paths(fit.model, fit.dist, fit.sample[-1], k, M, rng, guard)
    l2, l1, bounds = _columns(pm.paths, alpha)
    diag = dict(fit.diagnostics)
    diag["guard_events"] = pm.n_guard
    return PredictionResult(k, alpha, l2, l1, bounds, diagnostics=diag)


def qpi_predict(sample, k, M=1000, alpha=0.05, residual_kind="fitted", strategy="B2",
                rng=None, *, guard="mean", **fit_options):
    """Point predictions and QPI for steps ``1..k`` from the last observation.

    ``residual_kind="fitted"`` is the fitted-residual bootstrap,
    ``"predictive"`` its delete-one counterpart. ``strategy="B2"`` estimates at
    the selected bandwidth, ``"B1"`` under-smooths.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    rng = np.random.default_rng() if rng is None else rng
    fit = fit_forecaster(sample, strategy, residual_kind, **fit_options)
    return qpi_from_fit(fit, k, M, alpha, rng, guard)


def generate_bootstrap_series(model_g, innov, T, sample, rng, guard="mean"):
    """Bootstrap series ``X*_0..X*_T`` started at a uniformly drawn observation.

    Returns ``(series, n_guard)``.
    """
    x = np.asarray(sample, dtype=np.float64)
    eps = sample_innovations(innov, (1, T), rng)
    start = x[rng.integers(0, x.size)]
    tail, n_guard = model_g.simulate(start, eps, guard_fill(guard, x))
    return np.concatenate([[start], tail[0]]), int(n_guard)


def _generating_model(fit):
    bw = fit.bandwidth
    m = fit.model
    if bw.g_gen == bw.h_est and bw.g_var == bw.h_var:
        return m
    # with constant volatility the innovation scale belongs to the residual
    # law: an over-smoothed mean must not inflate it through its own bias
    sigma = m.sigma_const if fit.homoscedastic else None
    return EstimatedModel(fit.sample, bw.g_gen, h_var=bw.g_var, bounds=m.bounds,
                          kernel=fit.kernel, homoscedastic=fit.homoscedastic,
                          sigma_const=sigma)


def _ppi_replicate(fit, model_g, k, M, g, guard, literal_predictive):
    x = fit.sample
    T = x.size - 1
    bw = fit.bandwidth
    eps_series = sample_innovations(fit.dist, (1, T), g)
    eps_future = sample_innovations(fit.dist, (1, k), g)
    start = x[g.integers(0, T + 1)]
    fill = guard_fill(guard, x)
    tail, n1 = model_g.simulate(start, eps_series, fill)
    series = np.concatenate([[start], tail[0]])
    if not np.all(np.isfinite(series)):
        raise NumericalError("non-finite bootstrap series")
    bounds_star = default_bounds(series, "bootstrap", real_bounds=fit.model.bounds)
    model_star, base_star = _fit_models(series, bw, fit.h_op, fit.kernel, fit.homoscedastic,
                                        fit.residual_bandwidth, bounds_star)
    # forward bootstrap: the future starts from the observed last value
    future, n2 = model_g.simulate(x[-1], eps_future, fill)
    inner_dist = fit.dist
    if literal_predictive and fit.residual_kind == "predictive":
        inner_dist = build_distribution(series, base_star, "predictive")
    eps_inner = sample_innovations(inner_dist, (M, k), g)
    inner, n3 = model_star.simulate(x[-1], eps_inner, guard_fill(guard, series))
    l2 = inner.mean(axis=0)
    l1 = np.median(inner, axis=0)
    return future[0] - l2, future[0] - l1, n1 + n2 + n3


def ppi_from_fit(fit, k, B, M, alpha, rng, guard="mean", literal_predictive=False):
    x = fit.sample
    point = simulate_paths(fit.model, fit.dist, x[-1], k, M, rng, guard)
    l2, l1, qbounds = _columns(point.paths, alpha)
    seeds = rng.integers(0, 2**63, size=B)
    model_g = _generating_model(fit)
    roots_l2, roots_l1 = [], []
    n_guard = point.n_guard
    retries = skipped = 0
    for b in range(B):
        g = np.random.Generator(np.random.PCG64(int(seeds[b])))
        for attempt in range(MAX_RETRIES + 1):
            try:
                r2, r1, ng = _ppi_replicate(fit, model_g, k, M, g, guard, literal_predictive)
            except (NumericalError, FloatingPointError):
                if attempt == MAX_RETRIES:
                    skipped += 1
                else:
                    retries += 1
                continue
            roots_l2.append(r2)
            roots_l1.append(r1)
            n_guard += ng
            break
    if not roots_l2:
        raise NumericalError("every bootstrap replicate failed")
    roots_l2 = np.sort(np.array(roots_l2), axis=0)
    roots_l1 = np.sort(np.array(roots_l1), axis=0)
    lo, hi = alpha / 2, 1 - alpha / 2
    ppi_l2 = np.column_stack([l2 + quantile(roots_l2, lo), l2 + quantile(roots_l2, hi)])
    ppi_l1 = np.column_stack([l1 + quantile(roots_l1, lo), l1 + quantile(roots_l1, hi)])
    diag = dict(fit.diagnostics)
    diag.update(guard_events=n_guard, retries=retries, skipped_replicates=skipped)
    return PredictionResult(k, alpha, l2, l1, qbounds, ppi_l2, ppi_l1, diag)


def ppi_predict(sample, k, B=500, M=100, alpha=0.05, residual_kind="predictive",
                strategy="B1", rng=None, *, guard="mean", literal_predictive=False,
                **fit_options):
    """Pertinent prediction intervals for steps ``1..k``.

    Each of the ``B`` replicates generates a bootstrap series with the
    generating bandwidth, re-estimates the model on it with the estimation
    bandwidth, rolls the future from the observed last value and records the
    predictive root against the re-estimated model's prediction. Intervals are
    centred at the L2 (``ppi_l2``) and L1 (``ppi_l1``) point predictions.

    ``literal_predictive=True`` recomputes delete-one residuals on every
    bootstrap series for the inner prediction; by default the original
    residual distribution is reused there.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if B < 1:
        raise ValueError("B must be at least 1")
    x = as_series(sample)
    if x.size < 20:
        raise ValueError("PPI needs at least 20 observations")
    rng = np.random.default_rng() if rng is None else rng
    fit = fit_forecaster(x, strategy, residual_kind, **fit_options)
    return ppi_from_fit(fit, k, B, M, alpha, rng, guard, literal_predictive)


def oracle_paths(spec, x_T, k, M, rng):
    """Trajectories under the true model and innovation law."""
    x = np.full(M, float(x_T))
    out = np.empty((M, k))
    for i in range(k):
        eps = _dgp.sample_innovations(spec, rng, M)
        x = _dgp.true_mean(spec, x) + _dgp.true_sd(spec, x) * eps
        out[:, i] = x
    return out


def oracle_predict(spec, x_T, k, M, alpha, rng):
    """Simulation predictor and interval (SPI) with the true model."""
    paths = oracle_paths(spec, x_T, k, M, rng)
    l2, l1, bounds = _columns(paths, alpha)
    return PredictionResult(k, alpha, l2, l1, bounds)
