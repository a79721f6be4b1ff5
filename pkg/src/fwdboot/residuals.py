"""Fitted and predictive residuals and the centered innovation distribution."""
from dataclasses import dataclass, field

import numpy as np

from .backend import kernels
from .exceptions import EmptyDistribution
from .kernel_regress import truncate_mean, truncate_sd

__all__ = [
    "ResidualSet",
    "ResidualDist",
    "fitted_residuals",
    "predictive_residuals",
    "center",
    "sample_innovations",
]


@dataclass(frozen=True)
class ResidualSet:
    """Standardised one-step residuals.

    ``values`` keeps one entry per usable transition in time order;
    ``n_excluded`` counts transitions dropped because the estimator had no
    kernel weight at the predictor.
    """

    values: np.ndarray
    kind: str
    n_excluded: int = 0


@dataclass(frozen=True)
class ResidualDist:
    centered_values: np.ndarray
    smoothing_sd: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def size(self):
        return self.centered_values.size


def _standardise(sample_resp, raw_mean, raw_var, bounds, kind):
    ok = ~(np.isnan(raw_mean) | np.isnan(raw_var))
    m = truncate_mean(raw_mean[ok], bounds)
    s = truncate_sd(np.sqrt(np.maximum(raw_var[ok], 0.0)), bounds)
    vals = (sample_resp[ok] - m) / s
    return ResidualSet(vals, kind, int((~ok).sum()))


def fitted_residuals(sample, model):
    """``(X_t - m(X_{t-1})) / sigma(X_{t-1})`` with the truncated full-sample fit."""
    x = np.asarray(sample, dtype=np.float64)
    pred = x[:-1]
    raw_mean = model.raw_mean(pred)
    raw_var = model.raw_var(pred)
    return _standardise(x[1:], raw_mean, raw_var, model.bounds, "fitted")


def predictive_residuals(sample, template):
    """Residuals of each transition under the fit that leaves that transition out.

    The delete-one fits share the template's bandwidths, kernel, bounds and
    volatility mode.
    """
    x = np.asarray(sample, dtype=np.float64)
    if x.size < 4:
        raise ValueError("predictive residuals need at least 3 transitions")
    pred = np.ascontiguousarray(x[:-1])
    resp = np.ascontiguousarray(x[1:])
    m = template
    r = kernels.mean_residuals(pred, resp, m.h, m.kernel.kind)
    raw_mean, raw_var = kernels.loo_parts(
        pred, resp, r, m.h, m.h_var, m.kernel.kind, m.homoscedastic
    )
    return _standardise(resp, raw_mean, raw_var, m.bounds, "predictive")


def center(rs, smoothing_sd=0.0):
    """Subtract the mean and sort."""
    vals = np.asarray(rs.values if isinstance(rs, ResidualSet) else rs, dtype=np.float64)
    if vals.size == 0:
        raise EmptyDistribution("no residuals to center")
    if smoothing_sd < 0:
        raise ValueError("smoothing_sd must be nonnegative")
    out = np.sort(vals - vals.mean())
    n_excl = rs.n_excluded if isinstance(rs, ResidualSet) else 0
    return ResidualDist(out, float(smoothing_sd), {"excluded_residuals": n_excl})


def sample_innovations(dist, n, rng):
    """Draw ``n`` innovations (an int or a shape) with replacement.

    With ``smoothing_sd > 0`` every draw gets independent Gaussian noise of
    that standard deviation added.
    """
    if dist.size == 0:
        raise EmptyDistribution("empty residual distribution")
    idx = rng.integers(0, dist.size, size=n)
    out = dist.centered_values[idx]
    if dist.smoothing_sd > 0:
        out = out + rng.normal(0.0, dist.smoothing_sd, size=n)
    return out


def build_distribution(sample, model, kind="fitted", smoothing_sd=0.0):
    """Residuals of the requested kind, centered."""
    if kind == "fitted":
        rs = fitted_residuals(sample, model)
    elif kind == "predictive":
        rs = predictive_residuals(sample, model)
    else:
        raise ValueError(f"unknown residual kind {kind!r}")
    return center(rs, smoothing_sd)
