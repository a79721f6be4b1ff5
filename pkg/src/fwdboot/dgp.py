"""Known data-generating processes used in the Monte-Carlo studies.

``log_sq``    X_t = log(X_{t-1}^2 + 1) + e_t
``sin_garch`` X_t = sin(X_{t-1}) + e_t * sqrt(0.5 + 0.25 X_{t-1}^2)
"""
from dataclasses import dataclass
from typing import Callable, Optional
import zlib

import numpy as np

__all__ = [
    "DGPSpec",
    "PRESETS",
    "preset",
    "true_mean",
    "true_sd",
    "sample_innovation",
    "sample_innovations",
    "generate_series",
    "substream",
]


def _log_sq_mean(x):
    return np.log(np.square(x) + 1.0)


def _unit_sd(x):
    return np.ones_like(np.asarray(x, dtype=np.float64))


def _sin_mean(x):
    return np.sin(x)


def _garch_sd(x):
    return np.sqrt(0.5 + 0.25 * np.square(x))


_MODELS = {
    "log_sq": (_log_sq_mean, _unit_sd),
    "sin_garch": (_sin_mean, _garch_sd),
}
INNOVATIONS = ("std_normal", "chisq3_centered", "two_point")


@dataclass(frozen=True)
class DGPSpec:
    """A true model plus innovation law.

    ``model="custom"`` needs ``mean_fn`` and ``sd_fn`` (vectorised callables);
    ``innovation="custom"`` needs ``sampler(rng, size)``. Custom callables must
    be module-level functions to be usable with several worker processes.
    """

    model: str = "log_sq"
    innovation: str = "std_normal"
    burn_in: int = 200
    mean_fn: Optional[Callable] = None
    sd_fn: Optional[Callable] = None
    sampler: Optional[Callable] = None

    def __post_init__(self):
        if self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")
        if self.model == "custom":
            if self.mean_fn is None or self.sd_fn is None:
                raise ValueError("custom model needs mean_fn and sd_fn")
        elif self.model not in _MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        if self.innovation == "custom":
            if self.sampler is None:
                raise ValueError("custom innovation needs a sampler")
        elif self.innovation not in INNOVATIONS:
            raise ValueError(f"unknown innovation {self.innovation!r}")

    @property
    def homoscedastic(self):
        return self.model == "log_sq"


PRESETS = {
    "model1-normal": DGPSpec("log_sq", "std_normal"),
    "model1-chisq": DGPSpec("log_sq", "chisq3_centered"),
    "model2-normal": DGPSpec("sin_garch", "std_normal"),
}


def preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown DGP preset {name!r}; choose from {sorted(PRESETS)}") from None


def true_mean(spec, x):
    fn = spec.mean_fn if spec.model == "custom" else _MODELS[spec.model][0]
    return fn(x)


def true_sd(spec, x):
    fn = spec.sd_fn if spec.model == "custom" else _MODELS[spec.model][1]
    return fn(x)


def sample_innovations(spec, rng, size):
    kind = spec.innovation
    if kind == "std_normal":
        return rng.standard_normal(size)
    if kind == "chisq3_centered":
        # chi^2(3) - 3 as written: mean 0, variance 6
        return rng.chisquare(3.0, size) - 3.0
    if kind == "two_point":
        return np.where(rng.random(size) < 0.5, -1.0, 1.0)
    return np.asarray(spec.sampler(rng, size), dtype=np.float64)


def sample_innovation(spec, rng):
    return float(sample_innovations(spec, rng, 1)[0])


def generate_series(spec, T, rng):
    """Draw ``X_0 ~ U(-1, 1)``, run ``burn_in + T`` steps, keep the last ``T + 1``."""
    if T < 1:
        raise ValueError("T must be at least 1")
    n = spec.burn_in + T
    eps = sample_innovations(spec, rng, n)
    out = np.empty(n + 1)
    x = rng.uniform(-1.0, 1.0)
    out[0] = x
    mean_fn = spec.mean_fn if spec.model == "custom" else _MODELS[spec.model][0]
    sd_fn = spec.sd_fn if spec.model == "custom" else _MODELS[spec.model][1]
    for t in range(n):
        x = float(mean_fn(x) + sd_fn(x) * eps[t])
        out[t + 1] = x
    return out[spec.burn_in:]


def substream(seed, *key):
    """Independent generator keyed by ``(seed, *key)``.

    String key parts are hashed to integers, so a stream depends only on its
    own name and never on which other streams were created.
    """
    parts = tuple(
        zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in key
    )
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=parts)
    return np.random.Generator(np.random.PCG64(ss))
