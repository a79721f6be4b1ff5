"""Monte-Carlo harness: MSPE, coverage (CVR) and mean length (LEN) of
forecasting methods over replicated series from a known process.

Every replication ``n`` draws from generators keyed by ``(seed, n, name)``,
so a table depends only on the configuration and the seed, not on the number
of worker processes or on which other methods were requested.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
import csv
import io
import json
import math
import re

import numpy as np

from . import dgp as _dgp
from .engine import fit_forecaster, oracle_paths, ppi_from_fit, qpi_from_fit, simulate_paths
from .engine import RESIDUAL_BANDWIDTHS, _columns
from .exceptions import DegenerateSample, FwdbootError, LengthMismatch
from .kernel_regress import KernelSpec, select_bandwidth

__all__ = [
    "Method",
    "parse_method",
    "ExperimentConfig",
    "MetricsRow",
    "MetricsTable",
    "mspe",
    "cvr",
    "interval_len",
    "run_experiment",
    "emit_table",
    "PRESETS",
    "preset_config",
    "load_config",
]

COMPLETION_THRESHOLD = 0.95


def _check_lengths(a, b):
    if len(a) != len(b):
        raise LengthMismatch(f"lengths differ: {len(a)} vs {len(b)}")
    if len(a) == 0:
        raise LengthMismatch("empty input")


def mspe(predictions, truths):
    p = np.asarray(predictions, dtype=np.float64)
    x = np.asarray(truths, dtype=np.float64)
    _check_lengths(p, x)
    return float(np.mean((x - p) ** 2))


def cvr(intervals, truths):
    """Share of truths inside the closed intervals."""
    iv = np.asarray(intervals, dtype=np.float64).reshape(-1, 2)
    x = np.asarray(truths, dtype=np.float64)
    _check_lengths(iv, x)
    return float(np.mean((iv[:, 0] <= x) & (x <= iv[:, 1])))


def interval_len(intervals):
    iv = np.asarray(intervals, dtype=np.float64).reshape(-1, 2)
    if iv.shape[0] == 0:
        raise LengthMismatch("empty input")
    return float(np.mean(iv[:, 1] - iv[:, 0]))


@dataclass(frozen=True)
class Method:
    name: str
    family: str  # point, oracle, spi, qpi, ppi
    loss: str = None
    residual_kind: str = None
    strategy: str = None


_SUFFIX = {None: "B2", "u": "B1", "o": "B2", "opv": "opv"}
_KIND = {"f": "fitted", "p": "predictive"}


def parse_method(name):
    """Map a table label such as ``"L2-PPI-p-u"`` to an engine configuration."""
    m = re.fullmatch(r"(L[12])-Bootstrap", name)
    if m:
        return Method(name, "point", m[1], "fitted", "B2")
    m = re.fullmatch(r"(L[12])-Oracle", name)
    if m:
        return Method(name, "oracle", m[1])
    if name == "SPI":
        return Method(name, "spi")
    m = re.fullmatch(r"QPI-([fp])(?:-(u|o|opv))?", name)
    if m:
        return Method(name, "qpi", None, _KIND[m[1]], _SUFFIX[m[2]])
    m = re.fullmatch(r"(L[12])-PPI-([fp])-(u|o|opv)", name)
    if m:
        return Method(name, "ppi", m[1], _KIND[m[2]], _SUFFIX[m[3]])
    raise ValueError(f"unknown method {name!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte-Carlo study.

    ``M`` is the number of paths for point predictions, QPIs and the oracle;
    ``M_ppi`` the number of inner paths per PPI replicate and ``B`` the number
    of PPI replicates. ``homoscedastic=None`` follows the process (constant
    volatility for ``log_sq``). ``residual_bandwidth`` is passed to
    :func:`~fwdboot.engine.fit_forecaster`.
    """

    dgp: _dgp.DGPSpec
    T: int
    methods: tuple
    k_max: int = 5
    N: int = 500
    M: int = 1000
    M_ppi: int = 100
    B: int = 500
    alpha: float = 0.05
    seed: int = 0
    homoscedastic: bool = None
    kernel: str = "epanechnikov"
    literal_predictive: bool = False
    under: float = 0.5
    over: float = 2.0
    residual_bandwidth: str = "optimal"

    def __post_init__(self):
        if isinstance(self.dgp, str):
            object.__setattr__(self, "dgp", _dgp.preset(self.dgp))
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.N < 1 or self.k_max < 1 or self.T < 10:
            raise ValueError("need N >= 1, k_max >= 1 and T >= 10")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.residual_bandwidth not in RESIDUAL_BANDWIDTHS:
            raise ValueError(f"residual_bandwidth must be one of {RESIDUAL_BANDWIDTHS}")
        for name in self.methods:
            parse_method(name)

    @property
    def is_homoscedastic(self):
        if self.homoscedastic is None:
            return self.dgp.homoscedastic
        return self.homoscedastic


def _replicate(config, n):
    """Run every method on replication ``n``.

    Returns ``(truth, {method: array}, failures, guard_events)`` where point
    methods give shape ``(k,)`` and interval methods ``(k, 2)``.
    """
    k = config.k_max
    seed = config.seed
    series = _dgp.generate_series(config.dgp, config.T + k, _dgp.substream(seed, n, "series"))
    sample, truth = series[: config.T + 1], series[config.T + 1:]
    kernel = KernelSpec(config.kernel)
    hom = config.is_homoscedastic
    methods = [parse_method(name) for name in config.methods]
    out, failures, guard_events = {}, {}, 0
    fits, cache = {}, {}

    def h_op():
        if "h_op" not in cache:
            try:
                cache["h_op"] = select_bandwidth(sample, kernel)
            except DegenerateSample:
                cache["h_op"] = 1.0
        return cache["h_op"]

    def get_fit(strategy, kind):
        key = (strategy, kind)
        if key not in fits:
            fits[key] = fit_forecaster(sample, strategy, kind, kernel=kernel, homoscedastic=hom,
                                       h_op=h_op(), under=config.under, over=config.over,
                                       residual_bandwidth=config.residual_bandwidth)
        return fits[key]

    for meth in methods:
        try:
            if meth.family in ("oracle", "spi"):
                if "oracle" not in cache:
                    paths = oracle_paths(config.dgp, sample[-1], k, config.M,
                                         _dgp.substream(seed, n, "oracle"))
                    cache["oracle"] = _columns(paths, config.alpha)
                l2, l1, bounds = cache["oracle"]
                out[meth.name] = bounds if meth.family == "spi" else (l2 if meth.loss == "L2" else l1)
            elif meth.family == "point":
                fit = get_fit(meth.strategy, meth.residual_kind)
                guard = "mean" if meth.loss == "L2" else "median"
                pm = simulate_paths(fit.model, fit.dist, sample[-1], k, config.M,
                                    _dgp.substream(seed, n, "point"), guard)
                guard_events += pm.n_guard
                out[meth.name] = pm.paths.mean(axis=0) if meth.loss == "L2" else np.median(pm.paths, axis=0)
            elif meth.family == "qpi":
                key = f"qpi-{meth.residual_kind}-{meth.strategy}"
                if key not in cache:
                    fit = get_fit(meth.strategy, meth.residual_kind)
                    cache[key] = qpi_from_fit(fit, k, config.M, config.alpha,
                                              _dgp.substream(seed, n, key))
                    guard_events += cache[key].diagnostics.get("guard_events", 0)
                out[meth.name] = cache[key].qpi
            else:
                key = f"ppi-{meth.residual_kind}-{meth.strategy}"
                if key not in cache:
                    fit = get_fit(meth.strategy, meth.residual_kind)
                    cache[key] = ppi_from_fit(fit, k, config.B, config.M_ppi, config.alpha,
                                              _dgp.substream(seed, n, key),
                                              literal_predictive=config.literal_predictive)
                    guard_events += cache[key].diagnostics.get("guard_events", 0)
                out[meth.name] = cache[key].ppi(meth.loss)
        except (FwdbootError, ArithmeticError, ValueError):
            failures[meth.name] = failures.get(meth.name, 0) + 1
    return truth, out, failures, guard_events


def _replicate_star(args):
    return _replicate(*args)


@dataclass
class MetricsRow:
    method: str
    horizon: int
    mspe: float
    cvr: float
    len: float
    completed: int

    def as_dict(self):
        return asdict(self)


@dataclass
class MetricsTable:
    rows: list = field(default_factory=list)
    n_replications: int = 0
    diagnostics: dict = field(default_factory=dict)

    def cell(self, method, horizon):
        for row in self.rows:
            if row.method == method and row.horizon == horizon:
                return row
        raise KeyError((method, horizon))

    def column(self, method, metric):
        """Metric values of ``method`` ordered by horizon."""
        rows = sorted((r for r in self.rows if r.method == method), key=lambda r: r.horizon)
        return np.array([getattr(r, metric) for r in rows])

    def incomplete(self, row):
        return row.completed < COMPLETION_THRESHOLD * self.n_replications

    @property
    def methods(self):
        seen = []
        for row in self.rows:
            if row.method not in seen:
                seen.append(row.method)
        return seen

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        rows = [
            MetricsRow(r["method"], int(r["horizon"]), *(_from_json_num(r[c]) for c in ("mspe", "cvr", "len")),
                       int(r["completed"]))
            for r in data["rows"]
        ]
        return cls(rows, int(data["n_replications"]), data.get("diagnostics", {}))


def _from_json_num(v):
    return math.nan if v is None else float(v)


def run_experiment(config, workers=1):
    """Replicate ``config.N`` times and aggregate the metrics per method and step."""
    args = [(config, n) for n in range(config.N)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate_star, args, chunksize=max(1, config.N // (4 * workers))))
    else:
        results = [_replicate(*a) for a in args]

    k = config.k_max
    truths = np.array([r[0] for r in results])
    guard_events = sum(r[3] for r in results)
    failures = {}
    rows = []
    for name in config.methods:
        fam = parse_method(name).family
        failures[name] = sum(r[2].get(name, 0) for r in results)
        ok = [i for i, r in enumerate(results) if name in r[1]]
        for step in range(k):
            mspe_v = cvr_v = len_v = math.nan
            if ok:
                x = truths[ok, step]
                vals = np.array([results[i][1][name][step] for i in ok])
                if fam in ("point", "oracle"):
                    mspe_v = mspe(vals, x)
                else:
                    cvr_v = cvr(vals, x)
                    len_v = interval_len(vals)
            rows.append(MetricsRow(name, step + 1, mspe_v, cvr_v, len_v, len(ok)))
    diag = {"guard_events": int(guard_events), "failures": failures}
    return MetricsTable(rows, config.N, diag)


_DECIMALS = {"mspe": 4, "cvr": 3, "len": 2}


def _fmt(v, metric):
    return "" if v is None or math.isnan(v) else f"{v:.{_DECIMALS[metric]}f}"


def emit_table(table, fmt="csv"):
    """Render a :class:`MetricsTable` as csv, markdown or json text.

    csv and json list one row per (method, horizon); markdown lays methods out
    as rows with one column per step and metric. Cells completed in fewer
    than 95% of the replications are flagged.
    """
    if fmt == "json":
        def num(v):
            return None if math.isnan(v) else v

        data = {
            "n_replications": table.n_replications,
            "rows": [
                {"method": r.method, "horizon": r.horizon, "mspe": num(r.mspe), "cvr": num(r.cvr),
                 "len": num(r.len), "completed": r.completed, "incomplete": table.incomplete(r)}
                for r in table.rows
            ],
            "diagnostics": table.diagnostics,
        }
        return json.dumps(data, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "horizon", "mspe", "cvr", "len", "completed", "flag"])
        for r in table.rows:
            w.writerow([r.method, r.horizon, _fmt(r.mspe, "mspe"), _fmt(r.cvr, "cvr"),
                        _fmt(r.len, "len"), r.completed, "incomplete" if table.incomplete(r) else ""])
        return buf.getvalue()
    if fmt == "markdown":
        return _markdown(table)
    raise ValueError(f"unknown format {fmt!r}")


def _markdown(table):
    steps = sorted({r.horizon for r in table.rows})
    metrics = [m for m in ("mspe", "cvr", "len")
               if any(not math.isnan(getattr(r, m)) for r in table.rows)]
    header = ["Method"] + [f"{m.upper()} {s}" for m in metrics for s in steps]
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for name in table.methods:
        cells = [name]
        for m in metrics:
            for s in steps:
                row = table.cell(name, s)
                text = _fmt(getattr(row, m), m)
                if text and table.incomplete(row):
                    text += "*"
                cells.append(text)
        lines.append("| " + " | ".join(cells) + " |")
    if any(table.incomplete(r) for r in table.rows):
        lines.append("")
        lines.append("\\* completed in fewer than 95% of replications")
    return "\n".join(lines) + "\n"


_POINTS = ("L2-Bootstrap", "L1-Bootstrap", "L2-Oracle", "L1-Oracle")
_TABLE4 = ("QPI-f", "QPI-p", "QPI-f-u", "QPI-p-u", "L2-PPI-f-u", "L2-PPI-p-u",
           "L1-PPI-f-u", "L1-PPI-p-u", "SPI")
# heteroscedastic studies estimate the variance at the optimal bandwidth throughout
_TABLE5 = ("QPI-f", "QPI-p", "QPI-f-opv", "QPI-p-opv", "L2-PPI-f-opv", "L2-PPI-p-opv",
           "L1-PPI-f-opv", "L1-PPI-p-opv", "SPI")
_APPC = ("L2-PPI-f-u", "L1-PPI-f-u", "L2-PPI-p-u", "L1-PPI-p-u",
         "L2-PPI-f-o", "L1-PPI-f-o", "L2-PPI-p-o", "L1-PPI-p-o", "SPI")
_APPD = ("L2-PPI-f-u", "L1-PPI-f-u", "L2-PPI-p-u", "L1-PPI-p-u",
         "L2-PPI-f-opv", "L1-PPI-f-opv", "L2-PPI-p-opv", "L1-PPI-p-opv", "SPI")


def _presets():
    out = {}
    for T in (100, 200):
        out[f"table1-T{T}"] = dict(dgp="model1-normal", T=T, methods=("L2-Bootstrap", "L2-Oracle"), M=1000)
        out[f"table2-T{T}"] = dict(dgp="model1-chisq", T=T, methods=_POINTS, M=1000)
        out[f"table3-T{T}"] = dict(dgp="model2-normal", T=T, methods=_POINTS, M=1000)
    for T in (50, 100, 200):
        out[f"table4-T{T}"] = dict(dgp="model1-normal", T=T, methods=_TABLE4, M=500)
        out[f"table5-T{T}"] = dict(dgp="model2-normal", T=T, methods=_TABLE5, M=500)
    out["appB-T1000"] = dict(dgp="model1-normal", T=1000,
                             methods=("QPI-f", "QPI-f-u", "QPI-p", "QPI-p-u"), M=500)
    for T in (50, 500):
        out[f"appC-T{T}"] = dict(dgp="model1-normal", T=T, methods=_APPC, M=500)
    out["appD-T50"] = dict(dgp="model2-normal", T=50, methods=_APPD, M=500)
    return out


PRESETS = _presets()
PRESET_HELP = {
    "table1": "point MSPE, log-square model, normal innovations",
    "table2": "point MSPE, log-square model, chi^2(3)-3 innovations",
    "table3": "point MSPE, sine/ARCH model",
    "table4": "QPI/PPI coverage, log-square model",
    "table5": "QPI/PPI coverage, sine/ARCH model (variance at optimal bandwidth)",
    "appB": "QPI with optimal vs under-smoothed bandwidth at T=1000",
    "appC": "PPI with under- vs over-smoothed generation",
    "appD": "PPI with under-smoothed vs optimal variance bandwidth",
}


def preset_config(name, paper_scale=False, **overrides):
    """Configuration of a named preset; ``paper_scale`` sets N=5000 and B=500."""
    try:
        base = dict(PRESETS[name])
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    if paper_scale:
        base.update(N=5000, B=500)
    base.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**base)


def load_config(path):
    """Read an :class:`ExperimentConfig` from a JSON file.

    ``dgp`` is a preset name or an object with ``model``, ``innovation`` and
    ``burn_in``; ``preset`` may name a base preset whose fields are overridden.
    """
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    base = dict(PRESETS[data.pop("preset")]) if "preset" in data else {}
    dgp_field = data.pop("dgp", base.pop("dgp", None))
    if isinstance(dgp_field, dict):
        dgp_field = _dgp.DGPSpec(**dgp_field)
    base.update(data)
    if dgp_field is None:
        raise ValueError("config needs a dgp")
    return ExperimentConfig(dgp=dgp_field, **base)


def with_overrides(config, **kw):
    return replace(config, **{k: v for k, v in kw.items() if v is not None})
