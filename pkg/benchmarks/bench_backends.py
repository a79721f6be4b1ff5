"""Time the compiled kernels against the NumPy fallback.

Usage::

    python3 benchmarks/bench_backends.py [--T 500] [--repeat 5]

Each kernel is timed on identical inputs with both backends; the end-to-end
row runs one QPI forecast in a fresh interpreter with and without
``FWDBOOT_PURE_PYTHON=1``.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from fwdboot import _kernels_python, dgp
from fwdboot.kernel_regress import bandwidth_grid

try:
    from fwdboot import _kernels as _kernels_cython
except ImportError:
    _kernels_cython = None

E2E = """
import time, numpy as np
from fwdboot import dgp
from fwdboot.engine import qpi_predict
x = dgp.generate_series(dgp.preset("model1-normal"), {T}, dgp.substream(0, "bench"))
t = time.perf_counter()
qpi_predict(x, 5, 1000, residual_kind="predictive", rng=np.random.default_rng(0))
print(time.perf_counter() - t)
"""


def cases(T):
    x = dgp.generate_series(dgp.preset("model2-normal"), T, dgp.substream(0, "bench"))
    pred, resp = np.ascontiguousarray(x[:-1]), np.ascontiguousarray(x[1:])
    grid = bandwidth_grid(x)
    q = np.linspace(x.min(), x.max(), 1000)
    eps = np.random.default_rng(0).standard_normal((1000, 5))

    def sim(k):
        r = k.mean_residuals(pred, resp, 0.4, 0)
        sc = float(np.sqrt(k.mean_square(r)))
        return k.simulate(float(x[-1]), eps, pred, resp, 0.4, 0, 5 * np.abs(x).max(),
                          float(resp.mean()), True, sc, r * r, 0.6, 0.01, 2 * x.std(), sc)

    def loo(k):
        r = k.mean_residuals(pred, resp, 0.4, 0)
        return k.loo_parts(pred, resp, r, 0.4, 0.6, 0, False)

    return {
        "nw_eval (1000 queries)": lambda k: k.nw_eval(q, pred, resp, 0.4, 0),
        "loocv_scores (25 bandwidths)": lambda k: k.loocv_scores(pred, resp, grid, 0,
                                                                  float(resp.mean())),
        "loo_parts": loo,
        "simulate (1000 paths x 5 steps)": sim,
    }


def end_to_end(T, pure):
    env = dict(os.environ)
    env.pop("FWDBOOT_PURE_PYTHON", None)
    if pure:
        env["FWDBOOT_PURE_PYTHON"] = "1"
    out = subprocess.run([sys.executable, "-c", E2E.format(T=T)], env=env, check=True,
                         capture_output=True, text=True)
    return float(out.stdout.strip())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T", type=int, default=500, help="series length (default: 500)")
    ap.add_argument("--repeat", type=int, default=5, help="timing repeats (default: 5)")
    args = ap.parse_args()
    if _kernels_cython is None:
        sys.exit("compiled extension not built; run `pip install -e . --no-build-isolation`")

    print(f"T = {args.T}, best of {args.repeat}")
    print(f"| {'kernel':<32} | {'cython (ms)':>11} | {'python (ms)':>11} | {'speed-up':>8} |")
    print(f"|{'-' * 34}|{'-' * 13}|{'-' * 13}|{'-' * 10}|")
    for name, fn in cases(args.T).items():
        times = []
        for k in (_kernels_cython, _kernels_python):
            t = min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat))
            times.append(1e3 * t)
        print(f"| {name:<32} | {times[0]:>11.2f} | {times[1]:>11.2f} | {times[1] / times[0]:>7.1f}x |")
    c, p = end_to_end(args.T, False), end_to_end(args.T, True)
    name = "QPI-p forecast, end to end"
    print(f"| {name:<32} | {1e3 * c:>11.2f} | {1e3 * p:>11.2f} | {p / c:>7.1f}x |")


if __name__ == "__main__":
    main()
