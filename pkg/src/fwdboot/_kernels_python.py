"""Pure NumPy versions of the routines in ``_kernels.pyx``.

Same signatures and semantics. Sums use NumPy reductions rather than the
compiled sequential loop, so the two backends agree to rounding, not bitwise.
"""
import numpy as np

INV_SQRT_2PI = 0.3989422804014327
_CHUNK = 2048


def _kern(kind, u):
    if kind == 0:
        w = 0.75 * (1.0 - u * u)
        w[np.abs(u) >= 1.0] = 0.0
        return w
    return INV_SQRT_2PI * np.exp(-0.5 * u * u)


def _weighted(query, pred, resp, h, kind):
    w = _kern(kind, (query[:, None] - pred[None, :]) / h)
    num = (w * resp[None, :]).sum(axis=1)
    den = w.sum(axis=1)
    return num, den


def nw_eval(query, pred, resp, h, kind):
    query = np.asarray(query, dtype=np.float64)
    out = np.empty(query.shape[0])
    for start in range(0, query.shape[0], _CHUNK):
        q = query[start:start + _CHUNK]
        num, den = _weighted(q, pred, resp, h, kind)
        with np.errstate(invalid="ignore", divide="ignore"):
            out[start:start + _CHUNK] = np.where(den > 0.0, num / den, np.nan)
    return out


def mean_residuals(pred, resp, h, kind):
    return resp - nw_eval(pred, pred, resp, h, kind)


def mean_square(r):
    r = np.asarray(r, dtype=np.float64)
    return float(np.mean(r * r))


def simulate(x0, eps, pred, resp, h, kind, cap_m, guard, hetero, sigma_const,
             r2, h_var, sd_floor, sd_cap, sigma_fallback):
    M, k = eps.shape
    paths = np.empty((M, k))
    x = np.full(M, float(x0))
    n_guard = 0
    for i in range(k):
        mt = nw_eval(x, pred, resp, h, kind)
        bad = np.isnan(mt)
        n_guard += int(bad.sum())
        mt = np.where(bad, guard, np.clip(mt, -cap_m, cap_m))
        if hetero:
            vt = nw_eval(x, pred, r2, h_var, kind)
            bad = np.isnan(vt)
            n_guard += int(bad.sum())
            s = np.clip(np.sqrt(np.maximum(np.nan_to_num(vt), 0.0)), sd_floor, sd_cap)
            s = np.where(bad, sigma_fallback, s)
        else:
            s = sigma_const
        with np.errstate(over="ignore", invalid="ignore"):
            x = mt + s * eps[:, i]
        bad = ~np.isfinite(x)
        n_guard += int(bad.sum())
        x = np.where(bad, guard, x)
        paths[:, i] = x
    return paths, n_guard


def loocv_scores(pred, resp, grid, kind, fallback):
    out = np.empty(len(grid))
    for g, h in enumerate(grid):
        w = _kern(kind, (pred[:, None] - pred[None, :]) / h)
        np.fill_diagonal(w, 0.0)
        num = (w * resp[None, :]).sum(axis=1)
        den = w.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            fit = np.where(den > 0.0, num / den, fallback)
        out[g] = np.mean((resp - fit) ** 2)
    return out


def loo_parts(pred, resp, r, h, h_var, kind, homoscedastic):
    # Refit on the reduced arrays for every t; identical to a manual deletion.
    n = pred.shape[0]
    raw_mean = np.empty(n)
    raw_var = np.empty(n)
    for t in range(n):
        keep = np.arange(n) != t
        p, y = pred[keep], resp[keep]
        x = pred[t:t + 1]
        raw_mean[t] = nw_eval(x, p, y, h, kind)[0]
        rt = mean_residuals(p, y, h, kind)
        if homoscedastic:
            raw_var[t] = mean_square(rt)
        else:
            raw_var[t] = nw_eval(x, p, rt * rt, h_var, kind)[0]
    return raw_mean, raw_var
