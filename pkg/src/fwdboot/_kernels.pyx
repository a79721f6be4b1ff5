# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for Nadaraya-Watson evaluation and path simulation.

Every function here has a NumPy twin in :mod:`fwdboot._kernels_python` with the
same signature. Sums run sequentially in index order and zero kernel weights
are skipped, so a delete-one fit gives the same bits as a fit on the reduced
arrays.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, isfinite, NAN

cnp.import_array()

cdef double INV_SQRT_2PI = 0.3989422804014327


cdef inline double _kern(int kind, double u) noexcept nogil:
    if kind == 0:
        if u >= 1.0 or u <= -1.0:
            return 0.0
        return 0.75 * (1.0 - u * u)
    return INV_SQRT_2PI * exp(-0.5 * u * u)


cdef inline bint _nw(double x, const double[::1] pred, const double[::1] resp,
                     double h, int kind, double* out) noexcept nogil:
    cdef Py_ssize_t j, n = pred.shape[0]
    cdef double w, num = 0.0, den = 0.0
    for j in range(n):
        w = _kern(kind, (x - pred[j]) / h)
        if w != 0.0:
            num += w * resp[j]
            den += w
    if den > 0.0:
        out[0] = num / den
        return True
    return False


cdef inline double _clamp(double v, double lo, double hi) noexcept nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


def nw_eval(const double[::1] query, const double[::1] pred,
            const double[::1] resp, double h, int kind):
    """Local-constant average of ``resp`` at each query point; NaN where no weight."""
    cdef Py_ssize_t i, n = query.shape[0]
    cdef double v
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            if _nw(query[i], pred, resp, h, kind, &v):
                o[i] = v
            else:
                o[i] = NAN
    return out


def mean_residuals(const double[::1] pred, const double[::1] resp, double h, int kind):
    """Untruncated mean residuals ``resp[i] - m(pred[i])`` on the fitting pairs."""
    cdef Py_ssize_t i, n = pred.shape[0]
    cdef double v
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            # the pair's own weight K(0) > 0 keeps the denominator positive
            _nw(pred[i], pred, resp, h, kind, &v)
            o[i] = resp[i] - v
    return out


def mean_square(const double[::1] r):
    cdef Py_ssize_t i, n = r.shape[0]
    cdef double s = 0.0
    for i in range(n):
        s += r[i] * r[i]
    return s / n


def simulate(double x0, const double[:, ::1] eps, const double[::1] pred,
             const double[::1] resp, double h, int kind, double cap_m,
             double guard, bint hetero, double sigma_const,
             const double[::1] r2, double h_var, double sd_floor,
             double sd_cap, double sigma_fallback):
    """Iterate the clamped recursion along every row of ``eps``.

    Returns ``(paths, n_guard)`` where ``n_guard`` counts replacements of
    invalid mean/volatility evaluations and non-finite pseudo-values.
    """
    cdef Py_ssize_t m, i, M = eps.shape[0], k = eps.shape[1]
    cdef double x, mt, vt, s
    cdef long n_guard = 0
    paths = np.empty((M, k), dtype=np.float64)
    cdef double[:, ::1] out = paths
    with nogil:
        for m in range(M):
            x = x0
            for i in range(k):
                if _nw(x, pred, resp, h, kind, &mt):
                    mt = _clamp(mt, -cap_m, cap_m)
                else:
                    mt = guard
                    n_guard += 1
                if hetero:
                    if _nw(x, pred, r2, h_var, kind, &vt):
                        s = _clamp(sqrt(vt if vt > 0.0 else 0.0), sd_floor, sd_cap)
                    else:
                        s = sigma_fallback
                        n_guard += 1
                else:
                    s = sigma_const
                x = mt + s * eps[m, i]
                if not isfinite(x):
                    x = guard
                    n_guard += 1
                out[m, i] = x
    return paths, n_guard


def loocv_scores(const double[::1] pred, const double[::1] resp,
                 const double[::1] grid, int kind, double fallback):
    """Leave-one-out squared prediction error of the mean fit for each bandwidth.

    A point whose delete-one denominator vanishes is predicted by ``fallback``.
    """
    cdef Py_ssize_t g, t, j, n = pred.shape[0], G = grid.shape[0]
    cdef double h, w, num, den, pred_t, err, total
    out = np.empty(G, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for g in range(G):
            h = grid[g]
            total = 0.0
            for t in range(n):
                num = 0.0
                den = 0.0
                for j in range(n):
                    if j == t:
                        continue
                    w = _kern(kind, (pred[t] - pred[j]) / h)
                    if w != 0.0:
                        num += w * resp[j]
                        den += w
                pred_t = num / den if den > 0.0 else fallback
                err = resp[t] - pred_t
                total += err * err
            o[g] = total / n
    return out


cdef inline bint _nw_skip(double x, const double[::1] pred, const double[::1] resp,
                          double h, int kind, Py_ssize_t skip, double* out) noexcept nogil:
    cdef Py_ssize_t j, n = pred.shape[0]
    cdef double w, num = 0.0, den = 0.0
    for j in range(n):
        if j == skip:
            continue
        w = _kern(kind, (x - pred[j]) / h)
        if w != 0.0:
            num += w * resp[j]
            den += w
    if den > 0.0:
        out[0] = num / den
        return True
    return False


def loo_parts(const double[::1] pred, const double[::1] resp, const double[::1] r,
              double h, double h_var, int kind, bint homoscedastic):
    """Delete-one raw mean and variance at each pair's own predictor.

    ``r`` holds the full-sample mean residuals. Entry ``t`` of the outputs is
    what a fit on the pairs without ``t`` returns at ``pred[t]``; NaN marks a
    vanishing denominator. A residual ``r[i]`` is reused when pair ``t`` has
    zero weight at ``pred[i]``, which leaves every partial sum unchanged.
    """
    cdef Py_ssize_t t, i, n = pred.shape[0]
    cdef double v, ri, w, num, den, ss
    raw_mean = np.empty(n, dtype=np.float64)
    raw_var = np.empty(n, dtype=np.float64)
    cdef double[::1] om = raw_mean
    cdef double[::1] ov = raw_var
    with nogil:
        for t in range(n):
            if _nw_skip(pred[t], pred, resp, h, kind, t, &v):
                om[t] = v
            else:
                om[t] = NAN
            if homoscedastic:
                ss = 0.0
                for i in range(n):
                    if i == t:
                        continue
                    if _kern(kind, (pred[i] - pred[t]) / h) == 0.0:
                        ri = r[i]
                    else:
                        _nw_skip(pred[i], pred, resp, h, kind, t, &v)
                        ri = resp[i] - v
                    ss += ri * ri
                ov[t] = ss / (n - 1)
            else:
                num = 0.0
                den = 0.0
                for i in range(n):
                    if i == t:
                        continue
                    w = _kern(kind, (pred[t] - pred[i]) / h_var)
                    if w == 0.0:
                        continue
                    if _kern(kind, (pred[i] - pred[t]) / h) == 0.0:
                        ri = r[i]
                    else:
                        _nw_skip(pred[i], pred, resp, h, kind, t, &v)
                        ri = resp[i] - v
                    num += w * (ri * ri)
                    den += w
                ov[t] = num / den if den > 0.0 else NAN
    return raw_mean, raw_var
