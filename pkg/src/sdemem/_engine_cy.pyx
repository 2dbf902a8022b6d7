# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled filter kernels for the built-in transition families.

Mirrors the general NumPy path in filters/particle.py operation for
operation: same initialization, same logsumexp normalization, same
sequential cumulative-sum resampling, same stable sort semantics. The two
paths agree to floating-point tolerance; bit-level reproducibility is
guaranteed within a path, not across paths.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, isnan, log, sqrt

cnp.import_array()

TRANS_OU_EXACT = 0
TRANS_OU_EM = 1
TRANS_GBM_EXACT = 2
TRANS_GBM_EM = 3
OBS_IDENTITY = 0
OBS_LOGSUM = 1
INIT_POINT = 0
INIT_GAUSS = 1

cdef double LOG_2PI = log(2.0 * 3.14159265358979311599796346854419)
cdef double NEG_INF = -float("inf")


cdef void _stable_argsort(const double* keys, long* idx, long* tmp, int n) noexcept nogil:
    # bottom-up stable merge sort of indices by key; NaN keys sort last
    cdef int width, lo, mid, hi, i, j, k
    cdef bint left_first
    for i in range(n):
        idx[i] = i
    width = 1
    while width < n:
        lo = 0
        while lo < n - width:
            mid = lo + width
            hi = mid + width
            if hi > n:
                hi = n
            i = lo
            j = mid
            k = lo
            while i < mid and j < hi:
                # keep left element on ties for stability; NaN counts as largest
                left_first = keys[idx[i]] <= keys[idx[j]] or isnan(keys[idx[j]])
                if left_first:
                    tmp[k] = idx[i]
                    i += 1
                else:
                    tmp[k] = idx[j]
                    j += 1
                k += 1
            while i < mid:
                tmp[k] = idx[i]
                i += 1
                k += 1
            while j < hi:
                tmp[k] = idx[j]
                j += 1
                k += 1
            for k in range(lo, hi):
                idx[k] = tmp[k]
            lo += 2 * width
        width *= 2


cdef void _resample_indices(const double* w, double uniform, long* anc, int n) noexcept nogil:
    # first index whose cumulative weight reaches (uniform + k) / n
    cdef int j = 0, k
    cdef double cum = w[0]
    cdef double pos
    for k in range(n):
        pos = (uniform + k) / n
        while cum < pos and j < n - 1:
            j += 1
            cum += w[j]
        anc[k] = j


cdef double _normalize(const double* logw, double* w, int n, bint* degen, bint* bad) noexcept nogil:
    cdef double m = NEG_INF
    cdef double s = 0.0
    cdef int k
    for k in range(n):
        if isnan(logw[k]):
            bad[0] = True
            return NEG_INF
        if logw[k] > m:
            m = logw[k]
    if m == NEG_INF:
        degen[0] = True
        return NEG_INF
    for k in range(n):
        w[k] = exp(logw[k] - m)
        s += w[k]
    for k in range(n):
        w[k] /= s
    return m + log(s) - log(<double> n)


cdef void _obs_weights(int obs_kind, double y, const double* x, int n, int d,
                       double var_obs, double* logw) noexcept nogil:
    cdef int k
    cdef double r, v
    cdef double c = log(var_obs) + LOG_2PI
    for k in range(n):
        if obs_kind == 0:  # identity
            r = y - x[k * d]
            logw[k] = -0.5 * (r * r / var_obs + c)
        else:  # log of the component sum
            v = x[k * d] + x[k * d + 1]
            if v > 0.0:
                r = y - log(v)
                logw[k] = -0.5 * (r * r / var_obs + c)
            else:
                logw[k] = NEG_INF


cdef void _propagate(int trans_kind, const double* tpar, double* x, int n, int d,
                     double dt, const double* z, int n_sub, int z_stride) noexcept nogil:
    # z points at prop[t, 0, 0, 0]; substep l, particle k, component c is
    # z[l * z_stride + k * d + c], matching the stream layout
    cdef int k, l
    cdef double a, var, sd, m, h, sqrt_h, s
    cdef double th1, th2, th3, beta, gamma, delta, psi, g2, p2, x1, x2
    if trans_kind == 0:  # OU exact
        th1 = tpar[0]; th2 = tpar[1]; th3 = tpar[2]
        a = exp(-th1 * dt)
        var = th3 * th3 * (1.0 - exp(-2.0 * th1 * dt)) / (2.0 * th1)
        sd = sqrt(var)
        for k in range(n):
            x[k] = th2 + (x[k] - th2) * a + sd * z[k]
    elif trans_kind == 1:  # OU Euler-Maruyama
        th1 = tpar[0]; th2 = tpar[1]; th3 = tpar[2]
        h = dt / n_sub
        sqrt_h = sqrt(h)
        sd = sqrt(th3 * th3)
        for l in range(n_sub):
            for k in range(n):
                x[k] = x[k] + th1 * (th2 - x[k]) * h + sd * sqrt_h * z[l * z_stride + k]
    elif trans_kind == 2:  # GBM exact
        beta = tpar[0]; gamma = tpar[1]; delta = tpar[2]; psi = tpar[3]
        s = sqrt(dt)
        for k in range(n):
            x[2 * k] = x[2 * k] * exp(beta * dt + gamma * s * z[2 * k])
            x[2 * k + 1] = x[2 * k + 1] * exp(-delta * dt + psi * s * z[2 * k + 1])
    else:  # GBM Euler-Maruyama
        beta = tpar[0]; gamma = tpar[1]; delta = tpar[2]; psi = tpar[3]
        g2 = gamma * gamma
        p2 = psi * psi
        h = dt / n_sub
        sqrt_h = sqrt(h)
        for l in range(n_sub):
            for k in range(n):
                x1 = x[2 * k]
                x2 = x[2 * k + 1]
                x[2 * k] = x1 + (beta + 0.5 * g2) * x1 * h + sqrt(g2 * x1 * x1) * sqrt_h * z[l * z_stride + 2 * k]
                x[2 * k + 1] = x2 + (-delta + 0.5 * p2) * x2 * h + sqrt(p2 * x2 * x2) * sqrt_h * z[l * z_stride + 2 * k + 1]


cdef void _apply_perm(const long* perm, double* x, double* w, double* xbuf,
                      double* wbuf, int n, int d) noexcept nogil:
    cdef int k, c
    for k in range(n):
        for c in range(d):
            xbuf[k * d + c] = x[perm[k] * d + c]
        wbuf[k] = w[perm[k]]
    for k in range(n * d):
        x[k] = xbuf[k]
    for k in range(n):
        w[k] = wbuf[k]


cdef void _sort_keys(const double* x, int n, int d, double* keys) noexcept nogil:
    cdef int k, c
    cdef double mean0 = 0.0, mean1 = 0.0, dev0, dev1
    if d == 1:
        for k in range(n):
            keys[k] = x[k]
        return
    for k in range(n):
        mean0 += x[2 * k]
        mean1 += x[2 * k + 1]
    mean0 /= n
    mean1 /= n
    for k in range(n):
        dev0 = x[2 * k] - mean0
        dev1 = x[2 * k + 1] - mean1
        keys[k] = dev0 * dev0 + dev1 * dev1


def bootstrap(const double[::1] y, const double[::1] dts, int trans_kind,
              const double[::1] tpar, int obs_kind, double sigma_eps,
              int init_kind, const double[::1] init_a, const double[::1] init_b,
              const double[:, :, :, ::1] prop, const double[::1] uniforms,
              const double[:, ::1] init_block, int n_substeps, bint sort):
    """Bootstrap filter over one unit; returns (loglik, n_resamples, degenerate, cloud)."""
    cdef int n_obs = y.shape[0]
    cdef int n = prop.shape[2]
    cdef int d = prop.shape[3]
    cdef int n_sub = 1 if (trans_kind == 0 or trans_kind == 2) else n_substeps
    cdef int z_stride = n * d
    cdef cnp.ndarray[cnp.float64_t, ndim=2] cloud = np.empty((n, d))
    cdef double[:, ::1] xv = cloud
    cdef double* x = &xv[0, 0]
    cdef cnp.ndarray work = np.empty(4 * n * d + 4 * n, dtype=np.float64)
    cdef double[::1] wk = work
    cdef double* logw = &wk[0]
    cdef double* w = &wk[n]
    cdef double* keys = &wk[2 * n]
    cdef double* wbuf = &wk[3 * n]
    cdef double* xbuf = &wk[4 * n]
    cdef cnp.ndarray iwork = np.empty(3 * n, dtype=np.int64)
    cdef long[::1] iw = iwork
    cdef long* perm = <long*> &iw[0]
    cdef long* tmp = <long*> &iw[n]
    cdef long* anc = <long*> &iw[2 * n]
    cdef double var_obs = sigma_eps * sigma_eps
    cdef double loglik = 0.0, step
    cdef int t, k, c
    cdef int n_res = 0
    cdef bint degen = False, bad = False

    with nogil:
        for k in range(n):
            for c in range(d):
                if init_kind == 0:
                    x[k * d + c] = init_a[c]
                else:
                    x[k * d + c] = init_a[c] + init_b[c] * init_block[k, c]
        _obs_weights(obs_kind, y[0], x, n, d, var_obs, logw)
        loglik = _normalize(logw, w, n, &degen, &bad)
        if not degen and not bad:
            for t in range(1, n_obs):
                if sort:
                    _sort_keys(x, n, d, keys)
                    _stable_argsort(keys, perm, tmp, n)
                    _apply_perm(perm, x, w, xbuf, wbuf, n, d)
                _resample_indices(w, uniforms[t], anc, n)
                n_res += 1
                for k in range(n):
                    for c in range(d):
                        xbuf[k * d + c] = x[anc[k] * d + c]
                for k in range(n * d):
                    x[k] = xbuf[k]
                _propagate(trans_kind, &tpar[0], x, n, d, dts[t],
                           &prop[t, 0, 0, 0], n_sub, z_stride)
                _obs_weights(obs_kind, y[t], x, n, d, var_obs, logw)
                step = _normalize(logw, w, n, &degen, &bad)
                if degen or bad:
                    break
                loglik += step
    if bad:
        raise _nan_error()
    if degen:
        return float("-inf"), n_res, True, cloud
    return loglik, n_res, False, cloud


def bridge(const double[::1] y, const double[::1] dts, const double[::1] tpar,
           double sigma_eps, int init_kind, const double[::1] init_a,
           const double[::1] init_b, const double[:, :, :, ::1] prop,
           const double[::1] uniforms, const double[:, ::1] init_block, bint sort):
    """Bridge filter for the OU family; same return contract as bootstrap."""
    cdef int n_obs = y.shape[0]
    cdef int n = prop.shape[2]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] cloud = np.empty((n, 1))
    cdef double[:, ::1] xv = cloud
    cdef double* x = &xv[0, 0]
    cdef cnp.ndarray work = np.empty(8 * n, dtype=np.float64)
    cdef double[::1] wk = work
    cdef double* logw = &wk[0]
    cdef double* w = &wk[n]
    cdef double* keys = &wk[2 * n]
    cdef double* wbuf = &wk[3 * n]
    cdef double* xbuf = &wk[4 * n]
    cdef double* a0 = &wk[5 * n]
    cdef cnp.ndarray iwork = np.empty(3 * n, dtype=np.int64)
    cdef long[::1] iw = iwork
    cdef long* perm = <long*> &iw[0]
    cdef long* tmp = <long*> &iw[n]
    cdef long* anc = <long*> &iw[2 * n]
    cdef double th1 = tpar[0], th2 = tpar[1], th3 = tpar[2]
    cdef double se2 = sigma_eps * sigma_eps
    cdef double var_obs = se2
    cdef double loglik = 0.0, step
    cdef double aa, b0, denom, mu, sig, sd, r, zk, cobs, cb0, csig
    cdef int t, k
    cdef int n_res = 0
    cdef bint degen = False, bad = False

    with nogil:
        for k in range(n):
            if init_kind == 0:
                x[k] = init_a[0]
            else:
                x[k] = init_a[0] + init_b[0] * init_block[k, 0]
        _obs_weights(0, y[0], x, n, 1, var_obs, logw)
        loglik = _normalize(logw, w, n, &degen, &bad)
        if not degen and not bad:
            for t in range(1, n_obs):
                if sort:
                    for k in range(n):
                        keys[k] = x[k]
                    _stable_argsort(keys, perm, tmp, n)
                    _apply_perm(perm, x, w, xbuf, wbuf, n, 1)
                _resample_indices(w, uniforms[t], anc, n)
                n_res += 1
                for k in range(n):
                    xbuf[k] = x[anc[k]]
                for k in range(n):
                    x[k] = xbuf[k]
                aa = exp(-th1 * dts[t])
                b0 = th3 * th3 * (1.0 - exp(-2.0 * th1 * dts[t])) / (2.0 * th1)
                cb0 = log(b0) + LOG_2PI
                for k in range(n):
                    a0[k] = th2 + (x[k] - th2) * aa
                if se2 == 0.0:
                    for k in range(n):
                        r = y[t] - a0[k]
                        logw[k] = -0.5 * (r * r / b0 + cb0)
                        x[k] = y[t]
                else:
                    denom = b0 + se2
                    sig = b0 * (1.0 - b0 / denom)
                    sd = sqrt(sig)
                    cobs = log(se2) + LOG_2PI
                    csig = log(sig) + LOG_2PI
                    for k in range(n):
                        zk = prop[t, 0, k, 0]
                        mu = a0[k] + (b0 / denom) * (y[t] - a0[k])
                        x[k] = mu + sd * zk
                        r = y[t] - x[k]
                        logw[k] = -0.5 * (r * r / se2 + cobs)
                        r = x[k] - a0[k]
                        logw[k] += -0.5 * (r * r / b0 + cb0)
                        r = x[k] - mu
                        logw[k] -= -0.5 * (r * r / sig + csig)
                step = _normalize(logw, w, n, &degen, &bad)
                if degen or bad:
                    break
                loglik += step
    if bad:
        raise _nan_error()
    if degen:
        return float("-inf"), n_res, True, cloud
    return loglik, n_res, False, cloud


def ou_kalman(const double[::1] times, const double[::1] ys, double th1,
              double th2, double th3, double se, double m0, double p0):
    """Exact OU log-likelihood, mirroring the Python Kalman recursion."""
    cdef double var_obs = se * se
    cdef double infl = th3 * th3 / (2.0 * th1)
    cdef double m = m0, p = p0, ll = 0.0
    cdef double a, s, r, k, prev_t
    cdef int t
    cdef int n = times.shape[0]
    with nogil:
        prev_t = times[0]
        for t in range(n):
            if t > 0:
                a = exp(-th1 * (times[t] - prev_t))
                m = th2 + (m - th2) * a
                p = infl * (1.0 - a * a) + p * a * a
                prev_t = times[t]
            s = p + var_obs
            r = ys[t] - m
            ll += -0.5 * (r * r / s + log(s) + LOG_2PI)
            k = p / s
            m = m + k * r
            p = (1.0 - k) * p
    return ll


def _nan_error():
    from .errors import NumericalModelError

    return NumericalModelError("observation density returned NaN")
