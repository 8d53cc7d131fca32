# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; drop-in replacements for ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt

cnp.import_array()

cdef double PROB_FLOOR = 1e-12


cdef inline void _affine(const double[:, ::1] X, const double[:, ::1] W, const double[::1] b,
                         double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], h = W.shape[1]
    cdef Py_ssize_t i, k, j
    cdef double x
    for i in range(n):
        for j in range(h):
            out[i, j] = b[j]
        for k in range(d):
            x = X[i, k]
            if x != 0.0:
                for j in range(h):
                    out[i, j] += x * W[k, j]


def hidden_forward(X, W, b, gamma, beta, run_mean, run_var, bint train, double eps):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] Wv = np.ascontiguousarray(W, dtype=np.float64)
    cdef const double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef const double[::1] gv = np.ascontiguousarray(gamma, dtype=np.float64)
    cdef const double[::1] btv = np.ascontiguousarray(beta, dtype=np.float64)
    cdef Py_ssize_t n = Xv.shape[0], h = Wv.shape[1], i, j

    z_arr = np.empty((n, h))
    a_arr = np.empty((n, h))
    xhat_arr = np.empty((n, h))
    y_arr = np.empty((n, h))
    inv_arr = np.empty(h)
    if train:
        mu_arr = np.zeros(h)
        var_arr = np.zeros(h)
    else:
        mu_arr = np.array(run_mean, dtype=np.float64, copy=True)
        var_arr = np.array(run_var, dtype=np.float64, copy=True)
    cdef double[:, ::1] z = z_arr
    cdef double[:, ::1] a = a_arr
    cdef double[:, ::1] xhat = xhat_arr
    cdef double[:, ::1] y = y_arr
    cdef double[::1] inv = inv_arr
    cdef double[::1] mu = mu_arr
    cdef double[::1] var = var_arr
    cdef double t

    with nogil:
        _affine(Xv, Wv, bv, z)
        if train:
            for i in range(n):
                for j in range(h):
                    mu[j] += z[i, j]
            for j in range(h):
                mu[j] /= n
            for i in range(n):
                for j in range(h):
                    t = z[i, j] - mu[j]
                    var[j] += t * t
            for j in range(h):
                var[j] /= n
        for j in range(h):
            inv[j] = 1.0 / sqrt(var[j] + eps)
        for i in range(n):
            for j in range(h):
                t = (z[i, j] - mu[j]) * inv[j]
                xhat[i, j] = t
                t = gv[j] * t + btv[j]
                y[i, j] = t
                a[i, j] = t if t > 0.0 else 0.0
    return a_arr, xhat_arr, inv_arr, y_arr, mu_arr, var_arr


def hidden_backward(da, X, W, gamma, xhat, inv_std, y):
    cdef const double[:, ::1] dav = np.ascontiguousarray(da, dtype=np.float64)
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] Wv = np.ascontiguousarray(W, dtype=np.float64)
    cdef const double[::1] gv = np.ascontiguousarray(gamma, dtype=np.float64)
    cdef const double[:, ::1] xh = np.ascontiguousarray(xhat, dtype=np.float64)
    cdef const double[::1] inv = np.ascontiguousarray(inv_std, dtype=np.float64)
    cdef const double[:, ::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = Xv.shape[0], d = Xv.shape[1], h = Wv.shape[1], i, j, k

    dX_arr = np.zeros((n, d))
    dW_arr = np.zeros((d, h))
    db_arr = np.zeros(h)
    dg_arr = np.zeros(h)
    dbt_arr = np.zeros(h)
    dz_arr = np.empty((n, h))
    sx_arr = np.zeros(h)
    sxx_arr = np.zeros(h)
    cdef double[:, ::1] dX = dX_arr
    cdef double[:, ::1] dW = dW_arr
    cdef double[::1] db = db_arr
    cdef double[::1] dg = dg_arr
    cdef double[::1] dbt = dbt_arr
    cdef double[:, ::1] dz = dz_arr
    cdef double[::1] sx = sx_arr
    cdef double[::1] sxx = sxx_arr
    cdef double dy, dxh, acc, x

    with nogil:
        # dz temporarily holds dxhat
        for i in range(n):
            for j in range(h):
                dy = dav[i, j] if yv[i, j] > 0.0 else 0.0
                dg[j] += dy * xh[i, j]
                dbt[j] += dy
                dxh = dy * gv[j]
                dz[i, j] = dxh
                sx[j] += dxh
                sxx[j] += dxh * xh[i, j]
        for i in range(n):
            for j in range(h):
                dz[i, j] = (inv[j] / n) * (n * dz[i, j] - sx[j] - xh[i, j] * sxx[j])
                db[j] += dz[i, j]
        for i in range(n):
            for k in range(d):
                x = Xv[i, k]
                acc = 0.0
                for j in range(h):
                    dW[k, j] += x * dz[i, j]
                    acc += dz[i, j] * Wv[k, j]
                dX[i, k] = acc
    return dX_arr, dW_arr, db_arr, dg_arr, dbt_arr


def output_forward(a, W, b):
    cdef const double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[:, ::1] Wv = np.ascontiguousarray(W, dtype=np.float64)
    cdef double bias = float(b[0])
    cdef Py_ssize_t n = av.shape[0], h = av.shape[1], i, j
    logit_arr = np.empty(n)
    p_arr = np.empty(n)
    cdef double[::1] lg = logit_arr
    cdef double[::1] p = p_arr
    cdef double t, e, q
    with nogil:
        for i in range(n):
            t = bias
            for j in range(h):
                t += av[i, j] * Wv[j, 0]
            lg[i] = t
            if t >= 0.0:
                q = 1.0 / (1.0 + exp(-t))
            else:
                e = exp(t)
                q = e / (1.0 + e)
            if q < PROB_FLOOR:
                q = PROB_FLOOR
            elif q > 1.0 - PROB_FLOOR:
                q = 1.0 - PROB_FLOOR
            p[i] = q
    return logit_arr, p_arr


def output_backward(dp, a, W, p):
    cdef const double[::1] dpv = np.ascontiguousarray(dp, dtype=np.float64)
    cdef const double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[:, ::1] Wv = np.ascontiguousarray(W, dtype=np.float64)
    cdef const double[::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef Py_ssize_t n = av.shape[0], h = av.shape[1], i, j
    da_arr = np.empty((n, h))
    dW_arr = np.zeros((h, 1))
    cdef double[:, ::1] da = da_arr
    cdef double[:, ::1] dW = dW_arr
    cdef double dl, db = 0.0
    with nogil:
        for i in range(n):
            dl = dpv[i] * pv[i] * (1.0 - pv[i])
            db += dl
            for j in range(h):
                dW[j, 0] += av[i, j] * dl
                da[i, j] = dl * Wv[j, 0]
    return da_arr, dW_arr, np.array([db])


def adam_update(cnp.ndarray param, cnp.ndarray grad, cnp.ndarray m, cnp.ndarray v,
                double lr, double beta1, double beta2, double eps, long step):
    if not (param.flags.c_contiguous and m.flags.c_contiguous and v.flags.c_contiguous):
        raise ValueError("adam_update needs C-contiguous parameter and moment arrays")
    cdef double[::1] pv = param.reshape(-1)
    cdef const double[::1] gv = np.ascontiguousarray(grad, dtype=np.float64).reshape(-1)
    cdef double[::1] mv = m.reshape(-1)
    cdef double[::1] vv = v.reshape(-1)
    cdef Py_ssize_t i, n = pv.shape[0]
    cdef double c1 = 1.0 - beta1 ** step
    cdef double c2 = 1.0 - beta2 ** step
    cdef double g
    with nogil:
        for i in range(n):
            g = gv[i]
            mv[i] = beta1 * mv[i] + (1.0 - beta1) * g
            vv[i] = beta2 * vv[i] + (1.0 - beta2) * g * g
            pv[i] -= lr * (mv[i] / c1) / (sqrt(vv[i] / c2) + eps)
