# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Mirrors trunklm.kernels.reference exactly; see that
module for the contract of each function."""

import numpy as np

cimport numpy as cnp
from libc.math cimport erf, exp, sqrt, INFINITY

cnp.import_array()

cdef double INV_SQRT2 = 0.7071067811865476
cdef double INV_SQRT2PI = 0.3989422804014327


def gelu_forward(double[::1] x):
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = 0.5 * x[i] * (1.0 + erf(x[i] * INV_SQRT2))
    return out


def gelu_backward(double[::1] x, double[::1] dout):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double cdf, pdf
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(n):
        cdf = 0.5 * (1.0 + erf(x[i] * INV_SQRT2))
        pdf = INV_SQRT2PI * exp(-0.5 * x[i] * x[i])
        o[i] = (cdf + x[i] * pdf) * dout[i]
    return out


def softmax_rows(double[:, ::1] x):
    cdef Py_ssize_t i, j, rows = x.shape[0], cols = x.shape[1]
    cdef double m, s, e
    out = np.empty((rows, cols), dtype=np.float64)
    cdef double[:, ::1] o = out
    for i in range(rows):
        m = -INFINITY
        for j in range(cols):
            if x[i, j] > m:
                m = x[i, j]
        if m == -INFINITY:
            for j in range(cols):
                o[i, j] = 0.0
            continue
        s = 0.0
        for j in range(cols):
            e = exp(x[i, j] - m)
            o[i, j] = e
            s += e
        for j in range(cols):
            o[i, j] /= s
    return out


def layernorm_forward(double[:, ::1] x, double[::1] gamma, double[::1] beta, double eps):
    cdef Py_ssize_t i, j, rows = x.shape[0], cols = x.shape[1]
    cdef double mu, var, d, r
    y = np.empty((rows, cols), dtype=np.float64)
    mean = np.empty(rows, dtype=np.float64)
    rstd = np.empty(rows, dtype=np.float64)
    cdef double[:, ::1] yv = y
    cdef double[::1] meanv = mean, rstdv = rstd
    for i in range(rows):
        mu = 0.0
        for j in range(cols):
            mu += x[i, j]
        mu /= cols
        var = 0.0
        for j in range(cols):
            d = x[i, j] - mu
            var += d * d
        var /= cols
        r = 1.0 / sqrt(var + eps)
        meanv[i] = mu
        rstdv[i] = r
        for j in range(cols):
            yv[i, j] = (x[i, j] - mu) * r * gamma[j] + beta[j]
    return y, mean, rstd


def layernorm_backward(double[:, ::1] dout, double[:, ::1] x, double[::1] gamma,
                       double[::1] mean, double[::1] rstd):
    cdef Py_ssize_t i, j, rows = x.shape[0], cols = x.shape[1]
    cdef double m1, m2, xh, dxh
    dx = np.empty((rows, cols), dtype=np.float64)
    dgamma = np.zeros(cols, dtype=np.float64)
    dbeta = np.zeros(cols, dtype=np.float64)
    cdef double[:, ::1] dxv = dx
    cdef double[::1] dgv = dgamma, dbv = dbeta
    for i in range(rows):
        m1 = 0.0
        m2 = 0.0
        for j in range(cols):
            xh = (x[i, j] - mean[i]) * rstd[i]
            dxh = dout[i, j] * gamma[j]
            dgv[j] += dout[i, j] * xh
            dbv[j] += dout[i, j]
            m1 += dxh
            m2 += dxh * xh
        m1 /= cols
        m2 /= cols
        for j in range(cols):
            xh = (x[i, j] - mean[i]) * rstd[i]
            dxh = dout[i, j] * gamma[j]
            dxv[i, j] = rstd[i] * (dxh - m1 - xh * m2)
    return dx, dgamma, dbeta


def adam_update(double[::1] p, double[::1] g, double[::1] m, double[::1] v,
                double lr, double beta1, double beta2, double eps,
                double weight_decay, int t):
    cdef Py_ssize_t i, n = p.shape[0]
    cdef double c1 = 1.0 - beta1 ** t
    cdef double c2 = 1.0 - beta2 ** t
    cdef double mhat, vhat
    for i in range(n):
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]
        mhat = m[i] / c1
        vhat = v[i] / c2
        p[i] -= lr * mhat / (sqrt(vhat) + eps)
        if weight_decay != 0.0:
            p[i] -= lr * weight_decay * p[i]
