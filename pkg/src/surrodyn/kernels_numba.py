"""Numba-jitted compute kernels (default lane).

Signature-compatible with ``kernels_numpy``; matmuls still go through BLAS
(``np.dot`` inside nopython code), everything elementwise is fused into the
jitted loops.  See kernels_numpy for why the row-at-a-time functions exist.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

IDENTITY = 0
RELU = 1
LEAKY_RELU = 2


@njit(cache=True)
def dense_forward(x, w, b, act, slope):
    pre = np.dot(x, w)
    m, n = pre.shape
    out = np.empty_like(pre)
    for i in range(m):
        for j in range(n):
            p = pre[i, j] + b[j]
            pre[i, j] = p
            if act == 1:
                out[i, j] = p if p > 0.0 else 0.0
            elif act == 2:
                out[i, j] = p if p >= 0.0 else slope * p
            else:
                out[i, j] = p
    return pre, out


@njit(cache=True)
def dense_backward(dout, x, w, pre, act, slope):
    m, n = dout.shape
    if act == 0:
        dpre = dout
    else:
        dpre = np.empty_like(dout)
        for i in range(m):
            for j in range(n):
                if act == 1:
                    dpre[i, j] = dout[i, j] if pre[i, j] > 0.0 else 0.0
                else:
                    dpre[i, j] = dout[i, j] if pre[i, j] >= 0.0 else slope * dout[i, j]
    dw = np.dot(x.T, dpre)
    db = np.empty(n, dtype=np.float64)
    for j in range(n):
        s = 0.0
        for i in range(m):
            s += dpre[i, j]
        db[j] = s
    dx = np.dot(dpre, w.T)
    return dx, dw, db


@njit(cache=True)
def dense_rows(x, w, b, act, slope):
    m = x.shape[0]
    n = w.shape[1]
    out = np.empty((m, n), dtype=np.float64)
    for i in range(m):
        row = np.dot(x[i], w)
        for j in range(n):
            p = row[j] + b[j]
            if act == 1:
                out[i, j] = p if p > 0.0 else 0.0
            elif act == 2:
                out[i, j] = p if p >= 0.0 else slope * p
            else:
                out[i, j] = p
    return out


@njit(cache=True)
def ld_assemble(bp, tau):
    n_samples = bp.shape[0]
    n_points = tau.shape[0]
    out = np.empty((n_samples, n_points), dtype=np.float64)
    for g in range(n_points):
        col = np.dot(bp, tau[g])
        for s in range(n_samples):
            out[s, g] = col[s]
    return out


@njit(cache=True)
def adam_update(p, g, m, v, t, lr, beta1, beta2, eps):
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for i in range(p.size):
        gi = g[i]
        mi = beta1 * m[i] + (1.0 - beta1) * gi
        vi = beta2 * v[i] + (1.0 - beta2) * gi * gi
        m[i] = mi
        v[i] = vi
        p[i] -= lr * (mi / bc1) / (math.sqrt(vi / bc2) + eps)


@njit(cache=True)
def sgd_update(p, g, lr):
    for i in range(p.size):
        p[i] -= lr * g[i]


@njit(cache=True)
def fourier_features(ts, k, omega):
    n = len(ts)
    feats = np.empty((n, 2 * k), dtype=np.float64)
    for i in range(n):
        t = ts[i]
        for j in range(k):
            arg = (j + 1) * omega * t
            feats[i, 2 * j] = math.cos(arg)
            feats[i, 2 * j + 1] = math.sin(arg)
    return feats


@njit(cache=True, inline="always")
def _sweep_scalar(t, amp, f_low, f_up, duration):
    phase = 2.0 * math.pi * (f_low * t + (f_up - f_low) * t * t / (2.0 * duration))
    return amp * math.sin(phase)


@njit(cache=True)
def sweep_values(ts, amp, f_low, f_up, duration):
    out = np.empty(len(ts), dtype=np.float64)
    for i in range(len(ts)):
        out[i] = _sweep_scalar(ts[i], amp, f_low, f_up, duration)
    return out


@njit(cache=True)
def duffing_rk4(mu1, mu2, mu3, amp, f_low, f_up, duration, dt, r, substeps):
    x = np.zeros(r, dtype=np.float64)
    v = np.zeros(r, dtype=np.float64)
    a = np.zeros(r, dtype=np.float64)
    cx = 0.0
    cv = 0.0
    h = dt / substeps
    for i in range(r):
        t = i * dt
        f = _sweep_scalar(t, amp, f_low, f_up, duration)
        ca = -mu1 * cx - mu2 * cv - mu3 * cx * cx * cx + f
        if not (math.isfinite(cx) and math.isfinite(cv) and math.isfinite(ca)):
            return x, v, a, 1, t
        x[i] = cx
        v[i] = cv
        a[i] = ca
        if i == r - 1:
            break
        for s in range(substeps):
            t0 = t + s * h
            f0 = _sweep_scalar(t0, amp, f_low, f_up, duration)
            fh = _sweep_scalar(t0 + 0.5 * h, amp, f_low, f_up, duration)
            f1 = _sweep_scalar(t0 + h, amp, f_low, f_up, duration)
            k1x = cv
            k1v = -mu1 * cx - mu2 * cv - mu3 * cx * cx * cx + f0
            x2 = cx + 0.5 * h * k1x
            v2 = cv + 0.5 * h * k1v
            k2x = v2
            k2v = -mu1 * x2 - mu2 * v2 - mu3 * x2 * x2 * x2 + fh
            x3 = cx + 0.5 * h * k2x
            v3 = cv + 0.5 * h * k2v
            k3x = v3
            k3v = -mu1 * x3 - mu2 * v3 - mu3 * x3 * x3 * x3 + fh
            x4 = cx + h * k3x
            v4 = cv + h * k3v
            k4x = v4
            k4v = -mu1 * x4 - mu2 * v4 - mu3 * x4 * x4 * x4 + f1
            cx = cx + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            cv = cv + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return x, v, a, 0, 0.0


@njit(cache=True)
def lin2dof_rk4(minv, kmat, cmat, load, amp, f_low, f_up, duration, dt, r, substeps):
    x = np.zeros((2, r), dtype=np.float64)
    v = np.zeros((2, r), dtype=np.float64)
    a = np.zeros((2, r), dtype=np.float64)
    s0 = np.zeros(2, dtype=np.float64)
    s1 = np.zeros(2, dtype=np.float64)
    h = dt / substeps
    for i in range(r):
        t = i * dt
        f = _sweep_scalar(t, amp, f_low, f_up, duration)
        rhs = load * f - np.dot(cmat, s1) - np.dot(kmat, s0)
        ca = np.dot(minv, rhs)
        ok = True
        for d in range(2):
            if not (math.isfinite(s0[d]) and math.isfinite(s1[d]) and math.isfinite(ca[d])):
                ok = False
        if not ok:
            return a, x, v, 1, t
        for d in range(2):
            x[d, i] = s0[d]
            v[d, i] = s1[d]
            a[d, i] = ca[d]
        if i == r - 1:
            break
        for s in range(substeps):
            t0 = t + s * h
            f0 = _sweep_scalar(t0, amp, f_low, f_up, duration)
            fh = _sweep_scalar(t0 + 0.5 * h, amp, f_low, f_up, duration)
            f1 = _sweep_scalar(t0 + h, amp, f_low, f_up, duration)
            k1x = s1
            k1v = np.dot(minv, load * f0 - np.dot(cmat, s1) - np.dot(kmat, s0))
            x2 = s0 + 0.5 * h * k1x
            v2 = s1 + 0.5 * h * k1v
            k2x = v2
            k2v = np.dot(minv, load * fh - np.dot(cmat, v2) - np.dot(kmat, x2))
            x3 = s0 + 0.5 * h * k2x
            v3 = s1 + 0.5 * h * k2v
            k3x = v3
            k3v = np.dot(minv, load * fh - np.dot(cmat, v3) - np.dot(kmat, x3))
            x4 = s0 + h * k3x
            v4 = s1 + h * k3v
            k4x = v4
            k4v = np.dot(minv, load * f1 - np.dot(cmat, v4) - np.dot(kmat, x4))
            s0 = s0 + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            s1 = s1 + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return a, x, v, 0, 0.0
