"""Pure-numpy compute kernels (fallback lane).

Every function here has a numba twin in ``kernels_numba`` with the same
signature; ``backend`` picks one lane at import time via SURRODYN_BACKEND.

Row-at-a-time functions (``dense_rows``, ``ld_assemble``) deliberately avoid
batched GEMM: BLAS changes its reduction strategy with the row count, so a
point evaluated alone and the same point evaluated inside a larger grid can
differ in the last bits.  Per-row GEMV keeps each output row a function of
that row's input only, which the resolution-invariance guarantees rely on.
"""

from __future__ import annotations

import math

import numpy as np

IDENTITY = 0
RELU = 1
LEAKY_RELU = 2


def apply_activation(pre: np.ndarray, act: int, slope: float) -> np.ndarray:
    if act == RELU:
        return np.maximum(pre, 0.0)
    if act == LEAKY_RELU:
        return np.where(pre >= 0.0, pre, slope * pre)
    return pre


def dense_forward(x, w, b, act, slope):
    """Batched affine layer + activation. Returns (pre_activation, output)."""
    pre = x @ w + b
    return pre, apply_activation(pre, act, slope)


def dense_backward(dout, x, w, pre, act, slope):
    """Backward pass of dense_forward. Returns (dx, dw, db)."""
    if act == RELU:
        dpre = np.where(pre > 0.0, dout, 0.0)
    elif act == LEAKY_RELU:
        dpre = np.where(pre >= 0.0, dout, slope * dout)
    else:
        dpre = dout
    dw = x.T @ dpre
    db = dpre.sum(axis=0)
    dx = dpre @ w.T
    return dx, dw, db


def dense_rows(x, w, b, act, slope):
    """Affine layer + activation, one GEMV per row (row-order independent)."""
    m = x.shape[0]
    out = np.empty((m, w.shape[1]), dtype=np.float64)
    for i in range(m):
        out[i] = np.dot(x[i], w) + b
    return apply_activation(out, act, slope)


def ld_assemble(bp, tau):
    """Triple-dot-product decode: out[s, g] = sum_k bp[s, k] * tau[g, k].

    One GEMV per grid point so each column is independent of the grid size.
    """
    n_samples = bp.shape[0]
    n_points = tau.shape[0]
    out = np.empty((n_samples, n_points), dtype=np.float64)
    for g in range(n_points):
        out[:, g] = np.dot(bp, tau[g])
    return out


def adam_update(p, g, m, v, t, lr, beta1, beta2, eps):
    """In-place bias-corrected Adam step (t is the 1-based step count)."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    mhat = m / (1.0 - beta1 ** t)
    vhat = v / (1.0 - beta2 ** t)
    p -= lr * mhat / (np.sqrt(vhat) + eps)


def sgd_update(p, g, lr):
    p -= lr * g


def fourier_features(ts, k, omega):
    """Periodic feature map: [cos(w t), sin(w t), ..., cos(k w t), sin(k w t)]."""
    args = np.outer(ts, omega * np.arange(1, k + 1))
    feats = np.empty((len(ts), 2 * k), dtype=np.float64)
    feats[:, 0::2] = np.cos(args)
    feats[:, 1::2] = np.sin(args)
    return feats


def sweep_values(ts, amp, f_low, f_up, duration):
    """Linear sine sweep evaluated at times ts."""
    phase = 2.0 * math.pi * (f_low * ts + (f_up - f_low) * ts * ts / (2.0 * duration))
    return amp * np.sin(phase)


def _sweep_scalar(t, amp, f_low, f_up, duration):
    phase = 2.0 * math.pi * (f_low * t + (f_up - f_low) * t * t / (2.0 * duration))
    return amp * math.sin(phase)


def duffing_rk4(mu1, mu2, mu3, amp, f_low, f_up, duration, dt, r, substeps):
    """Fixed-step RK4 of the forced cubic oscillator from rest.

    Returns (x, v, a, status, t_fail); status 1 flags a non-finite state and
    t_fail the output instant where it was first seen.
    """
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


def lin2dof_rk4(minv, kmat, cmat, load, amp, f_low, f_up, duration, dt, r, substeps):
    """Fixed-step RK4 of a 2-DOF linear system M x'' + C x' + K x = load * f(t).

    Returns (acc, x, v, status, t_fail) with acc/x/v shaped (2, r).
    """
    x = np.zeros((2, r), dtype=np.float64)
    v = np.zeros((2, r), dtype=np.float64)
    a = np.zeros((2, r), dtype=np.float64)
    s0 = np.zeros(2, dtype=np.float64)
    s1 = np.zeros(2, dtype=np.float64)
    h = dt / substeps

    def accel(pos, vel, f):
        rhs = load * f - cmat @ vel - kmat @ pos
        return minv @ rhs

    for i in range(r):
        t = i * dt
        f = _sweep_scalar(t, amp, f_low, f_up, duration)
        ca = accel(s0, s1, f)
        if not (np.isfinite(s0).all() and np.isfinite(s1).all() and np.isfinite(ca).all()):
            return a, x, v, 1, t
        x[:, i] = s0
        v[:, i] = s1
        a[:, i] = ca
        if i == r - 1:
            break
        for s in range(substeps):
            t0 = t + s * h
            f0 = _sweep_scalar(t0, amp, f_low, f_up, duration)
            fh = _sweep_scalar(t0 + 0.5 * h, amp, f_low, f_up, duration)
            f1 = _sweep_scalar(t0 + h, amp, f_low, f_up, duration)
            k1x = s1
            k1v = accel(s0, s1, f0)
            x2 = s0 + 0.5 * h * k1x
            v2 = s1 + 0.5 * h * k1v
            k2x = v2
            k2v = accel(x2, v2, fh)
            x3 = s0 + 0.5 * h * k2x
            v3 = s1 + 0.5 * h * k2v
            k3x = v3
            k3v = accel(x3, v3, fh)
            x4 = s0 + h * k3x
            v4 = s1 + h * k3v
            k4x = v4
            k4v = accel(x4, v4, f1)
            s0 = s0 + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            s1 = s1 + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return a, x, v, 0, 0.0
