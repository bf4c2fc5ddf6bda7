"""Independent reference solutions used by the tests.

These never call the package's integrators: the SDOF solution is the closed
form of x'' + mu2 x' + mu1 x = F0 sin(w t) from rest, and the 2-DOF reference
superposes that closed form over the generalized eigenmodes.
"""

import math

import numpy as np


def analytic_sdof_sine(mu1, mu2, f0_amp, w, t):
    """Closed-form (x, v, a) of the underdamped driven oscillator from rest."""
    w0 = math.sqrt(mu1)
    zeta = mu2 / (2 * w0)
    assert zeta < 1.0, "oracle assumes an underdamped mode"
    wd = w0 * math.sqrt(1 - zeta ** 2)
    denom = (mu1 - w ** 2) ** 2 + (mu2 * w) ** 2
    a_p = f0_amp * (mu1 - w ** 2) / denom
    b_p = -f0_amp * mu2 * w / denom
    c1 = -b_p
    c2 = -(a_p * w + zeta * w0 * b_p) / wd
    env = np.exp(-zeta * w0 * t)
    x = a_p * np.sin(w * t) + b_p * np.cos(w * t) \
        + env * (c1 * np.cos(wd * t) + c2 * np.sin(wd * t))
    v = a_p * w * np.cos(w * t) - b_p * w * np.sin(w * t) \
        + env * ((-zeta * w0 * c1 + wd * c2) * np.cos(wd * t)
                 + (-zeta * w0 * c2 - wd * c1) * np.sin(wd * t))
    a = -mu1 * x - mu2 * v + f0_amp * np.sin(w * t)
    return x, v, a


def modal_2dof_sine(mass, stiffness, damping, load, f0_amp, w, t):
    """(x, a) of M x'' + C x' + K x = load F0 sin(w t) by modal superposition."""
    from scipy.linalg import eigh

    lam, phi = eigh(stiffness, mass)  # K phi = lam M phi, phi^T M phi = I
    modal_damp = phi.T @ damping @ phi
    gamma = phi.T @ load
    x = np.zeros((2, len(t)))
    a = np.zeros((2, len(t)))
    for i in range(2):
        xq, _, aq = analytic_sdof_sine(lam[i], modal_damp[i, i],
                                       gamma[i] * f0_amp, w, t)
        x += np.outer(phi[:, i], xq)
        a += np.outer(phi[:, i], aq)
    return x, a


def rel_rms(u, ref):
    u = np.asarray(u)
    ref = np.asarray(ref)
    return float(np.sqrt(((u - ref) ** 2).sum() / (ref ** 2).sum()))
