"""Confinement and charge-barrier potentials and the shuttle's Euler-Maruyama update."""
from __future__ import annotations

import numpy as np

from .params import ModelParams


def _logistic(u):
    # 1 / (exp(u) + 1), vectorised and overflow-safe
    u = np.asarray(u, dtype=float)
    return np.exp(-np.logaddexp(0.0, u))


def _bump(u):
    # derivative magnitude s(u) (1 - s(u)), written symmetrically in u
    return _logistic(u) * _logistic(-u)


def confinement_potential(x, params: ModelParams):
    """Soft walls at +-x_w: returns ``(U_w, dU_w/dx)``."""
    u1 = (np.asarray(x) - params.x_w) / params.l_w
    u2 = (np.asarray(x) + params.x_w) / params.l_w
    U = params.U_w0 * (_logistic(-u1) + _logistic(u2))
    dU = params.U_w0 * (_bump(u1) - _bump(u2)) / params.l_w
    return U, dU


def charge_barrier(x, params: ModelParams):
    """Hydrophobic barrier for a charged shuttle in the lipid core: ``(U_ch, dU_ch/dx)``."""
    u1 = (np.asarray(x) - params.x_ch) / params.l_ch
    u2 = (np.asarray(x) + params.x_ch) / params.l_ch
    U = params.U_ch0 * (_logistic(u1) - _logistic(u2))
    dU = params.U_ch0 * (_bump(u2) - _bump(u1)) / params.l_ch
    return U, dU


def langevin_step(x, q_sq, params: ModelParams, rng_normal):
    """One Euler-Maruyama step of the overdamped shuttle motion.

    ``q_sq`` is the mean squared shuttle charge; the surface potential exerts no force.
    Scalars and arrays of walkers are both accepted.
    """
    _, dUw = confinement_potential(x, params)
    _, dUch = charge_barrier(x, params)
    force = -dUw - np.asarray(q_sq) * dUch
    step = np.sqrt(2.0 * params.diffusion * params.dt)
    out = np.asarray(x, dtype=float) + params.dt / params.zeta * force + step * np.asarray(rng_normal)
    return float(out) if out.ndim == 0 else out
