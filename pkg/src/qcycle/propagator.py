"""Exact one-step propagation of the population vector and flux bookkeeping."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _kernels
from .rates import RateMatrix

TRUNCATION_MASS = 1e-12


@dataclass
class FluxCounters:
    n_e: float = 0.0  # net electrons delivered to the Pc pool
    N_p: float = 0.0  # net protons delivered to the P-side
    N_n: float = 0.0  # net protons taken from the N-side

    def as_array(self) -> np.ndarray:
        return np.array([self.n_e, self.N_p, self.N_n])


def _as_rate_matrix(L) -> RateMatrix:
    return L if isinstance(L, RateMatrix) else RateMatrix.from_dense(np.asarray(L))


def evolve(P, L, dt: float, tol: float = TRUNCATION_MASS) -> np.ndarray:
    """Return ``exp(L dt) P`` computed by uniformization.

    ``L`` is a :class:`RateMatrix` or a dense generator (columns summing to 0).
    The Poisson series is truncated once its accumulated mass reaches
    ``1 - tol``; the result is renormalized by that mass, so it stays
    nonnegative and sums to 1.
    """
    if dt < 0:
        raise ValueError(f"dt must be non-negative, got {dt!r}")
    P = np.ascontiguousarray(P, dtype=float)
    if abs(P.sum() - 1.0) > 1e-6:
        raise ValueError(f"population does not sum to 1 (sum = {P.sum()!r})")
    L = _as_rate_matrix(L)
    out = np.empty_like(P)
    _kernels.uniformize(P, L.src, L.dst, np.ascontiguousarray(L.rates), float(dt), tol, out)
    return out


def dense_expm_reference(L, t: float) -> np.ndarray:
    """Dense ``exp(L t)`` by scaling and squaring with a Pade core (scipy)."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t!r}")
    L = L.dense() if isinstance(L, RateMatrix) else np.asarray(L, dtype=float)
    return scipy.linalg.expm(L * t)


def accumulate_fluxes(P_pre, P_post, L: RateMatrix, dt: float,
                      counters: FluxCounters | None = None) -> FluxCounters:
    """Add the trapezoidal probability current of every tagged channel over one step."""
    counters = FluxCounters() if counters is None else counters
    inc = _kernels.flux_increment(np.asarray(P_pre, dtype=float), np.asarray(P_post, dtype=float),
                                  L.src, np.ascontiguousarray(L.rates),
                                  np.ascontiguousarray(L.tags, dtype=float), float(dt))
    return FluxCounters(counters.n_e + inc[0], counters.N_p + inc[1], counters.N_n + inc[2])
