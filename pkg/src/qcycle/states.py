"""Fock basis over the 8 binding sites and diagonal state energies."""
from __future__ import annotations

from enum import IntEnum

import numpy as np

from .params import ModelParams

N_SITES = 8
N_STATES = 1 << N_SITES


class SiteId(IntEnum):
    """Binding sites; the value is the bit position in a basis-state index."""

    ShuttleE1 = 0
    ShuttleE2 = 1
    ShuttleP1 = 2
    ShuttleP2 = 3
    HemeL = 4
    HemeH = 5
    SiteA = 6
    SiteB = 7


ELECTRON_SITES = (SiteId.ShuttleE1, SiteId.ShuttleE2, SiteId.HemeL,
                  SiteId.HemeH, SiteId.SiteA, SiteId.SiteB)
PROTON_SITES = (SiteId.ShuttleP1, SiteId.ShuttleP2)

ELECTRON_MASK = sum(1 << s for s in ELECTRON_SITES)
PROTON_MASK = sum(1 << s for s in PROTON_SITES)


def occupancy(state: int, site: int) -> int:
    return (int(state) >> int(site)) & 1


def state_from_occupancies(occ) -> int:
    """Inverse of :func:`occupancy`: build an index from 8 per-site bits."""
    index = 0
    for site, bit in enumerate(occ):
        if bit not in (0, 1):
            raise ValueError(f"occupancy must be 0 or 1, got {bit!r}")
        index |= int(bit) << site
    return index


def electron_count(state: int) -> int:
    return bin(int(state) & ELECTRON_MASK).count("1")


def proton_count(state: int) -> int:
    return bin(int(state) & PROTON_MASK).count("1")


def occupation_table() -> np.ndarray:
    """(256, 8) integer table of site occupancies for every basis state."""
    idx = np.arange(N_STATES)
    return ((idx[:, None] >> np.arange(N_SITES)[None, :]) & 1).astype(np.int64)


def surface_potential(x, params: ModelParams):
    """Linear electrostatic surface potential V(x) in meV.

    Equals +V_N at x = -x0 and -V_P at x = +x0; extended linearly outside.
    """
    x0 = params.x0
    return -(x - x0) / (2 * x0) * params.V_N - (x + x0) / (2 * x0) * params.V_P


def _energy_parts(params: ModelParams):
    occ = occupation_table().astype(float)
    n1, n2, N1, N2, nL, nH, nA, nB = occ.T
    ne = n1 + n2
    npr = N1 + N2
    static = (params.eps_Q0 * ne + params.E_Q0 * npr
              + params.U_ee * n1 * n2 + params.U_pp * N1 * N2
              - params.U_ep * ne * npr
              + params.eps_L_prime * nL + params.eps_H_prime * nH
              + params.U_LH * nL * nH
              + params.eps_A_prime * nA + params.eps_B_prime * nB)
    # eps_Q(x) = eps_Q0 - V(x), E_Q(x) = E_Q0 + V(x)
    return static, npr - ne


def energy_decomposition(params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(static, slope)`` with ``omega(x) = static + V(x) * slope``.

    ``slope`` is the shuttle proton count minus the shuttle electron count.
    """
    return _energy_parts(params)


def state_energies(x: float, params: ModelParams) -> np.ndarray:
    """Energies of all 256 basis states at shuttle position ``x``."""
    static, slope = _energy_parts(params)
    return static + surface_potential(x, params) * slope


def state_energy(state: int, x: float, params: ModelParams) -> float:
    return float(state_energies(x, params)[int(state)])


def shuttle_charge(states=None) -> np.ndarray:
    """n1 + n2 - N1 - N2 for each basis state (all 256 by default)."""
    occ = occupation_table() if states is None else occupation_table()[np.asarray(states)]
    return occ[..., 0] + occ[..., 1] - occ[..., 2] - occ[..., 3]


_CHARGE_SQ = shuttle_charge().astype(float) ** 2


def shuttle_charge_sq(P: np.ndarray) -> float:
    """Expectation of the squared shuttle charge under populations ``P``."""
    return float(np.dot(P, _CHARGE_SQ))


def site_occupations(P: np.ndarray) -> np.ndarray:
    """Mean occupation of each of the 8 sites."""
    return P @ occupation_table()


def vacuum() -> np.ndarray:
    P = np.zeros(N_STATES)
    P[0] = 1.0
    return P


def check_population(P: np.ndarray, tol: float = 1e-9) -> None:
    P = np.asarray(P)
    if P.shape != (N_STATES,):
        raise ValueError(f"population vector must have shape ({N_STATES},), got {P.shape}")
    if np.any(P < -tol) or np.any(P > 1 + tol):
        raise ValueError("population entries must lie in [0, 1]")
    if abs(P.sum() - 1.0) > tol:
        raise ValueError(f"population does not sum to 1 (sum = {P.sum()!r})")
