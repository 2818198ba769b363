"""Physical parameter set for the b6f Q-cycle model.

Energies are in meV, lengths in nm, times in microseconds. Rates quoted as
energies (``hbar = 1``) are converted to 1/us with ``hbar_inv``.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

K_B_MEV_PER_K = 0.08617

# Static offsets between primed and unprimed fixed-site energies at the
# default surface potential (V_P = 140, V_N = 120).
_DEFAULT_V_P = 140.0
_DEFAULT_V_N = 120.0

class ParamError(ValueError):
    """Invalid parameter value; ``name`` is the offending field."""

    def __init__(self, name: str, message: str):
        super().__init__(message)
        self.name = name


PROTON_GAP_CONVENTIONS = ("signed", "absolute")
FLUX_QUADRATURES = ("exact", "trapezoid")
INITIAL_POPULATIONS = ("reservoir", "vacuum")


@dataclass(frozen=True)
class ModelParams:
    # shuttle
    eps_Q0: float = 280.0
    E_Q0: float = 822.0
    U_ee: float = 305.0
    U_pp: float = 76.3
    U_ep: float = 610.0
    # fixed sites (primed, i.e. already shifted by the surface potential)
    eps_L_prime: float = 360.0
    eps_H_prime: float = 220.0
    eps_A_prime: float = 465.0
    eps_B_prime: float = -495.0
    U_LH: float = 240.0
    # Marcus channels
    lambda_AQ: float = 100.0
    lambda_BQ: float = 100.0
    lambda_LQ: float = 100.0
    lambda_HQ: float = 100.0
    lambda_LH: float = 250.0
    Delta_AQ: float = 0.10
    Delta_BQ: float = 0.10
    Delta_LQ: float = 0.06
    Delta_HQ: float = 0.06
    Delta_LH: float = 0.10
    # reservoirs
    gamma_Fd: float = 0.0001
    gamma_Pc: float = 0.0001
    Gamma_N: float = 0.002
    Gamma_P: float = 0.002
    mu_Fd: float = 410.0
    mu_Pc: float = -440.0
    mu_N: float = -75.0
    mu_P: float = 75.0
    T: float = 25.0
    # surface potential and membrane potentials
    V_P: float = 140.0
    V_N: float = 120.0
    U_w0: float = 500.0
    U_ch0: float = 770.0
    # lengths (nm)
    x0: float = 2.0
    l_e: float = 0.25
    l_p: float = 0.25
    x_w: float = 2.70
    l_w: float = 0.10
    x_ch: float = 1.70
    l_ch: float = 0.05
    # drag (meV us / nm^2) and time step (us)
    zeta: float = 8.55
    dt: float = 1e-3
    # 1/hbar in 1/us per meV
    hbar_inv: float = 1.5193e6
    proton_gap_convention: str = "signed"
    flux_quadrature: str = "exact"
    initial_populations: str = "reservoir"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("lambda_AQ", "lambda_BQ", "lambda_LQ", "lambda_HQ", "lambda_LH",
                     "T", "zeta", "x0", "l_e", "l_p", "x_w", "l_w", "x_ch", "l_ch",
                     "dt", "hbar_inv"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ParamError(name, f"{name} must be positive and finite, got {value!r}")
        for name in ("gamma_Fd", "gamma_Pc", "Gamma_N", "Gamma_P", "U_w0", "U_ch0"):
            if getattr(self, name) < 0:
                raise ParamError(name, f"{name} must be non-negative, got {getattr(self, name)!r}")
        if self.proton_gap_convention not in PROTON_GAP_CONVENTIONS:
            raise ParamError(
                "proton_gap_convention",
                f"proton_gap_convention must be one of {PROTON_GAP_CONVENTIONS}, "
                f"got {self.proton_gap_convention!r}")
        if self.flux_quadrature not in FLUX_QUADRATURES:
            raise ParamError("flux_quadrature",
                             f"flux_quadrature must be one of {FLUX_QUADRATURES}, "
                             f"got {self.flux_quadrature!r}")
        if self.initial_populations not in INITIAL_POPULATIONS:
            raise ParamError("initial_populations",
                             f"initial_populations must be one of {INITIAL_POPULATIONS}, "
                             f"got {self.initial_populations!r}")

    @property
    def diffusion(self) -> float:
        """Diffusion coefficient T/zeta in nm^2/us."""
        return self.T / self.zeta

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def with_surface_potential(self, V_P: float, V_N: float) -> "ModelParams":
        """Return a copy with new surface-potential extremes and re-primed site energies.

        The unprimed energies are recovered from the values stored at the
        default operating point (V_P = 140, V_N = 120); A and H sit on the
        N-side (shifted by -V_N), B and L on the P-side (shifted by +V_P).
        """
        dN = V_N - _DEFAULT_V_N
        dP = V_P - _DEFAULT_V_P
        defaults = ModelParams()
        return self.replace(
            V_P=V_P,
            V_N=V_N,
            eps_A_prime=defaults.eps_A_prime - dN,
            eps_H_prime=defaults.eps_H_prime - dN,
            eps_B_prime=defaults.eps_B_prime + dP,
            eps_L_prime=defaults.eps_L_prime + dP,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def param_names() -> list[str]:
    return [f.name for f in dataclasses.fields(ModelParams)]


def kelvin_to_mev(T_K: float) -> float:
    return K_B_MEV_PER_K * T_K


def mev_to_kelvin(T_meV: float) -> float:
    return T_meV / K_B_MEV_PER_K
