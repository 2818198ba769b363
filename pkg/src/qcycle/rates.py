"""Channel topology and the position-dependent population generator."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterator, NamedTuple

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .params import ModelParams
from .states import N_STATES, SiteId, energy_decomposition, surface_potential


class ChannelKind(IntEnum):
    ElectronReservoir = 0
    Marcus = 1
    ProtonReservoir = 2


# Marcus connectivity as (site x, site y); both directions are emitted.
FIXED_ELECTRON_SITES = (SiteId.SiteA, SiteId.SiteB, SiteId.HemeL, SiteId.HemeH)
MARCUS_PAIRS = tuple(
    (q, s) for q in (SiteId.ShuttleE1, SiteId.ShuttleE2) for s in FIXED_ELECTRON_SITES
) + ((SiteId.HemeL, SiteId.HemeH),)

TAG_NAMES = ("n_e", "N_p", "N_n")


def fermi_occupation(eps, T, mu):
    """Fermi-Dirac occupation 1/(exp((eps - mu)/T) + 1), safe in both tails."""
    if np.any(np.asarray(T) <= 0):
        raise ValueError("temperature must be positive")
    z = (np.asarray(eps, dtype=float) - mu) / T
    out = _kernels.fermi_vec(np.atleast_1d(z))
    return float(out[0]) if np.ndim(z) == 0 else out


def marcus_rate(Delta, lam, T, d_omega):
    """Marcus transfer rate in meV for tunnelling amplitude ``Delta``.

    ``d_omega`` is the final minus the initial state energy.
    """
    if np.any(np.asarray(lam) <= 0):
        raise ValueError("reorganization energy must be positive")
    if np.any(np.asarray(T) <= 0):
        raise ValueError("temperature must be positive")
    Delta = np.asarray(Delta, dtype=float)
    out = (Delta ** 2 * np.sqrt(np.pi / (lam * T))
           * np.exp(-(lam + np.asarray(d_omega, dtype=float)) ** 2 / (4 * lam * T)))
    return float(out) if out.ndim == 0 else out


def site_anchor(site: SiteId, params: ModelParams) -> float:
    """Membrane position of a fixed electron site: P-side for L and B, N-side for H and A."""
    if site in (SiteId.HemeL, SiteId.SiteB):
        return params.x0
    if site in (SiteId.HemeH, SiteId.SiteA):
        return -params.x0
    raise ValueError(f"{site!r} is not a fixed electron site")


def _site_coupling(site: SiteId, params: ModelParams) -> tuple[float, float]:
    return {
        SiteId.SiteA: (params.Delta_AQ, params.lambda_AQ),
        SiteId.SiteB: (params.Delta_BQ, params.lambda_BQ),
        SiteId.HemeL: (params.Delta_LQ, params.lambda_LQ),
        SiteId.HemeH: (params.Delta_HQ, params.lambda_HQ),
    }[site]


def coupling_profile(site: SiteId, x, params: ModelParams):
    """Tunnelling amplitude between the shuttle and a fixed site, decaying with distance."""
    delta, _ = _site_coupling(SiteId(site), params)
    return delta * np.exp(-np.abs(np.asarray(x) - site_anchor(SiteId(site), params)) / params.l_e)


def proton_rate_profile(side: str, x, params: ModelParams):
    """Proton exchange rate (meV) with the N- or P-side bulk at shuttle position ``x``."""
    if side == "N":
        gamma, anchor = params.Gamma_N, -params.x0
    elif side == "P":
        gamma, anchor = params.Gamma_P, params.x0
    else:
        raise ValueError(f"side must be 'N' or 'P', got {side!r}")
    return gamma * np.exp(-np.abs(np.asarray(x) - anchor) / params.l_p)


class Topology(NamedTuple):
    """Position-independent channel tables consumed by the kernels.

    A channel's rate at position x is ``hbar_inv * amp * exp(-|x - anchor| / decay)``
    times a kind-specific energy factor (none for electron reservoirs, the
    Marcus exponent, or the proton Fermi factor). ``decay == 0`` means no
    position dependence. The energy gap of channel c is ``d0 + V(x) * ds``.

    Channels sharing an (anchor, decay) pair share a position group ``grp``;
    channels sharing (kind, lam, d0, ds, mu, uptake) share an energy class
    ``cls``. The kernels evaluate each group and class once per step.
    """

    src: np.ndarray
    dst: np.ndarray
    kind: np.ndarray
    amp: np.ndarray
    anchor: np.ndarray
    decay: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    uptake: np.ndarray
    tags: np.ndarray  # (n_channels, 3) float: n_e, N_p, N_n
    static: np.ndarray
    slope: np.ndarray
    grp: np.ndarray
    g_anchor: np.ndarray
    g_decay: np.ndarray
    cls: np.ndarray
    c_kind: np.ndarray
    c_lam: np.ndarray
    c_d0: np.ndarray
    c_ds: np.ndarray
    c_mu: np.ndarray
    c_uptake: np.ndarray
    T: float
    absolute_gap: bool
    hbar_inv: float

    def kernel_args(self) -> tuple:
        """Arguments of ``_kernels.channel_rates`` after ``x`` and ``V``."""
        return (self.amp, self.grp, self.g_anchor, self.g_decay, self.cls, self.c_kind,
                self.c_lam, self.c_d0, self.c_ds, self.c_mu, self.c_uptake, self.T,
                self.absolute_gap, self.hbar_inv)


def build_topology(params: ModelParams) -> Topology:
    rows = []  # (src, dst, kind, amp, anchor, decay, lam, mu, uptake, tags)
    idx = np.arange(N_STATES)
    T = params.T

    def bit(site):
        return 1 << int(site)

    # Fd <-> A and Pc <-> B
    for site, gamma, mu, tag_release in ((SiteId.SiteA, params.gamma_Fd, params.mu_Fd, (0, 0, 0)),
                                         (SiteId.SiteB, params.gamma_Pc, params.mu_Pc, (1, 0, 0))):
        eps = params.eps_A_prime if site == SiteId.SiteA else params.eps_B_prime
        nbar = fermi_occupation(eps, T, mu)
        empty = idx[(idx & bit(site)) == 0]
        tag_uptake = tuple(-t for t in tag_release)
        for s in empty:
            rows.append((s, s | bit(site), ChannelKind.ElectronReservoir, gamma * nbar,
                         0.0, 0.0, 0.0, 0.0, True, tag_uptake))
            rows.append((s | bit(site), s, ChannelKind.ElectronReservoir, gamma * (1.0 - nbar),
                         0.0, 0.0, 0.0, 0.0, False, tag_release))

    # Marcus tunnelling
    for a, b in MARCUS_PAIRS:
        if a == SiteId.HemeL and b == SiteId.HemeH:
            delta, lam, anchor, decay = params.Delta_LH, params.lambda_LH, 0.0, 0.0
        else:
            delta, lam = _site_coupling(b, params)
            anchor, decay = site_anchor(b, params), params.l_e / 2.0  # |Delta|^2 decays twice as fast
        amp = delta ** 2 * math.sqrt(math.pi / (lam * T))
        for x_site, y_site in ((a, b), (b, a)):
            mask = ((idx & bit(x_site)) != 0) & ((idx & bit(y_site)) == 0)
            for s in idx[mask]:
                rows.append((s, s ^ bit(x_site) ^ bit(y_site), ChannelKind.Marcus, amp,
                             anchor, decay, lam, 0.0, False, (0, 0, 0)))

    # proton exchange with the N- and P-side bulk
    for side, gamma, mu, anchor in (("N", params.Gamma_N, params.mu_N, -params.x0),
                                    ("P", params.Gamma_P, params.mu_P, params.x0)):
        up_tag = (0, 0, 1) if side == "N" else (0, -1, 0)
        for k in (SiteId.ShuttleP1, SiteId.ShuttleP2):
            for s in idx[(idx & bit(k)) == 0]:
                rows.append((s, s | bit(k), ChannelKind.ProtonReservoir, gamma, anchor, params.l_p,
                             0.0, mu, True, up_tag))
                rows.append((s | bit(k), s, ChannelKind.ProtonReservoir, gamma, anchor, params.l_p,
                             0.0, mu, False, tuple(-t for t in up_tag)))

    cols = list(zip(*rows))
    static, slope = energy_decomposition(params)
    src = np.asarray(cols[0], dtype=np.int64)
    dst = np.asarray(cols[1], dtype=np.int64)
    kind = np.asarray(cols[2], dtype=np.int64)
    anchor = np.asarray(cols[4], dtype=float)
    decay = np.asarray(cols[5], dtype=float)
    lam = np.asarray(cols[6], dtype=float)
    mu = np.asarray(cols[7], dtype=float)
    uptake = np.asarray(cols[8], dtype=np.bool_)

    groups, grp = np.unique(np.column_stack([anchor, decay]), axis=0, return_inverse=True)
    d0 = static[dst] - static[src]
    ds = slope[dst] - slope[src]
    # electron-reservoir channels carry no energy factor; collapse them to one class
    plain = kind == ChannelKind.ElectronReservoir
    key = np.column_stack([kind, lam, np.where(plain, 0.0, d0), np.where(plain, 0.0, ds),
                           mu, np.where(plain, False, uptake)]).astype(float)
    classes, cls = np.unique(key, axis=0, return_inverse=True)
    return Topology(
        src=src, dst=dst, kind=kind,
        amp=np.asarray(cols[3], dtype=float),
        anchor=anchor, decay=decay, lam=lam, mu=mu, uptake=uptake,
        tags=np.ascontiguousarray(np.asarray(cols[9], dtype=float)),
        static=np.asarray(static, dtype=float),
        slope=np.asarray(slope, dtype=float),
        grp=grp.ravel().astype(np.int64),
        g_anchor=np.ascontiguousarray(groups[:, 0]),
        g_decay=np.ascontiguousarray(groups[:, 1]),
        cls=cls.ravel().astype(np.int64),
        c_kind=classes[:, 0].astype(np.int64),
        c_lam=np.ascontiguousarray(classes[:, 1]),
        c_d0=np.ascontiguousarray(classes[:, 2]),
        c_ds=np.ascontiguousarray(classes[:, 3]),
        c_mu=np.ascontiguousarray(classes[:, 4]),
        c_uptake=classes[:, 5].astype(np.bool_),
        T=float(T),
        absolute_gap=params.proton_gap_convention == "absolute",
        hbar_inv=float(params.hbar_inv),
    )


def channel_rates(topo: Topology, x: float, params: ModelParams) -> np.ndarray:
    """Rates (1/us) of every channel in ``topo`` at shuttle position ``x``."""
    out = np.empty(topo.src.shape[0])
    _kernels.channel_rates(float(x), float(surface_potential(x, params)), *topo.kernel_args(), out)
    return out


@dataclass(frozen=True)
class Channel:
    kind: ChannelKind
    from_state: int
    to_state: int
    rate: float
    n_e: int
    N_p: int
    N_n: int


@dataclass(frozen=True)
class RateMatrix:
    """Sparse generator in channel (COO) form; column j of the dense form is state j's outflow."""

    src: np.ndarray
    dst: np.ndarray
    rates: np.ndarray
    kind: np.ndarray
    tags: np.ndarray
    n_states: int = N_STATES

    @classmethod
    def from_arrays(cls, src, dst, rates, n_states: int | None = None, tags=None, kind=None):
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        rates = np.asarray(rates, dtype=float)
        if np.any(rates < 0):
            raise ValueError("rates must be non-negative")
        if np.any(src == dst):
            raise ValueError("channels must connect distinct states")
        n = int(max(src.max(initial=-1), dst.max(initial=-1)) + 1) if n_states is None else n_states
        if tags is None:
            tags = np.zeros((src.size, 3))
        if kind is None:
            kind = np.full(src.size, -1, dtype=np.int64)
        return cls(src, dst, rates, np.asarray(kind), np.asarray(tags, dtype=float), n)

    @classmethod
    def from_dense(cls, L: np.ndarray) -> "RateMatrix":
        L = np.asarray(L, dtype=float)
        dst, src = np.nonzero(L - np.diag(np.diag(L)))
        return cls.from_arrays(src, dst, L[dst, src], n_states=L.shape[0])

    def exit_rates(self) -> np.ndarray:
        return np.bincount(self.src, weights=self.rates, minlength=self.n_states)

    def dense(self) -> np.ndarray:
        L = np.zeros((self.n_states, self.n_states))
        np.add.at(L, (self.dst, self.src), self.rates)
        # diagonal from exactly rounded off-diagonal column sums, so columns cancel to ~1 ulp
        diag = [math.fsum(L[:, j]) for j in range(self.n_states)]
        L[np.diag_indices(self.n_states)] = -np.asarray(diag)
        return L

    def sparse(self) -> sp.csc_matrix:
        off = sp.coo_matrix((self.rates, (self.dst, self.src)), shape=(self.n_states,) * 2)
        return (off - sp.diags(self.exit_rates())).tocsc()

    def channels(self) -> Iterator[Channel]:
        for c in range(self.src.size):
            ne, Np, Nn = (int(t) for t in self.tags[c])
            yield Channel(ChannelKind(self.kind[c]) if self.kind[c] >= 0 else None,
                          int(self.src[c]), int(self.dst[c]), float(self.rates[c]), ne, Np, Nn)


def build_generator(x: float, params: ModelParams, topo: Topology | None = None) -> RateMatrix:
    """Assemble the 256-state generator at shuttle position ``x``."""
    if topo is None:
        topo = build_topology(params)
    return RateMatrix(topo.src, topo.dst, channel_rates(topo, x, params), topo.kind, topo.tags)
