"""Coupled trajectories, temperature schemes, parameter scans, figures of merit."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .params import ModelParams, kelvin_to_mev
from .rates import build_topology, fermi_occupation
from .states import N_STATES, occupation_table, shuttle_charge

DEFAULT_DELTA_PH = 2.5
SAMPLE_EVERY = 100
SCAN_VARIABLES = ("delta_mu", "delta_V", "temperature")
SCHEMES = ("I", "II", "III")
# V_P - V_N held fixed in delta_V scans
DELTA_V_SPLIT = 20.0


class TrajectoryAborted(RuntimeError):
    pass


@dataclass
class TrajectoryResult:
    """Sampled series: columns t, x, n1, n2, N1, N2, nL, nH, nA, nB, n_e, N_p, N_n."""

    samples: np.ndarray
    final_populations: np.ndarray
    final_x: float
    seed: int

    @property
    def t(self):
        return self.samples[:, 0]

    @property
    def x(self):
        return self.samples[:, 1]

    @property
    def occupations(self):
        return self.samples[:, 2:10]

    @property
    def n_e(self) -> float:
        return float(self.samples[-1, 10])

    @property
    def N_p(self) -> float:
        return float(self.samples[-1, 11])

    @property
    def N_n(self) -> float:
        return float(self.samples[-1, 12])

    @property
    def qy(self) -> float:
        return self.N_p / self.n_e if self.n_e >= MIN_TRANSFER else math.nan


# Counts are integrated expectations, so a stalled trajectory ends with n_e at
# round-off level (even 1e-10) and N_p / n_e is meaningless there.
MIN_TRANSFER = 1e-3


def derive_seed(master: int, point: int, trajectory: int) -> np.random.SeedSequence:
    """Independent stream for (grid point, trajectory) under a master seed."""
    return np.random.SeedSequence([int(master), int(point), int(trajectory)])


def initial_populations(params: ModelParams) -> np.ndarray:
    """Starting population vector.

    ``vacuum``: every site empty. ``reservoir``: shuttle and hemes empty, A and
    B independently occupied with the Fermi factors of their Fd / Pc pools.
    """
    P = np.zeros(N_STATES)
    if params.initial_populations == "vacuum":
        P[0] = 1.0
        return P
    occ = occupation_table()
    nA = fermi_occupation(params.eps_A_prime, params.T, params.mu_Fd)
    nB = fermi_occupation(params.eps_B_prime, params.T, params.mu_Pc)
    empty_rest = occ[:, :6].sum(axis=1) == 0
    P[:] = (empty_rest * np.where(occ[:, 6] == 1, nA, 1 - nA)
            * np.where(occ[:, 7] == 1, nB, 1 - nB))
    return P / P.sum()


def run_trajectory(params: ModelParams, seed, t_end: float, dt: float | None = None,
                   sample_every: int = SAMPLE_EVERY, x_init: float | None = None,
                   P_init: np.ndarray | None = None) -> TrajectoryResult:
    """Integrate populations and shuttle position together for ``t_end`` microseconds.

    Each step rebuilds the generator at the current position, propagates the
    populations exactly over ``dt``, accumulates the fluxes, and then moves the
    shuttle with the mean squared charge of the updated populations.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    if dt is not None and dt != params.dt:
        params = params.replace(dt=dt)
    dt = params.dt
    n_steps = int(math.ceil(t_end / dt - 1e-9))
    rng = np.random.default_rng(seed)
    normals = rng.standard_normal(n_steps)
    topo = build_topology(params)
    P = initial_populations(params) if P_init is None else np.array(P_init, dtype=float)
    x = -params.x0 if x_init is None else float(x_init)
    samples = np.zeros((-(-n_steps // sample_every) + 1, _kernels.N_SAMPLE_COLS))
    counters = np.zeros(3)
    status, step, x_final, P_final = _kernels.trajectory(
        P, x, normals, n_steps, sample_every, 1e-12, _kernels.RATE_FLOOR,
        params.flux_quadrature == "exact",
        topo.src, topo.dst, *topo.kernel_args()[:11], topo.tags,
        shuttle_charge().astype(float) ** 2, occupation_table().astype(float),
        topo.T, topo.absolute_gap, topo.hbar_inv, params.x0, params.V_N, params.V_P,
        params.U_w0, params.x_w, params.l_w, params.U_ch0, params.x_ch, params.l_ch,
        params.zeta, dt, samples, counters)
    if status != _kernels.STATUS_OK:
        raise TrajectoryAborted(
            f"normalization drift above {_kernels.NORM_ABORT:g} at step {step} (t = {step * dt:g} us)")
    return TrajectoryResult(samples, np.asarray(P_final), float(x_final),
                            seed if isinstance(seed, int) else -1)


def delta_mu_from_ph(delta_pH: float, T_K: float) -> tuple[float, float, float]:
    """Proton electrochemical gradient for a pH difference pH_N - pH_P.

    Returns ``(delta_mu, mu_P, mu_N)`` with the gradient split symmetrically.
    """
    if T_K <= 0:
        raise ValueError("temperature must be positive")
    dmu = delta_pH * (T_K / 298.0) * 60.0
    return dmu, dmu / 2.0, -dmu / 2.0


def apply_scheme(scheme: str, T_K: float, base: ModelParams,
                 delta_pH: float = DEFAULT_DELTA_PH) -> ModelParams:
    """Parameters for temperature ``T_K`` under scheme I, II or III.

    I: temperature only. II: also fixes the pH gradient. III: II plus
    surface potentials proportional to temperature (V_P = 5.4 T, V_N = 4.6 T).
    """
    T = kelvin_to_mev(T_K)
    params = base.replace(T=T)
    if scheme == "I":
        return params
    if scheme not in ("II", "III"):
        raise ValueError(f"unknown scheme {scheme!r}")
    _, mu_P, mu_N = delta_mu_from_ph(delta_pH, T_K)
    params = params.replace(mu_P=mu_P, mu_N=mu_N)
    if scheme == "III":
        params = params.with_surface_potential(5.4 * T, 4.6 * T)
    return params


def figures_of_merit(n_e: float, N_p: float, params: ModelParams) -> tuple[float, float, float]:
    """(QY, Q, eta); all NaN when less than MIN_TRANSFER electrons reached the Pc pool."""
    if not n_e >= MIN_TRANSFER:
        return math.nan, math.nan, math.nan
    qy = N_p / n_e
    Q = qy * N_p
    eta = (params.mu_P - params.mu_N) / (params.mu_Fd - params.mu_Pc) * qy
    return qy, Q, eta


@dataclass
class ScanSpec:
    variable: str
    grid: list[float]
    scheme: str = "III"
    trajectories: int = 6
    t_end: float = 100.0
    dt: float = 1e-3
    seed: int = 0
    sample_every: int = SAMPLE_EVERY

    def __post_init__(self):
        if self.variable not in SCAN_VARIABLES:
            raise ValueError(f"scan variable must be one of {SCAN_VARIABLES}, got {self.variable!r}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        self.grid = [float(g) for g in self.grid]
        if not self.grid:
            raise ValueError("scan grid is empty")
        if any(b < a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("scan grid must be sorted")
        if self.trajectories < 1:
            raise ValueError("need at least one trajectory per point")
        if self.t_end <= 0 or self.dt <= 0:
            raise ValueError("t_end and dt must be positive")


def point_params(spec: ScanSpec, value: float, base: ModelParams) -> ModelParams:
    if spec.variable == "delta_mu":
        params = base.replace(mu_P=value / 2.0, mu_N=-value / 2.0)
    elif spec.variable == "delta_V":
        params = base.with_surface_potential((value + DELTA_V_SPLIT) / 2.0,
                                             (value - DELTA_V_SPLIT) / 2.0)
    else:
        params = apply_scheme(spec.scheme, value, base)
    return params.replace(dt=spec.dt)


@dataclass
class ScanPoint:
    param: float
    params: ModelParams
    n_e: np.ndarray
    N_p: np.ndarray
    qy: np.ndarray
    Q: np.ndarray
    eta: np.ndarray

    @staticmethod
    def _mean(a):
        a = a[np.isfinite(a)]
        return float(a.mean()) if a.size else math.nan

    @staticmethod
    def _std(a):
        a = a[np.isfinite(a)]
        return float(a.std()) if a.size else math.nan

    @property
    def qy_mean(self):
        return self._mean(self.qy)

    @property
    def qy_std(self):
        return self._std(self.qy)

    @property
    def ne_mean(self):
        return float(self.n_e.mean())

    @property
    def ne_std(self):
        return float(self.n_e.std())

    @property
    def np_mean(self):
        return float(self.N_p.mean())

    @property
    def np_std(self):
        return float(self.N_p.std())

    @property
    def Q_mean(self):
        return self._mean(self.Q)

    @property
    def eta_mean(self):
        return self._mean(self.eta)


@dataclass
class ScanResult:
    spec: ScanSpec
    points: list[ScanPoint] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.points])


def _run_one(args):
    params, seed, t_end, sample_every = args
    res = run_trajectory(params, seed, t_end, sample_every=sample_every)
    return res.n_e, res.N_p


def run_scan(spec: ScanSpec, base: ModelParams, workers: int = 1, progress=None) -> ScanResult:
    """Run ``spec.trajectories`` trajectories at every grid point and aggregate.

    Results depend only on the ScanSpec and its master seed: seeds are derived per
    (point, trajectory) and aggregation runs in index order, whatever ``workers`` is.
    """
    jobs = []
    all_params = []
    for ip, value in enumerate(spec.grid):
        params = point_params(spec, value, base)
        all_params.append(params)
        for it in range(spec.trajectories):
            jobs.append((params, derive_seed(spec.seed, ip, it), spec.t_end, spec.sample_every))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_run_one, jobs))
    else:
        outputs = []
        for k, job in enumerate(jobs):
            try:
                outputs.append(_run_one(job))
            except TrajectoryAborted as exc:
                ip = k // spec.trajectories
                raise TrajectoryAborted(f"grid point {spec.grid[ip]!r}: {exc}") from exc
            if progress is not None:
                progress(k + 1, len(jobs))
    result = ScanResult(spec)
    n = spec.trajectories
    for ip, value in enumerate(spec.grid):
        chunk = np.array(outputs[ip * n:(ip + 1) * n])
        params = all_params[ip]
        merit = np.array([figures_of_merit(ne, Np, params) for ne, Np in chunk])
        result.points.append(ScanPoint(value, params, chunk[:, 0], chunk[:, 1],
                                       merit[:, 0], merit[:, 1], merit[:, 2]))
    return result
