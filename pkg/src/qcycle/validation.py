"""Registry of model invariants, run by ``qcycle validate``.

Each check returns ``(ok, detail)``. ``quick=True`` shortens the
trajectory-based checks; everything else is identical.
"""
from __future__ import annotations

import contextlib
import io
import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .harness import (ScanSpec, apply_scheme, derive_seed, run_scan, run_trajectory)
from .membrane import langevin_step
from .params import ModelParams, kelvin_to_mev, mev_to_kelvin
from .propagator import evolve
from .rates import (ChannelKind, _site_coupling, build_generator, build_topology,
                    coupling_profile, proton_rate_profile)
from .states import (N_STATES, SiteId, electron_count, occupancy, occupation_table,
                     proton_count, shuttle_charge, shuttle_charge_sq, state_energies,
                     state_from_occupancies)

MODULES = ("state-space", "rate-generator", "propagator", "membrane-dynamics",
           "experiment-harness", "cli-io")


@dataclass(frozen=True)
class Property:
    module: str
    name: str
    check: Callable[[bool], tuple[bool, str]]


REGISTRY: list[Property] = []


def prop(module: str, name: str):
    if module not in MODULES:
        raise ValueError(f"unknown module {module!r}")

    def deco(fn):
        REGISTRY.append(Property(module, name, fn))
        return fn
    return deco


def random_params(rng: np.random.Generator, **fixed) -> ModelParams:
    """Default parameters with every energy and rate perturbed by up to +-20 %."""
    base = ModelParams()
    changes = {}
    for name in ("eps_Q0", "E_Q0", "U_ee", "U_pp", "U_ep", "U_LH", "eps_L_prime", "eps_H_prime",
                 "eps_A_prime", "eps_B_prime", "lambda_AQ", "lambda_BQ", "lambda_LQ",
                 "lambda_HQ", "lambda_LH", "Delta_AQ", "Delta_BQ", "Delta_LQ", "Delta_HQ",
                 "Delta_LH", "gamma_Fd", "gamma_Pc", "Gamma_N", "Gamma_P", "mu_Fd", "mu_Pc",
                 "mu_N", "mu_P", "T", "V_P", "V_N"):
        changes[name] = getattr(base, name) * rng.uniform(0.8, 1.2)
    changes.update(fixed)
    return base.replace(**changes)


def grand_canonical(x: float, params: ModelParams, mu: float) -> np.ndarray:
    """Stationary populations when every reservoir sits at chemical potential ``mu``."""
    occ = occupation_table()
    w = -(state_energies(x, params) - mu * occ.sum(axis=1)) / params.T
    P = np.exp(w - w.max())
    return P / P.sum()


def random_generator(rng: np.random.Generator, n: int, density: float = 0.3) -> np.ndarray:
    L = rng.uniform(0, 3, (n, n)) * (rng.random((n, n)) < density)
    np.fill_diagonal(L, 0.0)
    L -= np.diag(L.sum(axis=0))
    return L


# ---------------------------------------------------------------- state space

@prop("state-space", "bit layout round-trip over all 256 states")
def _bits(quick):
    ok = all(state_from_occupancies([occupancy(s, k) for k in range(8)]) == s
             for s in range(N_STATES))
    return ok, "256 states"


@prop("state-space", "energy symmetric under E1<->E2 and P1<->P2 exchange")
def _symmetry(quick):
    p = ModelParams()
    worst = 0.0
    for x in np.linspace(-2.5, 2.5, 11):
        w = state_energies(x, p)
        occ = occupation_table()
        for a, b in ((SiteId.ShuttleE1, SiteId.ShuttleE2), (SiteId.ShuttleP1, SiteId.ShuttleP2)):
            swapped = occ.copy()
            swapped[:, [a, b]] = swapped[:, [b, a]]
            idx = swapped @ (1 << np.arange(8))
            worst = max(worst, float(np.abs(w - w[idx]).max()))
    return worst < 1e-9, f"max asymmetry {worst:.2e} meV"


@prop("state-space", "neutral shuttle energies independent of x")
def _neutral(quick):
    p = ModelParams()
    neutral = shuttle_charge() == 0
    h = 1e-4
    worst = 0.0
    for x in np.linspace(-3, 3, 13):
        d = (state_energies(x + h, p) - state_energies(x - h, p)) / (2 * h)
        worst = max(worst, float(np.abs(d[neutral]).max()))
    return worst < 1e-6, f"max |d omega/dx| {worst:.2e}"


@prop("state-space", "mean squared shuttle charge bounded in [0, 4]")
def _qsq(quick):
    rng = np.random.default_rng(1)
    vals = [shuttle_charge_sq(P) for P in rng.dirichlet(np.full(N_STATES, 0.1), 500)]
    return min(vals) >= 0 and max(vals) <= 4 + 1e-12, f"range [{min(vals):.3f}, {max(vals):.3f}]"


# ---------------------------------------------------------------- rate generator

@prop("rate-generator", "column sums zero and off-diagonals nonnegative (100 draws)")
def _columns(quick):
    rng = np.random.default_rng(2)
    worst = 0.0
    neg = False
    for _ in range(100):
        p = random_params(rng)
        L = build_generator(rng.uniform(-2.7, 2.7), p).dense()
        worst = max(worst, float(np.abs(L.sum(axis=0)).max() / max(1.0, np.abs(L).max())))
        off = L - np.diag(np.diag(L))
        neg |= bool((off < 0).any())
    return worst <= 1e-12 and not neg, f"max relative column sum {worst:.1e}"


@prop("rate-generator", "particle-number selection rules")
def _selection(quick):
    L = build_generator(0.3, ModelParams())
    bad = 0
    for c in L.channels():
        de = electron_count(c.to_state) - electron_count(c.from_state)
        dp = proton_count(c.to_state) - proton_count(c.from_state)
        if c.kind == ChannelKind.Marcus:
            bad += (de, dp) != (0, 0)
        elif c.kind == ChannelKind.ElectronReservoir:
            bad += abs(de) != 1 or dp != 0
        else:
            bad += de != 0 or abs(dp) != 1
    return bad == 0, f"{bad} violations"


def marcus_balance_error(params: ModelParams, positions) -> float:
    topo = build_topology(params)
    worst = 0.0
    for x in positions:
        L = build_generator(x, params, topo)
        w = state_energies(x, params)
        m = L.kind == ChannelKind.Marcus
        fwd = {(int(i), int(j)): r for i, j, r in zip(L.src[m], L.dst[m], L.rates[m])}
        for (i, j), r in fwd.items():
            if i < j and r > 0:
                ratio = r / fwd[(j, i)]
                expected = math.exp(-(w[j] - w[i]) / params.T)
                worst = max(worst, abs(ratio / expected - 1.0))
    return worst


@prop("rate-generator", "Marcus detailed balance")
def _marcus_db(quick):
    rng = np.random.default_rng(3)
    err = marcus_balance_error(ModelParams(), rng.uniform(-2.7, 2.7, 5 if quick else 20))
    return err <= 1e-10, f"max relative error {err:.1e}"


@prop("rate-generator", "Fd/Pc detailed balance")
def _reservoir_db(quick):
    p = ModelParams()
    L = build_generator(0.0, p)
    worst = 0.0
    for site, eps, mu in ((SiteId.SiteA, p.eps_A_prime, p.mu_Fd),
                          (SiteId.SiteB, p.eps_B_prime, p.mu_Pc)):
        m = (L.kind == ChannelKind.ElectronReservoir) & ((L.src ^ L.dst) == (1 << site))
        up = L.rates[m & ((L.src >> site) & 1 == 0)]
        down = L.rates[m & ((L.src >> site) & 1 == 1)]
        worst = max(worst, abs(up[0] / down[0] / math.exp(-(eps - mu) / p.T) - 1))
    return worst <= 1e-12, f"max relative error {worst:.1e}"


@prop("rate-generator", "far-side channels suppressed at the membrane faces")
def _locality(quick):
    p = ModelParams()
    topo = build_topology(p)
    bound = math.exp(-16) * (1 + 1e-9)
    worst = 0.0
    for x, far_side, far_sites in ((p.x0, "N", (SiteId.SiteA, SiteId.HemeH)),
                                   (-p.x0, "P", (SiteId.SiteB, SiteId.HemeL))):
        gamma = p.Gamma_N if far_side == "N" else p.Gamma_P
        worst = max(worst, float(proton_rate_profile(far_side, x, p)) / gamma)
        for site in far_sites:
            worst = max(worst, float(coupling_profile(site, x, p)) / _site_coupling(site, p)[0])
        # the same suppression inside the assembled channel table
        m = (topo.decay > 0) & (np.sign(topo.anchor) == -np.sign(x))
        worst = max(worst, float(np.exp(-np.abs(x - topo.anchor[m]) / topo.decay[m]).max()))
    return worst <= bound, f"max relative far-side factor {worst:.2e}"


# ---------------------------------------------------------------- propagator

@prop("propagator", "positivity preserved")
def _positivity(quick):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(50):
        L = random_generator(rng, 16)
        P = rng.dirichlet(np.ones(16))
        out = evolve(P, L, rng.uniform(0, 1))
        worst = min(worst, float(out.min()))
    return worst >= -1e-12, f"min entry {worst:.1e}"


@prop("propagator", "normalization over 10^4 steps")
def _norm(quick):
    p = ModelParams()
    L = build_generator(-p.x0, p)
    P = np.zeros(N_STATES)
    P[0] = 1.0
    for _ in range(1000 if quick else 10000):
        P = evolve(P, L, p.dt)
    drift = abs(P.sum() - 1)
    return drift <= 1e-9, f"drift {drift:.1e}"


@prop("propagator", "semigroup property")
def _semigroup(quick):
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(20):
        L = random_generator(rng, 16)
        P = rng.dirichlet(np.ones(16))
        s, t = rng.uniform(0, 0.1, 2)
        worst = max(worst, float(np.abs(evolve(evolve(P, L, s), L, t) - evolve(P, L, s + t)).max()))
    return worst <= 1e-8, f"max deviation {worst:.1e}"


@prop("propagator", "grand-canonical state stationary at equal potentials")
def _stationary(quick):
    worst = 0.0
    for mu in (0.0, 150.0):
        p = ModelParams(mu_Fd=mu, mu_Pc=mu, mu_N=mu, mu_P=mu)
        for x in (-2.0, -0.7, 0.0, 1.3, 2.0):
            P = grand_canonical(x, p, mu)
            worst = max(worst, float(np.abs(evolve(P, build_generator(x, p), p.dt) - P).max()))
    return worst <= 1e-6, f"max deviation {worst:.1e}"


# ---------------------------------------------------------------- membrane

@prop("membrane-dynamics", "soft-wall containment |x| < 3.7 nm")
def _containment(quick):
    p = ModelParams()
    t_end = 10.0 if quick else 100.0
    worst = max(float(np.abs(run_trajectory(p, derive_seed(11, 0, i), t_end, sample_every=1).x).max())
                for i in range(2 if quick else 6))
    return worst < 3.7, f"max |x| {worst:.2f} nm over {t_end:g} us"


def free_msd(params: ModelParams, n_walkers: int, n_steps: int, seed: int) -> np.ndarray:
    """Mean squared displacement of free walkers after each step."""
    rng = np.random.default_rng(seed)
    x0 = np.zeros(n_walkers)
    x = x0.copy()
    msd = np.empty(n_steps)
    for k in range(n_steps):
        x = langevin_step(x, 0.0, params, rng.standard_normal(n_walkers))
        msd[k] = np.mean((x - x0) ** 2)
    return msd


@prop("membrane-dynamics", "free diffusion MSD = 2Dt")
def _msd(quick):
    p = ModelParams(U_w0=0.0, U_ch0=0.0)
    n_steps = 1000
    # relative sampling error of the MSD is sqrt(2 / walkers)
    msd = free_msd(p, 20_000, n_steps, 6)
    t = p.dt * np.arange(1, n_steps + 1)
    rel = float(np.max(np.abs(msd[99::100] / (2 * p.diffusion * t[99::100]) - 1)))
    return rel <= 0.05, f"max relative deviation {rel:.3f}"


def crossings(params: ModelParams, q_sq: float, n_walkers: int, t_end: float, seed: int) -> int:
    """Total number of x = 0 crossings of independent walkers at fixed squared charge."""
    rng = np.random.default_rng(seed)
    x = np.full(n_walkers, -params.x0)
    count = 0
    for _ in range(int(round(t_end / params.dt))):
        x_new = langevin_step(x, q_sq, params, rng.standard_normal(n_walkers))
        count += int(np.count_nonzero(np.signbit(x) != np.signbit(x_new)))
        x = x_new
    return count


@prop("membrane-dynamics", "charged shuttle crosses the core >= 10x less often")
def _barrier(quick):
    p = ModelParams()
    t_end = 20.0 if quick else 100.0
    neutral = crossings(p, 0.0, 8, t_end, 7)
    charged = crossings(p, 4.0, 8, t_end, 7)
    return neutral >= 10 * max(charged, 1) or (charged == 0 and neutral > 0), \
        f"crossings neutral {neutral}, charged {charged}"


# ---------------------------------------------------------------- harness

@prop("experiment-harness", "scan determinism under a master seed")
def _determinism(quick):
    spec = ScanSpec("delta_mu", [150.0, 300.0], trajectories=2, t_end=0.5, seed=42)
    a = run_scan(spec, ModelParams())
    b = run_scan(spec, ModelParams())
    same = all(np.array_equal(pa.n_e, pb.n_e) and np.array_equal(pa.N_p, pb.N_p)
               for pa, pb in zip(a.points, b.points))
    return same, "bit-identical" if same else "results differ"


@prop("experiment-harness", "QY <= 2.2 for every default trajectory")
def _qy_cap(quick):
    t_end = 20.0 if quick else 100.0
    qys = [run_trajectory(ModelParams(), derive_seed(13, 0, i), t_end).qy
           for i in range(2 if quick else 6)]
    finite = [q for q in qys if np.isfinite(q)]
    return all(q <= 2.2 for q in finite), "QY " + ", ".join(f"{q:.3f}" for q in qys)


# Counters are population-weighted currents, not counts, so their spread across
# seeds can sit at round-off level; below this many particles they count as zero.
NUMERICAL_ZERO = 1e-9


@prop("experiment-harness", "zero-bias null result for every scheme")
def _null(quick):
    # equilibrium needs the surface potential off too: it shifts state energies
    # without acting on the shuttle, which pumps slightly even at equal potentials
    t_end = 10.0 if quick else 100.0
    n = 3 if quick else 6
    details = []
    ok = True
    for scheme in ("I", "II", "III"):
        p = apply_scheme(scheme, 298.0, ModelParams()).with_surface_potential(0.0, 0.0)
        p = p.replace(mu_Fd=0.0, mu_Pc=0.0, mu_N=0.0, mu_P=0.0)
        res = [run_trajectory(p, derive_seed(17, 0, i), t_end) for i in range(n)]
        for name in ("n_e", "N_p"):
            v = np.array([getattr(r, name) for r in res])
            sigma = v.std(ddof=1)
            ok &= abs(v.mean()) <= 3 * sigma or abs(v.mean()) <= NUMERICAL_ZERO
            details.append(f"{scheme}:{name}={v.mean():.1e}")
    return ok, " ".join(details) + f" (3 sigma or below {NUMERICAL_ZERO:g})"


@prop("experiment-harness", "scheme III reproduces the default surface potentials")
def _scheme3(quick):
    T_K = mev_to_kelvin(140.0 / 5.4)
    p = apply_scheme("III", T_K, ModelParams())
    ok = abs(p.V_P - 140.0) < 1e-9 and abs(p.V_N - 120.0) <= 1.0 and \
        abs(kelvin_to_mev(T_K) - 25.93) < 0.01
    return ok, f"T = {kelvin_to_mev(T_K):.2f} meV, V_N = {p.V_N:.1f} meV"


# ---------------------------------------------------------------- cli-io

@prop("cli-io", "config round-trip")
def _roundtrip(quick):
    from .io import emit_config, parse_config
    rng = np.random.default_rng(8)
    ok = True
    for _ in range(20):
        p = random_params(rng)
        spec = ScanSpec("temperature", [250.0, 300.0], scheme="II", seed=3)
        cfg = parse_config(emit_config(p, spec))
        ok &= cfg.params == p and cfg.scan == spec
    return ok, "20 random parameter sets"


@prop("cli-io", "output determinism")
def _output_det(quick):
    import tempfile
    from pathlib import Path
    from .cli import main
    with tempfile.TemporaryDirectory() as d:
        outs = []
        for tag in ("a", "b"):
            out = Path(d) / tag
            with contextlib.redirect_stdout(io.StringIO()):
                code = main(["run", "--t-end", "0.2", "--seed", "7", "--out", str(out)])
            outs.append((code, (out / "trajectory.csv").read_bytes()))
    return outs[0] == outs[1] and outs[0][0] == 0, "two runs byte-identical"


@prop("cli-io", "every module has registered properties")
def _coverage(quick):
    missing = [m for m in MODULES if not any(p.module == m for p in REGISTRY)]
    return not missing, "missing: " + ", ".join(missing) if missing else f"{len(REGISTRY)} properties"


def run_all(quick: bool = False, echo=print) -> bool:
    ok_all = True
    for module, props in itertools.groupby(REGISTRY, key=lambda p: p.module):
        echo(f"[{module}]")
        for p in props:
            try:
                ok, detail = p.check(quick)
            except Exception as exc:  # a crashing check is a failed check
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            ok_all &= bool(ok)
            echo(f"  {'PASS' if ok else 'FAIL'}  {p.name}  ({detail})")
    return ok_all
