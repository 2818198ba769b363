"""Hot loops: channel rates, uniformized propagation, and the trajectory step loop.

Every kernel has a numba ``@njit`` implementation and a pure-numpy twin.
The numba path is used when numba imports and ``QCYCLE_DISABLE_NUMBA`` is
unset (or ``0``); set ``QCYCLE_DISABLE_NUMBA=1`` to force numpy.
"""
from __future__ import annotations

import math
import os

import numpy as np

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("QCYCLE_DISABLE_NUMBA", "0") in ("", "0")

KIND_ELECTRON, KIND_MARCUS, KIND_PROTON = 0, 1, 2
STATUS_OK, STATUS_NORM_DRIFT = 0, 1
NORM_ABORT = 1e-6
# cap on nu*dt per uniformization pass; larger steps are split
MAX_POISSON_MEAN = 50.0
N_SAMPLE_COLS = 13  # t, x, 8 site occupations, n_e, N_p, N_n
# channels slower than this (1/us) are skipped inside trajectories
RATE_FLOOR = 1e-12


# ---------------------------------------------------------------- scalars

def _fermi(z):
    # 1 / (exp(z) + 1) without overflow
    if z > 0.0:
        e = math.exp(-z)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(z))


def _confine_grad(x, U_w0, x_w, l_w):
    u1 = (x - x_w) / l_w
    u2 = (x + x_w) / l_w
    # s(1 - s) as s(u) s(-u) keeps the gradient exactly odd in x
    return U_w0 * (_fermi(u1) * _fermi(-u1) - _fermi(u2) * _fermi(-u2)) / l_w


def _barrier_grad(x, U_ch0, x_ch, l_ch):
    u1 = (x - x_ch) / l_ch
    u2 = (x + x_ch) / l_ch
    return U_ch0 * (_fermi(u2) * _fermi(-u2) - _fermi(u1) * _fermi(-u1)) / l_ch


def _langevin(x, q_sq, noise, U_w0, x_w, l_w, U_ch0, x_ch, l_ch, zeta, T, dt):
    force = -_confine_grad(x, U_w0, x_w, l_w) - q_sq * _barrier_grad(x, U_ch0, x_ch, l_ch)
    return x + dt / zeta * force + math.sqrt(2.0 * T / zeta * dt) * noise


def _surface(x, x0, V_N, V_P):
    return -(x - x0) / (2.0 * x0) * V_N - (x + x0) / (2.0 * x0) * V_P


# ---------------------------------------------------------------- numpy path

def fermi_vec(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z > 0
    e = np.exp(-z[pos])
    out[pos] = e / (1.0 + e)
    out[~pos] = 1.0 / (1.0 + np.exp(z[~pos]))
    return out


def channel_rates_numpy(x, V, amp, grp, g_anchor, g_decay, cls, c_kind, c_lam, c_d0, c_ds,
                        c_mu, c_uptake, T, absolute_gap, hbar_inv, out):
    pos = np.where(g_decay > 0, np.exp(-np.abs(x - g_anchor) / np.where(g_decay > 0, g_decay, 1.0)),
                   1.0)
    factor = np.ones(c_kind.shape[0])
    gap = c_d0 + V * c_ds

    m = c_kind == KIND_MARCUS
    lm = c_lam[m]
    factor[m] = np.exp(-(lm + gap[m]) ** 2 / (4.0 * lm * T))

    p = c_kind == KIND_PROTON
    up = c_uptake[p]
    # gap = energy with the proton minus energy without it
    g = np.where(up, gap[p], -gap[p])
    if absolute_gap:
        g = np.abs(g)
    f = fermi_vec((g - c_mu[p]) / T)
    factor[p] = np.where(up, f, 1.0 - f)

    out[:] = hbar_inv * amp * pos[grp] * factor[cls]
    return out


def uniformize_numpy(p, src, dst, rates, dt, tol, out, integral=None):
    """out = exp(L dt) p by uniformization; returns the number of series terms.

    When ``integral`` is given it receives the time integral of the
    populations over the step, from the same Poisson series.
    """
    n = p.shape[0]
    exit_ = np.bincount(src, weights=rates, minlength=n)
    nu = 1.1 * exit_.max() if exit_.size else 0.0
    if nu <= 0.0 or dt == 0.0:
        out[:] = p
        if integral is not None:
            integral[:] = p * dt
        return 0
    n_sub = max(1, int(math.ceil(nu * dt / MAX_POISSON_MEAN)))
    h = dt / n_sub
    lt = nu * h
    keep = 1.0 - exit_ / nu
    scaled = rates / nu
    kmax = int(lt + 20.0 * math.sqrt(lt) + 60)
    cur = p.copy()
    if integral is not None:
        integral[:] = 0.0
    terms = 0
    for _ in range(n_sub):
        w = math.exp(-lt)
        acc = w
        v = cur
        y = w * v
        z = (1.0 - acc) * v
        k = 0
        while acc < 1.0 - tol and k < kmax:
            k += 1
            v = keep * v + np.bincount(dst, weights=scaled * v[src], minlength=n)
            w *= lt / k
            y += w * v
            acc += w
            z += (1.0 - acc) * v
        cur = y / acc
        if integral is not None:
            integral += z / nu
        terms += k
    out[:] = cur
    return terms


def flux_increment_numpy(p_pre, p_post, src, rates, tags, dt):
    current = rates * 0.5 * (p_pre[src] + p_post[src]) * dt
    return current @ tags


def trajectory_numpy(p, x, normals, n_steps, sample_every, tol, rate_floor, flux_exact,
                     src, dst, amp, grp, g_anchor, g_decay, cls, c_kind, c_lam, c_d0, c_ds,
                     c_mu, c_uptake, tags, charge_sq, occ, T, absolute_gap, hbar_inv, x0, V_N, V_P,
                     U_w0, x_w, l_w, U_ch0, x_ch, l_ch, zeta, dt, samples, counters):
    rates = np.empty(src.shape[0])
    p_new = np.empty_like(p)
    integral = np.empty_like(p)
    p = p.copy()
    row = 0
    samples[row, 0] = 0.0
    samples[row, 1] = x
    samples[row, 2:10] = p @ occ
    samples[row, 10:13] = counters
    row += 1
    for step in range(1, n_steps + 1):
        V = _surface(x, x0, V_N, V_P)
        channel_rates_numpy(x, V, amp, grp, g_anchor, g_decay, cls, c_kind, c_lam, c_d0, c_ds,
                            c_mu, c_uptake, T, absolute_gap, hbar_inv, rates)
        live = rates >= rate_floor
        r = rates[live]
        s = src[live]
        uniformize_numpy(p, s, dst[live], r, dt, tol, p_new, integral if flux_exact else None)
        if flux_exact:
            counters += (r * integral[s]) @ tags[live]
        else:
            counters += flux_increment_numpy(p, p_new, s, r, tags[live], dt)
        p, p_new = p_new, p
        if abs(p.sum() - 1.0) > NORM_ABORT:
            return STATUS_NORM_DRIFT, step, x, p
        q_sq = float(p @ charge_sq)
        x = _langevin(x, q_sq, normals[step - 1], U_w0, x_w, l_w, U_ch0, x_ch, l_ch, zeta, T, dt)
        if step % sample_every == 0 or step == n_steps:
            samples[row, 0] = step * dt
            samples[row, 1] = x
            samples[row, 2:10] = p @ occ
            samples[row, 10:13] = counters
            row += 1
    return STATUS_OK, n_steps, x, p


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:
    _fermi_nb = njit(cache=True)(_fermi)
    _surface_nb = njit(cache=True)(_surface)

    @njit(cache=True)
    def _confine_grad_nb(x, U_w0, x_w, l_w):
        u1 = (x - x_w) / l_w
        u2 = (x + x_w) / l_w
        # s(1 - s) as s(u) s(-u) keeps the gradient exactly odd in x
        return U_w0 * (_fermi_nb(u1) * _fermi_nb(-u1) - _fermi_nb(u2) * _fermi_nb(-u2)) / l_w

    @njit(cache=True)
    def _barrier_grad_nb(x, U_ch0, x_ch, l_ch):
        u1 = (x - x_ch) / l_ch
        u2 = (x + x_ch) / l_ch
        return U_ch0 * (_fermi_nb(u2) * _fermi_nb(-u2) - _fermi_nb(u1) * _fermi_nb(-u1)) / l_ch

    @njit(cache=True)
    def _langevin_nb(x, q_sq, noise, U_w0, x_w, l_w, U_ch0, x_ch, l_ch, zeta, T, dt):
        force = -_confine_grad_nb(x, U_w0, x_w, l_w) - q_sq * _barrier_grad_nb(x, U_ch0, x_ch, l_ch)
        return x + dt / zeta * force + math.sqrt(2.0 * T / zeta * dt) * noise

    @njit(cache=True)
    def channel_rates_numba(x, V, amp, grp, g_anchor, g_decay, cls, c_kind, c_lam, c_d0, c_ds,
                            c_mu, c_uptake, T, absolute_gap, hbar_inv, out):
        pos = np.empty(g_anchor.shape[0])
        for g in range(g_anchor.shape[0]):
            pos[g] = math.exp(-abs(x - g_anchor[g]) / g_decay[g]) if g_decay[g] > 0.0 else 1.0
        factor = np.empty(c_kind.shape[0])
        for k in range(c_kind.shape[0]):
            gap = c_d0[k] + V * c_ds[k]
            if c_kind[k] == KIND_MARCUS:
                lm = c_lam[k]
                factor[k] = math.exp(-(lm + gap) * (lm + gap) / (4.0 * lm * T))
            elif c_kind[k] == KIND_PROTON:
                if not c_uptake[k]:
                    gap = -gap
                if absolute_gap:
                    gap = abs(gap)
                f = _fermi_nb((gap - c_mu[k]) / T)
                factor[k] = f if c_uptake[k] else 1.0 - f
            else:
                factor[k] = 1.0
        for c in range(amp.shape[0]):
            out[c] = hbar_inv * amp[c] * pos[grp[c]] * factor[cls[c]]
        return out

    @njit(cache=True)
    def _compact(rates, src, dst, rate_floor, n, rowptr, csrc, crate, cidx, exit_):
        # gather form grouped by destination, dropping channels below rate_floor
        counts = np.zeros(n + 1, dtype=np.int64)
        for i in range(n):
            exit_[i] = 0.0
        for c in range(rates.shape[0]):
            if rates[c] >= rate_floor:
                counts[dst[c] + 1] += 1
                exit_[src[c]] += rates[c]
        for i in range(n):
            counts[i + 1] += counts[i]
            rowptr[i] = counts[i]
        rowptr[n] = counts[n]
        for c in range(rates.shape[0]):
            if rates[c] >= rate_floor:
                k = counts[dst[c]]
                csrc[k] = src[c]
                crate[k] = rates[c]
                cidx[k] = c
                counts[dst[c]] += 1
        return rowptr[n]

    @njit(cache=True)
    def _uniformize_csr(p, rowptr, csrc, crate, exit_, dt, tol, out, integral, want_integral,
                        v, vnext):
        n = p.shape[0]
        nu = 0.0
        for i in range(n):
            if exit_[i] > nu:
                nu = exit_[i]
        nu *= 1.1
        if nu <= 0.0 or dt == 0.0:
            for i in range(n):
                out[i] = p[i]
                integral[i] = p[i] * dt
            return 0
        n_sub = max(1, int(math.ceil(nu * dt / MAX_POISSON_MEAN)))
        h = dt / n_sub
        lt = nu * h
        kmax = int(lt + 20.0 * math.sqrt(lt) + 60)
        inv_nu = 1.0 / nu
        terms = 0
        for i in range(n):
            out[i] = p[i]
            integral[i] = 0.0
        for _ in range(n_sub):
            w = math.exp(-lt)
            acc = w
            for i in range(n):
                v[i] = out[i]
                out[i] = w * v[i]
                if want_integral:
                    integral[i] += (1.0 - acc) * inv_nu * v[i]
            k = 0
            while acc < 1.0 - tol and k < kmax:
                k += 1
                w *= lt / k
                acc += w
                g = (1.0 - acc) * inv_nu
                for i in range(n):
                    s = (1.0 - exit_[i] * inv_nu) * v[i]
                    for q in range(rowptr[i], rowptr[i + 1]):
                        s += crate[q] * inv_nu * v[csrc[q]]
                    vnext[i] = s
                for i in range(n):
                    v[i] = vnext[i]
                    out[i] += w * v[i]
                    if want_integral:
                        integral[i] += g * v[i]
            for i in range(n):
                out[i] /= acc
            terms += k
        return terms

    @njit(cache=True)
    def flux_increment_numba(p_pre, p_post, src, rates, tags, dt):
        inc = np.zeros(tags.shape[1])
        for c in range(src.shape[0]):
            cur = rates[c] * 0.5 * (p_pre[src[c]] + p_post[src[c]]) * dt
            for t in range(tags.shape[1]):
                if tags[c, t] != 0.0:
                    inc[t] += tags[c, t] * cur
        return inc

    @njit(cache=True)
    def _record(samples, row, t, x, p, occ, counters):
        samples[row, 0] = t
        samples[row, 1] = x
        for s in range(8):
            acc = 0.0
            for i in range(p.shape[0]):
                acc += p[i] * occ[i, s]
            samples[row, 2 + s] = acc
        for t_ in range(3):
            samples[row, 10 + t_] = counters[t_]

    @njit(cache=True)
    def trajectory_numba(p, x, normals, n_steps, sample_every, tol, rate_floor, flux_exact,
                         src, dst, amp, grp, g_anchor, g_decay, cls, c_kind, c_lam, c_d0, c_ds,
                         c_mu, c_uptake, tags, charge_sq, occ, T, absolute_gap, hbar_inv,
                         x0, V_N, V_P,
                         U_w0, x_w, l_w, U_ch0, x_ch, l_ch, zeta, dt, samples, counters):
        n = p.shape[0]
        nc = src.shape[0]
        p = p.copy()
        p_new = np.empty(n)
        integral = np.empty(n)
        rates = np.empty(nc)
        rowptr = np.empty(n + 1, dtype=np.int64)
        csrc = np.empty(nc, dtype=np.int64)
        crate = np.empty(nc)
        cidx = np.empty(nc, dtype=np.int64)
        exit_ = np.empty(n)
        v = np.empty(n)
        vnext = np.empty(n)
        _record(samples, 0, 0.0, x, p, occ, counters)
        row = 1
        for step in range(1, n_steps + 1):
            V = _surface_nb(x, x0, V_N, V_P)
            channel_rates_numba(x, V, amp, grp, g_anchor, g_decay, cls, c_kind, c_lam, c_d0,
                                c_ds, c_mu, c_uptake, T, absolute_gap, hbar_inv, rates)
            nlive = _compact(rates, src, dst, rate_floor, n, rowptr, csrc, crate, cidx, exit_)
            _uniformize_csr(p, rowptr, csrc, crate, exit_, dt, tol, p_new, integral, flux_exact,
                            v, vnext)
            for q in range(nlive):
                c = cidx[q]
                i = csrc[q]
                if flux_exact:
                    cur = crate[q] * integral[i]
                else:
                    cur = crate[q] * 0.5 * (p[i] + p_new[i]) * dt
                for t_ in range(3):
                    if tags[c, t_] != 0.0:
                        counters[t_] += tags[c, t_] * cur
            total = 0.0
            q_sq = 0.0
            for i in range(n):
                p[i] = p_new[i]
                total += p[i]
                q_sq += p[i] * charge_sq[i]
            if abs(total - 1.0) > NORM_ABORT:
                return STATUS_NORM_DRIFT, step, x, p
            x = _langevin_nb(x, q_sq, normals[step - 1], U_w0, x_w, l_w, U_ch0, x_ch, l_ch,
                             zeta, T, dt)
            if step % sample_every == 0 or step == n_steps:
                _record(samples, row, step * dt, x, p, occ, counters)
                row += 1
        return STATUS_OK, n_steps, x, p
else:  # pragma: no cover
    channel_rates_numba = flux_increment_numba = trajectory_numba = None
    _compact = _uniformize_csr = None


def uniformize_numba(p, src, dst, rates, dt, tol, out, integral=None):
    """Numba twin of :func:`uniformize_numpy` (same signature and return)."""
    n = p.shape[0]
    nc = src.shape[0]
    rowptr = np.empty(n + 1, dtype=np.int64)
    csrc = np.empty(nc, dtype=np.int64)
    crate = np.empty(nc)
    cidx = np.empty(nc, dtype=np.int64)
    exit_ = np.empty(n)
    _compact(np.ascontiguousarray(rates, dtype=float), np.ascontiguousarray(src, dtype=np.int64),
             np.ascontiguousarray(dst, dtype=np.int64), 0.0, n, rowptr, csrc, crate, cidx, exit_)
    want = integral is not None
    buf = np.empty(n) if integral is None else integral
    return _uniformize_csr(p, rowptr, csrc, crate, exit_, float(dt), tol, out, buf, want,
                           np.empty(n), np.empty(n))


if USE_NUMBA:
    channel_rates = channel_rates_numba
    uniformize = uniformize_numba
    flux_increment = flux_increment_numba
    trajectory = trajectory_numba
else:
    channel_rates = channel_rates_numpy
    uniformize = uniformize_numpy
    flux_increment = flux_increment_numpy
    trajectory = trajectory_numpy

confine_grad = _confine_grad
barrier_grad = _barrier_grad
langevin = _langevin
