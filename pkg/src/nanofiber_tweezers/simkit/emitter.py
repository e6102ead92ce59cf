"""Single-atom resonance fluorescence as a ground-state-reset renewal process.

Between emissions the atom evolves under the non-Hermitian Hamiltonian

    dc/dt = M c,   M = [[0, -i W/2], [-i W/2, -g/2]]

with population decay rate ``g`` and Rabi frequency ``W``. The emission hazard
is ``g |c_e|^2`` and each emission resets the atom to the ground state. For
constant resonant drive the intensity correlation of this process is

    1 - exp(-3 g t / 4) (cos k t + 3 g / (4 k) sin k t),   k = sqrt(W^2 - g^2/16)

so choosing ``g = gamma`` and ``W = 2 Omega`` reproduces the measured-g2 model
with ``kappa = sqrt((2 Omega)^2 - (gamma/4)^2)``.
"""

from __future__ import annotations

import math

import numpy as np

from ..core import AtomSpec


def emitter_rates(atom: AtomSpec, saturation):
    """(decay rate, Rabi frequency) of the effective emitter for saturation ``s``."""
    s = np.asarray(saturation, dtype=float)
    if np.any(s < 0):
        raise ValueError("saturation must be >= 0")
    g = atom.gamma_transverse
    return g, 2.0 * atom.gamma_transverse * np.sqrt(s / 2.0)


def steady_state_rate(atom: AtomSpec, saturation):
    """Mean emission rate g W^2/4 / (W^2/2 + g^2/4) = (gamma/2) 4s / (1 + 4s)."""
    g, w = emitter_rates(atom, saturation)
    out = g * (w * w / 4) / (w * w / 2 + g * g / 4)
    return float(out) if np.ndim(out) == 0 else out


def _propagator_terms(g, w, t):
    """e^{-g t/4} cos(nu t) and e^{-g t/4} sin(nu t)/nu, stable for any sign of nu^2."""
    g = np.asarray(g, dtype=float)
    w = np.asarray(w, dtype=float)
    t = np.asarray(t, dtype=float)
    nu = np.sqrt((w * w / 4 - g * g / 16).astype(complex))
    lam_p = -g / 4 + 1j * nu
    lam_m = -g / 4 - 1j * nu
    ep, em = np.exp(lam_p * t), np.exp(lam_m * t)
    f1 = 0.5 * (ep + em)
    small = np.abs(nu * t) < 1e-4
    nu_safe = np.where(small, 1.0, nu)
    f2 = np.where(small, np.exp(-g * t / 4) * t * (1 - (nu * t) ** 2 / 6), (ep - em) / (2j * nu_safe))
    return f1, f2


def propagate(cg, ce, g, w, t):
    """Apply exp(M t) to the amplitude pair (cg, ce); arrays broadcast."""
    f1, f2 = _propagator_terms(g, w, t)
    a_gg, a_ge, a_ee = g / 4, -0.5j * w, -g / 4
    ng = f1 * cg + f2 * (a_gg * cg + a_ge * ce)
    ne = f1 * ce + f2 * (a_ge * cg + a_ee * ce)
    return ng, ne


def survival(cg, ce, g, w, t):
    """Probability of no emission during ``t`` starting from amplitudes (cg, ce)."""
    ng, ne = propagate(cg, ce, g, w, t)
    return np.abs(ng) ** 2 + np.abs(ne) ** 2


def waiting_time_density(atom: AtomSpec, saturation: float, t):
    """Density of the delay between consecutive emissions under constant drive."""
    g, w = emitter_rates(atom, saturation)
    _, ne = propagate(1.0 + 0j, 0j, g, w, np.asarray(t, dtype=float))
    return g * np.abs(ne) ** 2


def _bisect_times(target, cg, ce, g, w, hi, iterations=60):
    """Smallest t in [0, hi] with survival(t) <= target, vectorized."""
    lo = np.zeros_like(hi)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        done = survival(cg, ce, g, w, mid) <= target
        hi = np.where(done, mid, hi)
        lo = np.where(done, lo, mid)
    return 0.5 * (lo + hi)


def _solve_jump_times(target, cg, ce, g, w, hi, iterations=32):
    """Root of survival(t) = target on [0, hi] by bracketed Newton steps.

    Every fourth step bisects, which guarantees progress where the survival
    curve is flat.
    """
    lo = np.zeros_like(hi)
    t = 0.5 * hi
    for k in range(iterations):
        ng, ne = propagate(cg, ce, g, w, t)
        f = np.abs(ng) ** 2 + np.abs(ne) ** 2 - target
        dens = g * np.abs(ne) ** 2
        hi = np.where(f <= 0, t, hi)
        lo = np.where(f <= 0, lo, t)
        nt = t + f / np.maximum(dens, 1e-300)
        ok = (nt > lo) & (nt < hi) & (k % 4 != 3)
        t = np.where(ok, nt, 0.5 * (lo + hi))
    return t


def sample_waiting_times(atom: AtomSpec, saturation: float, n: int, rng: np.random.Generator,
                         table_size: int = 1 << 16):
    """``n`` i.i.d. inter-emission delays under constant drive.

    Inverse-CDF: the survival curve is tabulated once, inverted by linear
    interpolation and polished with two Newton steps clipped to the table cell.
    Draws beyond the tabulated tail fall back to bisection.
    """
    g, w = emitter_rates(atom, saturation)
    if w == 0 or n == 0:
        return np.full(n, np.inf) if n else np.empty(0)
    one, zero = 1.0 + 0j, 0j
    t_max = 8.0 / g
    while survival(one, zero, g, w, t_max) > 1e-14:
        t_max *= 2
    grid = np.linspace(0.0, t_max, table_size)
    surv = survival(one, zero, g, w, grid)
    # force strict monotonicity for the reversed interpolation
    surv = np.minimum.accumulate(surv)
    u = rng.random(n)
    t = np.interp(-u, -surv, grid)
    cell = np.clip(np.searchsorted(-surv, -u), 1, table_size - 1)
    lo, hi = grid[cell - 1], grid[cell]
    for _ in range(2):
        dens = waiting_time_density(atom, saturation, t)
        step = (survival(one, zero, g, w, t) - u) / np.maximum(dens, 1e-300)
        t = np.clip(t + step, lo, hi)
    tail = u < surv[-1]
    if tail.any():
        hi_t = np.full(int(tail.sum()), t_max)
        while True:
            bad = survival(one, zero, g, w, hi_t) > u[tail]
            if not bad.any():
                break
            hi_t = np.where(bad, 2 * hi_t, hi_t)
        t[tail] = _bisect_times(u[tail], one, zero, g, w, hi_t)
    return t


def sample_emissions(atom: AtomSpec, drive, duration: float, rng: np.random.Generator,
                     step: float | None = None, t0: float = 0.0):
    """Emission times in ``[t0, t0 + duration)``; the atom starts in the ground state.

    ``drive`` is a constant saturation or a callable ``s(t)``. A callable is
    held piecewise constant over ``step`` (default 0.1 us), so it must be
    smooth on that scale. Constant drive uses exact i.i.d. renewal intervals.
    """
    if not duration > 0:
        raise ValueError("duration must be > 0")
    if callable(drive):
        step = 0.1e-6 if step is None else step
        def sat(idx, t):
            return np.broadcast_to(np.asarray(drive(t), dtype=float), np.shape(t))
        return sample_emissions_batch(atom, sat, np.array([t0]), duration, rng, step=step)[0]
    s = float(drive)
    g, w = emitter_rates(atom, s)
    if w == 0:
        return np.empty(0)
    rate = steady_state_rate(atom, s)
    out = []
    t = t0
    end = t0 + duration
    while True:
        need = int(1.1 * rate * (end - t)) + 64
        gaps = sample_waiting_times(atom, s, need, rng)
        times = t + np.cumsum(gaps)
        keep = times < end
        out.append(times[keep])
        if not keep.all():
            break
        t = float(times[-1])
    return np.concatenate(out)


def sample_emissions_batch(atom: AtomSpec, saturation_of, starts, duration: float,
                           rng: np.random.Generator, step: float = 0.1e-6, budgets=None):
    """Emission times for many atoms under slowly varying drive.

    ``saturation_of(idx, t)`` returns the saturation seen by atoms ``idx`` at
    absolute times ``t`` (both of shape (k,)). The drive is held constant over each ``step``; within a
    step the evolution and the jump time are exact. An atom stops emitting
    once its count reaches ``budgets[i]`` (lost from the trap).
    Returns a list of arrays, one per atom.
    """
    starts = np.asarray(starts, dtype=float)
    n = starts.size
    g = atom.gamma_transverse
    budgets = np.full(n, np.iinfo(np.int64).max) if budgets is None else np.asarray(budgets)
    cg = np.ones(n, dtype=complex)
    ce = np.zeros(n, dtype=complex)
    # exponential clock: an emission fires when accumulated -ln(survival) reaches it
    clock = rng.exponential(size=n)
    counts = np.zeros(n, dtype=np.int64)
    events_atom, events_time = [], []
    n_steps = int(math.ceil(duration / step))
    alive = counts < budgets
    for k in range(n_steps):
        if not alive.any():
            break
        t_rel = k * step
        h = min(step, duration - t_rel)
        idx = np.nonzero(alive)[0]
        s = np.asarray(saturation_of(idx, starts[idx] + t_rel + 0.5 * h), dtype=float).reshape(-1)
        w = 2.0 * g * np.sqrt(s / 2.0)
        elapsed = np.zeros(idx.size)
        # several jumps may fall in one step; loop until every atom finishes the step
        active = np.ones(idx.size, dtype=bool)
        while active.any():
            a = np.nonzero(active)[0]
            ia = idx[a]
            rem = h - elapsed[a]
            surv = survival(cg[ia], ce[ia], g, w[a], rem)
            hazard = -np.log(np.maximum(surv, 1e-300))
            jump = hazard >= clock[ia]
            # no jump: advance to step end, renormalize, spend the clock
            nj = a[~jump]
            inj = idx[nj]
            if nj.size:
                ng, ne = propagate(cg[inj], ce[inj], g, w[nj], rem[~jump])
                norm = np.sqrt(np.abs(ng) ** 2 + np.abs(ne) ** 2)
                cg[inj], ce[inj] = ng / norm, ne / norm
                clock[inj] -= hazard[~jump]
                active[nj] = False
            jb = a[jump]
            if jb.size:
                ij = idx[jb]
                target = np.exp(-clock[ij])
                dt = _solve_jump_times(target, cg[ij], ce[ij], g, w[jb], rem[jump].copy())
                elapsed[jb] += dt
                events_atom.append(ij)
                events_time.append(starts[ij] + t_rel + elapsed[jb])
                counts[ij] += 1
                cg[ij], ce[ij] = 1.0, 0.0
                clock[ij] = rng.exponential(size=ij.size)
                lost = counts[ij] >= budgets[ij]
                active[jb[lost]] = False
                alive[ij[lost]] = False
    out = [np.empty(0) for _ in range(n)]
    if events_atom:
        ea = np.concatenate(events_atom)
        et = np.concatenate(events_time)
        order = np.lexsort((et, ea))
        ea, et = ea[order], et[order]
        bounds = np.searchsorted(ea, np.arange(n + 1))
        out = [et[bounds[i]:bounds[i + 1]] for i in range(n)]
    return out
