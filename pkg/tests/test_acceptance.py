"""Acceptance checks, one per criterion.

Each check returns (passed, detail) and prints a single PASS/FAIL line.
Run directly with ``python tests/test_acceptance.py`` for the summary alone.
"""

import math
import sys
import time
from dataclasses import replace

import numpy as np
import pytest

from nanofiber_tweezers import coupling, holography, trapfield
from nanofiber_tweezers.core import AtomSpec, from_2pi_mhz, to_2pi_mhz
from nanofiber_tweezers.inference import decay, g2, mixture
from nanofiber_tweezers.simkit import od as odsim
from nanofiber_tweezers.simkit.config import ExperimentConfig, correlated_fraction_for_g2zero
from nanofiber_tweezers.simkit.scan import simulate_experiment, simulate_stationary
from nanofiber_tweezers.simkit.ttag import TimeTagStream, from_ttag_bytes, to_ttag_bytes


def timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def check_kappa():
    gamma, omega = from_2pi_mhz(2.61), from_2pi_mhz(1.85)
    g2.g2_theory(gamma, omega, 0.0, [0.0])
    t0 = time.perf_counter()
    k = g2.kappa(gamma, omega)
    dt = time.perf_counter() - t0
    k_mhz = to_2pi_mhz(k)
    ok = abs(k_mhz / 3.642 - 1) < 0.005 and abs(k_mhz / 3.64 - 1) < 0.005 and dt < 1e-3
    return ok, f"kappa = 2pi x {k_mhz:.4f} MHz, {dt * 1e6:.1f} us"


def check_antibunching():
    def go():
        atom = AtomSpec.cesium_d2()
        stream = simulate_stationary(atom, 1.0, 1_000_000, np.random.default_rng(0),
                                     background_fraction=correlated_fraction_for_g2zero(0.26))
        return g2.g2_from_stream(stream)
    res, dt = timed(go)
    sel = (np.abs(res.tau_bins) > res.ref_window[0]) & (np.abs(res.tau_bins) < res.ref_window[1])
    ref_mean = float(res.g2_normalized[sel].mean())
    ok = abs(res.g2_zero() - 0.26) <= 0.03 and abs(ref_mean - 1.0) < 1e-12 and dt < 60
    return ok, f"g2(0) = {res.g2_zero():.3f}, ref-window mean = {ref_mean:.15f}, {dt:.1f} s"


def check_atom_counting():
    def go():
        counts = mixture.sample_mixture_counts(0.775, 1.22, 0.0137, (31000, 200), np.random.default_rng(0))
        return counts, mixture.fit_poisson_mixture(mixture.count_histogram(counts), 0.0137, 200)
    (counts, fit), dt = timed(go)
    p0 = replace(fit, w=0.775, mu_a=1.22).zero_fraction()
    report = {**fit.report(), "note": f"closed-form zero fraction {p0:.3f} vs 44.3% observed"}
    ok = (abs(fit.w / 0.775 - 1) < 0.02 and abs(fit.mu_a / 1.22 - 1) < 0.02 and abs(fit.n_est - 155) <= 3
          and round(p0, 3) == 0.451 and "44.3%" in report["note"] and dt < 30)
    return ok, (f"w = {fit.w:.4f}, mu_a = {fit.mu_a:.4f}, n_est = {fit.n_est}, "
                f"{report['note']}, {dt:.1f} s")


def check_lower_bound():
    mixture.lower_bound_atoms(0.5, 0.9, 10)
    n, dt = timed(lambda: mixture.lower_bound_atoms(0.443, 0.985, 200))
    return n == 108 and dt < 1e-3, f"lower bound = {n}, {dt * 1e6:.1f} us"


def check_decay_rows():
    t = np.arange(1, 501) * 1e-3
    noise = odsim.ProbeNoise()

    def go():
        worst_clean = worst_noisy = 0.0
        for power in odsim.REFERENCE_DECAY_ROWS:
            p = odsim.reference_decay_params(power)
            order = 2 if p.n1 > 0 else 1
            truth = [p.n2, p.tau2] + ([p.n1, p.tau1] if order == 2 else [])
            for trace, kind in ((odsim.simulate_od_decay(p, t), "clean"),
                                (odsim.simulate_od_decay(p, t, noise, np.random.default_rng(0)), "noisy")):
                fit = decay.fit_od_decay(trace.times, trace.od_values, model_order=order)
                got = [fit.n2, fit.tau2] + ([fit.n1, fit.tau1] if order == 2 else [])
                err = max(abs(a / b - 1) for a, b in zip(got, truth))
                if kind == "clean":
                    worst_clean = max(worst_clean, err)
                else:
                    worst_noisy = max(worst_noisy, err)
        return worst_clean, worst_noisy
    (clean, noisy), dt = timed(go)
    ok = clean < 0.01 and noisy < 0.10 and dt < 10
    return ok, f"worst rel. error noiseless {clean:.1e}, noisy {noisy:.3f}, {dt:.2f} s"


def check_lifetimes():
    t = np.arange(1, 1001) * 1e-3

    def go():
        out = []
        for k, tau in enumerate((0.26, 0.46)):
            trace = odsim.simulate_od_decay(odsim.DecayParams(n2=100, tau2=tau), t, odsim.ProbeNoise(),
                                            np.random.default_rng(k))
            out.append(decay.fit_od_decay(trace.times, trace.od_values, model_order=1).tau2)
        return out
    (a, b), dt = timed(go)
    ok = abs(a / 0.26 - 1) < 0.02 and abs(b / 0.46 - 1) < 0.02 and dt < 5
    return ok, f"tau = {a:.4f} s and {b:.4f} s, {dt:.2f} s"


def check_trap_geometry():
    refl = trapfield.SurfaceReflection()

    def go():
        beam = trapfield.TweezerBeamSpec(power=1.5e-3)
        low = trapfield.find_trap_sites(trapfield.potential_profile(beam, refl))
        high = trapfield.find_trap_sites(trapfield.potential_profile(replace(beam, power=2.0e-3), refl))
        onset = trapfield.first_site_onset_power(beam, refl, grid=trapfield.default_grid(step=1e-9))
        return low, high, onset
    (low, high, onset), dt = timed(go)
    first = low[0].position if low else math.nan
    near = [s.position for s in high if s.position < 400e-9]
    ok = (abs(first - 671e-9) <= 10e-9 and all(s.position > 400e-9 for s in low) and bool(near)
          and 1.51e-3 < onset < 1.75e-3 and dt < 1)
    extra = f"{near[0] * 1e9:.0f} nm" if near else "none"
    return ok, (f"first site {first * 1e9:.1f} nm at 1.5 mW, near-surface site at 2 mW: {extra}, "
                f"onset {onset * 1e3:.3f} mW, {dt:.2f} s")


def check_coupling_map():
    def go():
        model = coupling.default_model()
        return model, coupling.beta_at(model, 190e-9), coupling.beta_at(model, 671e-9)
    (model, b190, b671), dt = timed(go)
    log_ratio = math.log(b190 / b671)
    q_ratio = 2 * model.mode.q_decay * (671e-9 - 190e-9)
    ratio_ok = abs(log_ratio / q_ratio - 1) <= 0.10
    ok = abs(b671 - 0.006) < 1e-15 and 0.053 / 1.5 <= b190 <= 0.053 * 1.5 and ratio_ok and dt < 1
    return ok, (f"beta(671) = {b671:.6f}, beta(190) = {b190:.4f}, ln-ratio {log_ratio:.3f} "
                f"vs 2q dd {q_ratio:.3f} ({'within' if ratio_ok else 'outside'} 10%), {dt:.2f} s")


def check_beta_extraction():
    d0, beta = decay.estimate_beta(1.2, 155)
    rep = decay.beta_report(1.2, 155)
    ok = (d0 == 1.2 / 155 and beta == 1.2 / 310 and round(d0, 5) == 0.00774 and round(beta, 5) == 0.00387
          and round(beta * 100, 2) == 0.39 and any("typo" in n for n in rep.notes))
    return ok, f"d0 = {d0:.5f}, beta = {beta:.5f}, typo note: {bool(rep.notes)}"


def check_holography():
    def go():
        return holography.wgs_solve(holography.linear_array_problem(iterations=100))
    sol, dt = timed(go)
    rng = np.random.default_rng(0)
    f = np.exp(1j * sol.phase) * rng.uniform(0.5, 1.5, sol.phase.shape)
    e = np.sum(np.abs(f) ** 2)
    fwd = np.sum(np.abs(holography.forward(f)) ** 2)
    back = np.sum(np.abs(holography.backward(holography.forward(f))) ** 2)
    cons = max(abs(fwd / e - 1), abs(back / e - 1))
    ok = sol.uniformity_error < 0.01 and sol.iterations_run <= 100 and cons < 1e-10 and dt < 30
    return ok, (f"uniformity {sol.uniformity_error:.4f} after {sol.iterations_run} iterations, "
                f"energy error {cons:.1e}, {dt:.1f} s")


def _fd_ok(f, jac, p):
    p = np.asarray(p, dtype=float)
    ana = jac(p)
    for i in range(p.size):
        h = 1e-6 * abs(p[i])
        up, dn = p.copy(), p.copy()
        up[i] += h
        dn[i] -= h
        num = (f(up) - f(dn)) / (2 * h)
        if np.max(np.abs(num - ana[:, i])) > 1e-6 * np.max(np.abs(ana[:, i])):
            return False
    return True


def check_properties():
    rng = np.random.default_rng(11)
    results = {}

    t = np.arange(1, 501) * 1e-3
    d = np.linspace(-5, 5, 41)
    grad = True
    for _ in range(20):
        p = [rng.uniform(1, 10), rng.uniform(0.01, 0.04), rng.uniform(20, 150), rng.uniform(0.08, 0.4)]
        grad &= _fd_ok(lambda q: decay.decay_model(q, t, 0.053, 0.006, 2),
                       lambda q: decay.decay_jacobian(q, t, 0.053, 0.006, 2), p)
        s = [rng.uniform(0.2, 3), rng.uniform(-1, 1), rng.uniform(0.5, 2)]
        grad &= _fd_ok(lambda q: np.exp(-q[0] / (1 + (2 * (d - q[1]) / q[2]) ** 2)),
                       lambda q: decay.spectrum_jacobian(q, d), s)
    results["gradients"] = grad

    ch = rng.integers(0, 2, 5000)
    ts = np.sort(rng.integers(0, 2 ** 40, 5000))
    b = to_ttag_bytes(TimeTagStream(ch, ts, 0.8e-9))
    results["ttag round trip"] = to_ttag_bytes(from_ttag_bytes(b)) == b

    cfg = ExperimentConfig(n_sites=30, n_scans=2, seed=123)
    results["seed determinism"] = (to_ttag_bytes(simulate_experiment(cfg).stream)
                                   == to_ttag_bytes(simulate_experiment(cfg).stream))

    gamma, omega = from_2pi_mhz(2.61), from_2pi_mhz(1.85)
    taus = rng.uniform(0, 2e-6, 200)
    even = np.array_equal(g2.g2_theory(gamma, omega, 0.26, taus), g2.g2_theory(gamma, omega, 0.26, -taus))
    t0 = np.sort(rng.integers(0, 100_000, 3000))
    t1 = np.sort(rng.integers(0, 100_000, 3000))
    chs = np.r_[np.zeros(3000), np.ones(3000)]
    tts = np.r_[t0, t1]
    o = np.lexsort((chs, tts))
    h = g2.coincidence_histogram(TimeTagStream(chs[o], tts[o], 1e-9), 5e-9, 1e-6)
    hs = g2.coincidence_histogram(TimeTagStream(1 - chs[o], tts[o], 1e-9), 5e-9, 1e-6)
    results["g2 evenness"] = even and np.array_equal(h.counts, hs.counts[::-1])

    once = g2.normalize_g2(h.tau, h.counts, min_counts=0)
    twice = g2.normalize_g2(h.tau, once.g2_normalized, min_counts=0)
    results["idempotent normalization"] = np.allclose(twice.g2_normalized, once.g2_normalized, rtol=1e-13)

    hist = mixture.count_histogram(mixture.sample_mixture_counts(0.775, 1.22, 0.0137, (3000, 200), rng))
    a = mixture.fit_poisson_mixture(hist, 0.0137, 200)
    equi = True
    for k in (2, 7, 31):
        bk = mixture.fit_poisson_mixture(hist * k, 0.0137, 200)
        equi &= abs(bk.w / a.w - 1) < 1e-9 and abs(bk.mu_a / a.mu_a - 1) < 1e-9
    results["mixture scaling equivariance"] = equi

    failed = [k for k, v in results.items() if not v]
    return not failed, "all green" if not failed else "failed: " + ", ".join(failed)


CRITERIA = [
    (1, "kappa formula", check_kappa),
    (2, "antibunching closure", check_antibunching),
    (3, "atom counting", check_atom_counting),
    (4, "lower bound", check_lower_bound),
    (5, "decay-table fits", check_decay_rows),
    (6, "lifetimes", check_lifetimes),
    (7, "trap geometry", check_trap_geometry),
    (8, "coupling map", check_coupling_map),
    (9, "beta extraction", check_beta_extraction),
    (10, "holography", check_holography),
    (11, "property suites", check_properties),
]


def _line(num, name, ok, detail):
    return f"CRITERION {num:2d} {name:22s} {'PASS' if ok else 'FAIL'}  {detail}"


@pytest.mark.parametrize("num,name,check", CRITERIA, ids=[f"criterion{n:02d}" for n, _, _ in CRITERIA])
def test_criterion(num, name, check, capsys):
    ok, detail = check()
    with capsys.disabled():
        print("\n" + _line(num, name, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    failures = 0
    for num, name, check in CRITERIA:
        ok, detail = check()
        failures += not ok
        print(_line(num, name, ok, detail), flush=True)
    sys.exit(1 if failures else 0)
