import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from nanofiber_tweezers.core import AtomSpec, from_2pi_mhz, rabi_from_saturation, to_2pi_mhz
from nanofiber_tweezers.inference import g2
from nanofiber_tweezers.simkit.config import correlated_fraction_for_g2zero
from nanofiber_tweezers.simkit.scan import simulate_stationary
from nanofiber_tweezers.simkit.ttag import TimeTagStream

GAMMA = from_2pi_mhz(2.61)
OMEGA = from_2pi_mhz(1.85)
# mpmath: sqrt((2 x 1.85)^2 - (2.61 / 4)^2)
ORACLE_KAPPA_2PI_MHZ = 3.64201094863813


def test_kappa_oracle():
    assert to_2pi_mhz(g2.kappa(GAMMA, OMEGA)) == pytest.approx(ORACLE_KAPPA_2PI_MHZ, rel=1e-13)


def test_overdamped_rejected():
    with pytest.raises(g2.UnsupportedRegimeError):
        g2.kappa(GAMMA, GAMMA / 10)


@given(st.floats(0, 1), st.floats(-2e-6, 2e-6), st.floats(0.2, 20))
def test_theory_even_and_bounded(delta, tau, s):
    omega = rabi_from_saturation(s, GAMMA)
    a, b = g2.g2_theory(GAMMA, omega, delta, [tau, -tau])
    assert a == b
    assert a <= (1 - delta) * 2 + delta + 1e-12
    assert g2.g2_theory(GAMMA, omega, delta, [0.0])[0] == pytest.approx(delta, abs=1e-15)


raws = hnp.arrays(np.float64, 41, elements=st.floats(1, 1e5))


@given(raws)
def test_normalization_idempotent(raw):
    tau = np.arange(-20, 21) * 50e-9
    once = g2.normalize_g2(tau, raw, (500e-9, 800e-9), min_counts=0)
    twice = g2.normalize_g2(tau, once.g2_normalized, (500e-9, 800e-9), min_counts=0)
    assert np.allclose(twice.g2_normalized, once.g2_normalized, rtol=1e-13)
    sel = (np.abs(tau) > 500e-9) & (np.abs(tau) < 800e-9)
    assert once.g2_normalized[sel].mean() == pytest.approx(1.0, rel=1e-13)


tag_sets = st.integers(1, 200).flatmap(lambda n: st.tuples(
    hnp.arrays(np.int64, n, elements=st.integers(0, 5000)), hnp.arrays(np.int64, n, elements=st.integers(0, 5000))))


@given(tag_sets)
def test_histogram_even_under_channel_swap(pair):
    t0, t1 = np.sort(pair[0]), np.sort(pair[1])
    ch = np.r_[np.zeros(t0.size), np.ones(t1.size)]
    ts = np.r_[t0, t1]
    o = np.lexsort((ch, ts))
    s = TimeTagStream(ch[o], ts[o], 1e-9)
    sw = TimeTagStream(1 - ch[o], ts[o], 1e-9)
    h, hs = g2.coincidence_histogram(s, 3e-9, 300e-9), g2.coincidence_histogram(sw, 3e-9, 300e-9)
    assert np.array_equal(h.counts, hs.counts[::-1])
    # brute force over all pairs
    d = t1[None, :] - t0[:, None]
    idx = np.floor_divide(d + 1, 3) + 100
    ok = (idx >= 0) & (idx <= 200)
    assert np.array_equal(h.counts, np.bincount(idx[ok], minlength=201))


@given(hnp.arrays(np.int64, 2 * 60 + 1, elements=st.integers(0, 1000)), st.sampled_from([1, 3, 5, 7]))
def test_rebin_conserves_counts(counts, factor):
    h = g2.CoincidenceHistogram(np.arange(-60, 61) * 1e-9, counts, 1e-9)
    r = g2.rebin(h, factor)
    m = r.counts.size // 2
    covered = counts[60 - (2 * m + 1) * factor // 2: 60 + (2 * m + 1) * factor // 2 + 1]
    assert r.counts.sum() == covered.sum()
    assert r.tau[m] == 0.0


def test_histogram_errors():
    one = TimeTagStream(np.zeros(3), np.arange(3), 1e-9)
    with pytest.raises(ValueError):
        g2.coincidence_histogram(one, 1e-9, 10e-9)
    both = TimeTagStream(np.array([0, 1]), np.array([0, 1]), 1e-9)
    with pytest.raises(ValueError):
        g2.coincidence_histogram(both, 1.5e-9, 10e-9)
    empty = TimeTagStream(np.empty(0), np.empty(0), 1e-9)
    assert g2.coincidence_histogram(empty, 1e-9, 10e-9).counts.sum() == 0
    with pytest.raises(g2.InsufficientDataError):
        g2.g2_from_stream(both, 0.8e-9 / 0.8, 1e-6)


@pytest.fixture(scope="module")
def stationary():
    atom = AtomSpec.cesium_d2()
    xi = correlated_fraction_for_g2zero(0.26)
    return simulate_stationary(atom, 1.0, 1_000_000, np.random.default_rng(0), background_fraction=xi)


def test_empirical_g2_converges_to_theory(stationary):
    # per-bin Poisson noise at 0.8 ns is ~0.03, so compare at 4 ns against the bin-averaged theory
    atom = AtomSpec.cesium_d2()
    h = g2.rebin(g2.coincidence_histogram(stationary, 0.8e-9, 1.2e-6), 5)
    res = g2.normalize_g2(h.tau, h.counts)
    omega = rabi_from_saturation(1.0, atom.gamma_transverse)
    # the effective emitter has Rabi frequency 2 Omega, hence the closure at kappa(gamma, Omega)
    fine = np.linspace(-0.5, 0.5, 41)
    theory = np.array([g2.g2_theory(atom.gamma_transverse, omega, 0.26, t + fine * h.bin_width).mean()
                       for t in res.tau_bins])
    sel = np.abs(res.tau_bins) <= 1e-6
    assert np.max(np.abs(res.g2_normalized[sel] - theory[sel])) < 0.05


def test_fit_recovers_kappa(stationary):
    atom = AtomSpec.cesium_d2()
    fit = g2.fit_g2_kappa(g2.g2_from_stream(stationary), atom.gamma_transverse)
    expect = g2.kappa(atom.gamma_transverse, rabi_from_saturation(1.0, atom.gamma_transverse))
    assert fit.kappa == pytest.approx(expect, rel=0.03)
    assert fit.delta_bg == pytest.approx(0.26, abs=0.03)
    assert math.isfinite(fit.kappa_stderr)
