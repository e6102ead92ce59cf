import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from nanofiber_tweezers.core import AtomSpec
from nanofiber_tweezers.inference.mixture import site_counts
from nanofiber_tweezers.simkit import config as sc
from nanofiber_tweezers.simkit import scan
from nanofiber_tweezers.simkit.ttag import to_ttag_bytes

ATOM = AtomSpec.cesium_d2()
SMALL = sc.ExperimentConfig(n_sites=40, n_scans=3, seed=11)


@pytest.fixture(scope="module")
def run():
    return scan.simulate_experiment(sc.ExperimentConfig(n_scans=10, seed=2))


def test_calibration_constants():
    cfg = sc.ExperimentConfig().resolved()
    assert cfg.interaction_loss_constant == pytest.approx(4e-6 * 0.4 * ATOM.gamma_transverse, rel=1e-12)
    xi = cfg.correlated_background
    assert 1 - (1 / (1 + xi)) ** 2 == pytest.approx(0.26, rel=1e-12)
    mu_b = 2 * cfg.background_rate * cfg.site_period
    assert mu_b == pytest.approx(0.0137, rel=1e-12)
    assert (1 + xi) * cfg.detection_efficiency * cfg.interaction_loss_constant + mu_b == pytest.approx(1.22)
    assert cfg.transit_time == pytest.approx(200e-6)


def test_bit_identical_reruns():
    a = scan.simulate_experiment(SMALL).stream
    b = scan.simulate_experiment(SMALL).stream
    assert to_ttag_bytes(a) == to_ttag_bytes(b)
    c = scan.simulate_experiment(replace(SMALL, seed=12)).stream
    assert to_ttag_bytes(a) != to_ttag_bytes(c)


def test_threads_do_not_change_output():
    a = scan.simulate_experiment(SMALL, threads=1).stream
    b = scan.simulate_experiment(SMALL, threads=3).stream
    assert to_ttag_bytes(a) == to_ttag_bytes(b)


def test_channel_symmetry(run):
    n0 = int(np.sum(run.stream.channels == 0))
    n = len(run.stream)
    assert stats.binomtest(n0, n, 0.5).pvalue > 1e-3


def test_counts_per_occupied_site(run):
    cfg = run.config
    counts = site_counts(run.stream, cfg.n_sites, cfg.site_period, cfg.n_scans)
    occ = run.occupancy
    assert counts[occ].mean() == pytest.approx(1.22, abs=0.08)
    assert counts[~occ].mean() == pytest.approx(0.0137, abs=0.02)
    # every loaded atom spends its whole budget before the beam leaves
    assert np.all(run.emitted[~occ] == 0)


def test_stream_in_range(run):
    t = run.stream.seconds()
    assert t.min() >= 0 and t.max() < run.config.n_scans * run.config.scan_period
    assert run.stream.metadata["n_scans"] == 10


def test_finite_lifetime_depletes_late_sites():
    cfg = replace(SMALL, n_sites=200, trap_lifetime=100e-3, fill_probability=1.0, n_scans=1)
    res = scan.simulate_scan(cfg, np.ones(200, bool), np.random.default_rng(0))
    early, late = res.emitted[:50].astype(bool).mean(), res.emitted[150:].astype(bool).mean()
    # survival exp(-t/tau): about 0.88 over the first quarter, 0.42 over the last
    assert early > 0.75 and late < 0.55


def test_stationary_stream_rate():
    s = scan.simulate_stationary(ATOM, 1.0, 100_000, np.random.default_rng(0))
    assert len(s) / s.metadata["duration"] == pytest.approx(0.4 * ATOM.gamma_transverse, rel=0.01)


def test_config_validation():
    for bad in ({"fill_probability": 1.5}, {"n_sites": 0}, {"pitch": 0.0}, {"detection_efficiency": 2.0},
                {"seed": -1}):
        with pytest.raises(ValueError):
            sc.ExperimentConfig(**bad)
    with pytest.raises(ValueError):
        sc.correlated_fraction_for_g2zero(1.0)
    with pytest.raises(ValueError):
        sc.efficiency_for_counts(1.0, 0.0, mean_counts=0.01)
    assert math.isfinite(float(sc.ExperimentConfig(saturation=0.0).resolved().detection_efficiency))
