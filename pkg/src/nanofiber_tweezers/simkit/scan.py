"""Scanned-beam fluorescence readout of the loaded array.

Seeding rule: ``SeedSequence(config.seed).spawn(n_scans)[k]`` drives scan
``k``; inside a scan, a fixed sequence of draws (occupancy, dark loss, photon
budgets, emissions, detection, background) is consumed in that order.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..core import AtomSpec
from .config import ExperimentConfig
from .emitter import sample_emissions_batch, sample_waiting_times
from .ttag import TimeTagStream

# emission is followed out to this many spot radii on either side of the site
_WINDOW_RADII = 3.0


def scan_rngs(seed: int, n_scans: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_scans)]


def sample_occupancy(config: ExperimentConfig, rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli(w) per site, at most one atom each."""
    return rng.random(config.n_sites) < config.fill_probability


def saturation_profile(config: ExperimentConfig, centers, t):
    """Local saturation at time ``t`` for atoms whose sites the beam crosses at ``centers``."""
    x = config.scan_speed * (np.asarray(t) - np.asarray(centers))
    return config.saturation * np.exp(-2.0 * x * x / config.spot_waist ** 2)


@dataclass
class ScanResult:
    stream: TimeTagStream
    occupancy: np.ndarray
    emitted: np.ndarray  # photons emitted per site
    lost_at: np.ndarray  # time of loss (s), inf if the atom survived the pass


def _add_photons(times, eta, rng):
    keep = rng.random(times.size) < eta
    t = times[keep]
    return t, rng.integers(0, 2, size=t.size)


def simulate_scan(config: ExperimentConfig, occupancy, rng: np.random.Generator,
                  atom: AtomSpec | None = None, t_offset: float = 0.0) -> ScanResult:
    """One pass of the excitation beam across all sites.

    Each atom emits as a driven two-level renewal process under the Gaussian
    spot and is lost once it has emitted its photon budget (Poisson with mean
    ``interaction_loss_constant``), or before the pass by dark loss.
    """
    atom = AtomSpec.cesium_d2() if atom is None else atom
    cfg = config.resolved(atom)
    occupancy = np.asarray(occupancy, dtype=bool)
    if occupancy.shape != (cfg.n_sites,):
        raise ValueError(f"occupancy must have length {cfg.n_sites}")
    sites = np.nonzero(occupancy)[0]
    centers = cfg.site_center_time(sites)
    survives = rng.random(sites.size) < np.exp(-centers / cfg.trap_lifetime)
    sites, centers = sites[survives], centers[survives]
    budgets = rng.poisson(cfg.interaction_loss_constant, size=sites.size)

    half = _WINDOW_RADII * cfg.spot_waist / cfg.scan_speed
    starts = centers - half
    emissions = sample_emissions_batch(
        atom, lambda idx, t: saturation_profile(cfg, centers[idx], t), starts, 2 * half, rng,
        step=cfg.step, budgets=budgets) if sites.size else []

    emitted = np.zeros(cfg.n_sites, dtype=np.int64)
    lost_at = np.full(cfg.n_sites, np.inf)
    for k, (site, times) in enumerate(zip(sites, emissions)):
        emitted[site] = times.size
        if times.size >= budgets[k]:
            lost_at[site] = times[-1] if times.size else starts[k]
    all_em = np.concatenate(emissions) if len(emissions) else np.empty(0)

    t_sig, ch_sig = _add_photons(all_em, cfg.detection_efficiency, rng)
    # burst-correlated stray light, uncorrelated with the emitter's internal state
    spawn = rng.random(all_em.size) < cfg.correlated_background * cfg.detection_efficiency
    t_cor = all_em[spawn] + rng.uniform(-cfg.correlated_window, cfg.correlated_window, size=int(spawn.sum()))
    ch_cor = rng.integers(0, 2, size=t_cor.size)
    n_bg = rng.poisson(2 * cfg.background_rate * cfg.scan_period)
    t_bg = rng.uniform(0.0, cfg.scan_period, size=n_bg)
    ch_bg = rng.integers(0, 2, size=n_bg)

    t = np.concatenate([t_sig, t_cor, t_bg])
    ch = np.concatenate([ch_sig, ch_cor, ch_bg])
    inside = (t >= 0) & (t < cfg.scan_period)
    stream = TimeTagStream.from_times(ch[inside], t[inside] + t_offset, cfg.time_resolution)
    return ScanResult(stream=stream, occupancy=occupancy, emitted=emitted, lost_at=lost_at)


@dataclass
class ExperimentRun:
    stream: TimeTagStream
    occupancy: np.ndarray  # (n_scans, n_sites)
    emitted: np.ndarray  # (n_scans, n_sites)
    config: ExperimentConfig


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("ETL_THREADS", "1")))
    except ValueError:
        return 1


def simulate_experiment(config: ExperimentConfig, atom: AtomSpec | None = None,
                        threads: int | None = None) -> ExperimentRun:
    """All scans of a run; scan ``k`` starts at ``k * scan_period`` and loads afresh."""
    cfg = config.resolved(atom)
    rngs = scan_rngs(cfg.seed, cfg.n_scans)

    def one(k):
        rng = rngs[k]
        occ = sample_occupancy(cfg, rng)
        return simulate_scan(cfg, occ, rng, atom, t_offset=k * cfg.scan_period)

    threads = _threads() if threads is None else threads
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, range(cfg.n_scans)))
    else:
        results = [one(k) for k in range(cfg.n_scans)]
    meta = {"config_hash": cfg.config_hash(), "n_scans": cfg.n_scans,
            "duration": cfg.n_scans * cfg.scan_period}
    stream = TimeTagStream.merge([r.stream for r in results], meta)
    return ExperimentRun(stream=stream, occupancy=np.array([r.occupancy for r in results]),
                         emitted=np.array([r.emitted for r in results]), config=cfg)


def simulate_stationary(atom: AtomSpec, saturation: float, n_emissions: int,
                        rng: np.random.Generator, detection_efficiency: float = 1.0,
                        background_fraction: float = 0.0, resolution: float = 0.8e-9) -> TimeTagStream:
    """Continuously driven single atom watched by two detectors behind a 50/50 splitter.

    Uncorrelated background arrives at ``background_fraction`` times the
    detected signal rate, split evenly between the channels.
    """
    if n_emissions < 1:
        raise ValueError("n_emissions must be >= 1")

    em = np.cumsum(sample_waiting_times(atom, saturation, n_emissions, rng))
    duration = float(em[-1])
    t_sig, ch_sig = _add_photons(em, detection_efficiency, rng)
    n_bg = rng.poisson(background_fraction * detection_efficiency * n_emissions)
    t_bg = rng.uniform(0.0, duration, size=n_bg)
    ch_bg = rng.integers(0, 2, size=n_bg)
    meta = {"duration": duration, "saturation": saturation, "n_emissions": n_emissions}
    return TimeTagStream.from_times(np.concatenate([ch_sig, ch_bg]), np.concatenate([t_sig, t_bg]),
                                    resolution, meta)
