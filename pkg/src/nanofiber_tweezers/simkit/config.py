"""Experiment parameters for the synthetic scan and their calibration rules."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields

from ..core import AtomSpec
from .emitter import steady_state_rate

# calibration targets of the default configuration
BURST_DURATION = 4e-6
MEAN_COUNTS_OCCUPIED = 1.22
G2_ZERO_TARGET = 0.26
BACKGROUND_MEAN_PER_SITE = 0.0137


def budget_for_burst(atom: AtomSpec, saturation: float, burst: float = BURST_DURATION) -> float:
    """Mean photon budget that lasts ``burst`` seconds at the peak emission rate."""
    return burst * steady_state_rate(atom, saturation)


def correlated_fraction_for_g2zero(g2_zero: float = G2_ZERO_TARGET) -> float:
    """Extra uncorrelated photons per signal photon that lift g2(0) from 0 to ``g2_zero``.

    With signal fraction rho of all counts, g2(0) = 1 - rho^2.
    """
    if not 0.0 <= g2_zero < 1.0:
        raise ValueError("g2(0) target must lie in [0, 1)")
    return 1.0 / math.sqrt(1.0 - g2_zero) - 1.0


def efficiency_for_counts(budget: float, correlated_fraction: float,
                          mean_counts: float = MEAN_COUNTS_OCCUPIED,
                          background_mean: float = BACKGROUND_MEAN_PER_SITE) -> float:
    """Detection efficiency giving ``mean_counts`` per occupied site window (background included)."""
    signal = mean_counts - background_mean
    if not signal > 0 or not budget > 0:
        raise ValueError("mean counts must exceed the background mean and budget must be > 0")
    eta = signal / ((1.0 + correlated_fraction) * budget)
    if eta > 1.0:
        raise ValueError(f"required detection efficiency {eta:.3f} exceeds 1")
    return eta


@dataclass(frozen=True)
class ExperimentConfig:
    n_sites: int = 200
    pitch: float = 5e-6
    fill_probability: float = 0.775
    scan_speed: float = 0.01
    # 1/e^2 intensity radius; 2 um diameter spot
    spot_waist: float = 1e-6
    saturation: float = 1.0
    detection_efficiency: float | None = None
    # uniform dark/stray counts per channel (1/s)
    background_rate: float = BACKGROUND_MEAN_PER_SITE / 2 / 500e-6
    # uncorrelated photons per detected signal photon arriving within the burst
    correlated_background: float | None = None
    correlated_window: float = 2e-6
    trap_lifetime: float = math.inf
    interaction_loss_constant: float | None = None
    time_resolution: float = 0.8e-9
    step: float = 0.5e-6
    n_scans: int = 50
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.fill_probability <= 1.0:
            raise ValueError("fill_probability must lie in [0, 1]")
        if self.n_sites < 1 or self.n_scans < 1:
            raise ValueError("n_sites and n_scans must be >= 1")
        for name in ("pitch", "scan_speed", "spot_waist", "time_resolution", "step",
                     "trap_lifetime", "correlated_window"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("saturation", "background_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("detection_efficiency", "correlated_background", "interaction_loss_constant"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.detection_efficiency is not None and self.detection_efficiency > 1:
            raise ValueError("detection_efficiency must be <= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def site_period(self) -> float:
        return self.pitch / self.scan_speed

    @property
    def scan_period(self) -> float:
        return self.n_sites * self.site_period

    @property
    def transit_time(self) -> float:
        """Time the beam center needs to cross the 1/e^2 spot diameter."""
        return 2 * self.spot_waist / self.scan_speed

    def site_center_time(self, i):
        return (i + 0.5) * self.site_period

    def resolved(self, atom: AtomSpec | None = None) -> "ExperimentConfig":
        """Fill calibrated parameters left as None."""
        atom = AtomSpec.cesium_d2() if atom is None else atom
        budget = self.interaction_loss_constant
        if budget is None:
            budget = budget_for_burst(atom, self.saturation)
        xi = self.correlated_background
        if xi is None:
            xi = correlated_fraction_for_g2zero()
        eta = self.detection_efficiency
        if eta is None and not budget > 0:
            eta = 0.0
        if eta is None:
            mu_b = 2 * self.background_rate * self.site_period
            eta = efficiency_for_counts(budget, xi, background_mean=mu_b)
        return ExperimentConfig(**{**asdict(self), "interaction_loss_constant": budget,
                                   "correlated_background": xi, "detection_efficiency": eta})

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def config_hash(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, default=repr)
        return hashlib.sha256(text.encode()).hexdigest()[:16]
