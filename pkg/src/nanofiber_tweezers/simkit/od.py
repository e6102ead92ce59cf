"""Optical-depth traces of the trapped ensemble seen by a weak fiber-guided probe."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.constants import c, h

from ..core import CS_D2_WAVELENGTH

# coupling of first- and second-site atoms used by the decay model
BETA_FIRST_SITE = 0.053
BETA_SECOND_SITE = 0.006


@dataclass(frozen=True)
class DecayParams:
    n1: float = 0.0
    tau1: float = np.inf
    n2: float = 0.0
    tau2: float = np.inf
    beta1: float = BETA_FIRST_SITE
    beta2: float = BETA_SECOND_SITE

    def __post_init__(self):
        for name in ("n1", "tau1", "n2", "tau2", "beta1", "beta2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if (self.n1 > 0 and not self.tau1 > 0) or (self.n2 > 0 and not self.tau2 > 0):
            raise ValueError("decay times of populated components must be > 0")


@dataclass(frozen=True)
class ProbeNoise:
    """Shot noise of the transmitted-probe photon counts per time bin.

    Transmission is the ratio of counts with and without atoms, both Poisson
    with mean ``reference_counts`` times the true transmission.
    """
    probe_power: float = 0.1e-12
    wavelength: float = CS_D2_WAVELENGTH
    bin_width: float = 1e-3
    detection_efficiency: float = 0.5
    repetitions: int = 100

    @property
    def reference_counts(self) -> float:
        rate = self.probe_power / (h * c / self.wavelength)
        return rate * self.bin_width * self.detection_efficiency * self.repetitions


@dataclass
class OdTrace:
    times: np.ndarray
    od_values: np.ndarray
    probe_power: float = 0.1e-12

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.od_values = np.asarray(self.od_values, dtype=float)
        if self.times.shape != self.od_values.shape:
            raise ValueError("times and od_values differ in shape")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.times, self.od_values]), delimiter=",",
                   header="t_s,od", comments="", fmt="%.10g")

    @classmethod
    def from_csv(cls, path) -> "OdTrace":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1])


def od_model(params: DecayParams, times):
    """OD(t) = 2 b1 N1 exp(-t/t1) + 2 b2 N2 exp(-t/t2)."""
    t = np.asarray(times, dtype=float)
    out = np.zeros_like(t)
    if params.n1 > 0:
        out += 2 * params.beta1 * params.n1 * np.exp(-t / params.tau1)
    if params.n2 > 0:
        out += 2 * params.beta2 * params.n2 * np.exp(-t / params.tau2)
    return out


def noisy_od(od, noise: ProbeNoise, rng: np.random.Generator):
    """OD estimated from Poisson probe counts; a zero count is floored at half a photon."""
    n0 = noise.reference_counts
    od = np.asarray(od, dtype=float)
    with_atoms = rng.poisson(n0 * np.exp(-od))
    reference = rng.poisson(n0, size=od.shape)
    return -np.log(np.maximum(with_atoms, 0.5) / np.maximum(reference, 0.5))


def simulate_od_decay(params: DecayParams, times, noise: ProbeNoise | None = None,
                      rng: np.random.Generator | None = None, probe_power: float | None = None) -> OdTrace:
    """OD decay trace; exact closed form when ``noise`` is None."""
    od = od_model(params, times)
    if noise is not None:
        if rng is None:
            raise ValueError("a noisy trace needs an rng")
        od = noisy_od(od, noise, rng)
    power = probe_power if probe_power is not None else (noise.probe_power if noise else 0.1e-12)
    return OdTrace(np.asarray(times, dtype=float), od, power)


def transmission_spectrum(od_peak: float, linewidth: float, detunings, center: float = 0.0):
    """T(D) = exp(-OD / (1 + (2 (D - D0) / G)^2))."""
    x = 2 * (np.asarray(detunings, dtype=float) - center) / linewidth
    return np.exp(-od_peak / (1 + x * x))


def simulate_spectrum(od_peak: float, linewidth: float, detunings, noise: ProbeNoise | None = None,
                      rng: np.random.Generator | None = None, center: float = 0.0):
    t = transmission_spectrum(od_peak, linewidth, detunings, center)
    if noise is None:
        return t
    return np.exp(-noisy_od(-np.log(t), noise, rng))


# reference double-exponential fits by trap power (W): N1, tau1 (s), N2, tau2 (s)
REFERENCE_DECAY_ROWS = {
    0.27e-3: (0, None, 8, 24e-3),
    0.56e-3: (0, None, 42, 54e-3),
    0.77e-3: (0, None, 55, 76e-3),
    0.99e-3: (0, None, 88, 103e-3),
    1.26e-3: (0, None, 97, 121e-3),
    1.51e-3: (0, None, 104, 129e-3),
    1.75e-3: (2, 17e-3, 108, 137e-3),
    2.00e-3: (7, 21e-3, 106, 146e-3),
}


def reference_decay_params(power: float) -> DecayParams:
    n1, tau1, n2, tau2 = REFERENCE_DECAY_ROWS[power]
    return DecayParams(n1=n1, tau1=np.inf if tau1 is None else tau1, n2=n2, tau2=tau2)
