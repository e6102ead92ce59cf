"""Physical constants, unit helpers and two-level atom relations.

All frequencies are angular (rad/s) internally. Use :func:`to_2pi_mhz` and
:func:`from_2pi_mhz` for the "2pi x MHz" display form.

Rabi convention: ``Omega = gamma * sqrt(s / 2)`` with ``gamma`` the transverse
decay rate (``Gamma / 2``). With s = 1 and gamma = 2pi x 2.61 MHz this gives
Omega = 2pi x 1.845 MHz. Other references use ``Omega = Gamma * sqrt(s / 2)``;
switching convention rescales every downstream Rabi/kappa value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import constants as sc

TWO_PI = 2.0 * math.pi

HBAR = sc.hbar
H_PLANCK = sc.h
KB = sc.k
C_LIGHT = sc.c
EPS0 = sc.epsilon_0
AMU = sc.atomic_mass

# atomic units
AU_POLARIZABILITY = sc.physical_constants["atomic unit of electric polarizability"][0]
AU_C3 = sc.physical_constants["Hartree energy"][0] * sc.physical_constants["Bohr radius"][0] ** 3

CS_MASS = 132.905451933 * AMU
CS_D2_WAVELENGTH = 852.34727582e-9
CS_D1_WAVELENGTH = 894.59295986e-9


def to_2pi_mhz(omega):
    """rad/s -> value in units of 2pi x MHz."""
    return omega / (TWO_PI * 1e6)


def from_2pi_mhz(value):
    """Value in units of 2pi x MHz -> rad/s."""
    return value * TWO_PI * 1e6


def kelvin_from_joule(energy):
    return np.asarray(energy) / KB


@dataclass(frozen=True)
class AtomSpec:
    gamma_transverse: float
    wavelength_probe: float = CS_D2_WAVELENGTH
    recoil_energy: float | None = None

    def __post_init__(self):
        if not self.gamma_transverse > 0:
            raise ValueError("gamma_transverse must be > 0")
        if not self.wavelength_probe > 0:
            raise ValueError("wavelength_probe must be > 0")

    @property
    def Gamma_natural(self) -> float:
        return 2.0 * self.gamma_transverse

    @classmethod
    def cesium_d2(cls) -> "AtomSpec":
        k = TWO_PI / CS_D2_WAVELENGTH
        recoil = (HBAR * k) ** 2 / (2 * CS_MASS)
        return cls(gamma_transverse=from_2pi_mhz(2.61), wavelength_probe=CS_D2_WAVELENGTH,
                   recoil_energy=recoil)


@dataclass(frozen=True)
class DriveSpec:
    saturation: float = 1.0
    detuning: float = 0.0
    rabi: float | None = None

    def __post_init__(self):
        if self.saturation < 0:
            raise ValueError("saturation must be >= 0")

    def rabi_for(self, atom: AtomSpec) -> float:
        """Rabi frequency implied by the saturation, checked against ``rabi`` if set."""
        omega = rabi_from_saturation(self.saturation, atom.gamma_transverse)
        if self.rabi is not None and not math.isclose(self.rabi, omega, rel_tol=1e-9, abs_tol=1e-9):
            raise ValueError(f"rabi={self.rabi} inconsistent with saturation={self.saturation} ({omega})")
        return omega


def rabi_from_saturation(s, gamma):
    """Omega = gamma * sqrt(s / 2). Vectorized over ``s``."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise ValueError("saturation parameter must be nonnegative")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    out = gamma * np.sqrt(s_arr / 2.0)
    return float(out) if out.ndim == 0 else out


def saturation_from_rabi(omega, gamma):
    return 2.0 * (np.asarray(omega, dtype=float) / gamma) ** 2


def scattering_rate(s, delta, Gamma):
    """Steady-state photon scattering rate (Gamma/2) s / (1 + s + (2 delta/Gamma)^2)."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise ValueError("saturation parameter must be nonnegative")
    if not Gamma > 0:
        raise ValueError("Gamma must be positive")
    det = 2.0 * np.asarray(delta, dtype=float) / Gamma
    out = 0.5 * Gamma * s_arr / (1.0 + s_arr + det * det)
    return float(out) if out.ndim == 0 else out
