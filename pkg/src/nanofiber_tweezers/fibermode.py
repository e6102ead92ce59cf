"""HE11 mode of a step-index nanofiber in vacuum.

The exact vector dispersion relation is scanned for a sign change in
``n_eff`` between the cladding and core indices, bisected, then polished with
Brent's method. Outside the glass the mode is carried by K0, K1 and K2; the
exposed intensity is the azimuthal average (identical to the quasi-circular
polarization profile).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import jv, jvp, kv, kvp

SINGLE_MODE_CUTOFF = 2.404825557695773  # first zero of J0


class MultimodeError(ValueError):
    """Fiber supports more than the fundamental mode."""


class ModeSolverError(RuntimeError):
    pass


def silica_index(wavelength: float) -> float:
    """Fused silica refractive index (Malitson 1965 Sellmeier fit)."""
    lam2 = (wavelength * 1e6) ** 2
    n2 = 1.0
    for b, c in ((0.6961663, 0.0684043), (0.4079426, 0.1162414), (0.8974794, 9.896161)):
        n2 += b * lam2 / (lam2 - c * c)
    return math.sqrt(n2)


@dataclass(frozen=True)
class FiberSpec:
    radius: float
    wavelength: float
    index_core: float | None = None
    index_clad: float = 1.0

    def __post_init__(self):
        if self.index_core is None:
            object.__setattr__(self, "index_core", silica_index(self.wavelength))
        if not self.radius > 0:
            raise ValueError("radius must be > 0")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be > 0")
        if self.index_clad < 1.0 or not self.index_core > self.index_clad:
            raise ValueError("need index_core > index_clad >= 1")

    @classmethod
    def from_diameter(cls, diameter: float, wavelength: float, **kw) -> "FiberSpec":
        return cls(radius=diameter / 2, wavelength=wavelength, **kw)


def v_number(spec: FiberSpec) -> float:
    k0 = 2 * math.pi / spec.wavelength
    return k0 * spec.radius * math.sqrt(spec.index_core ** 2 - spec.index_clad ** 2)


@dataclass(frozen=True)
class GuidedMode:
    spec: FiberSpec
    n_eff: float
    V_number: float
    residual: float
    profile_d: np.ndarray = field(repr=False, compare=False)
    profile: np.ndarray = field(repr=False, compare=False)

    @property
    def k0(self) -> float:
        return 2 * math.pi / self.spec.wavelength

    @property
    def beta_prop(self) -> float:
        return self.k0 * self.n_eff

    @property
    def q_decay(self) -> float:
        return self.k0 * math.sqrt(self.n_eff ** 2 - self.spec.index_clad ** 2)

    @property
    def h_core(self) -> float:
        return self.k0 * math.sqrt(self.spec.index_core ** 2 - self.n_eff ** 2)

    @property
    def s_param(self) -> float:
        a = self.spec.radius
        ha, qa = self.h_core * a, self.q_decay * a
        jp = jvp(1, ha) / (ha * jv(1, ha))
        kp = kvp(1, qa) / (qa * kv(1, qa))
        return (1 / ha ** 2 + 1 / qa ** 2) / (jp + kp)

    def _raw_outside(self, r):
        q, b, s = self.q_decay, self.beta_prop, self.s_param
        qr = q * r
        return (b * b / (2 * q * q)) * ((1 - s) ** 2 * kv(0, qr) ** 2 + (1 + s) ** 2 * kv(2, qr) ** 2) \
            + kv(1, qr) ** 2

    def intensity(self, d):
        return evanescent_intensity(self, d)


def _dispersion(spec: FiberSpec, n_eff):
    """HE/EH eigenvalue equation for azimuthal order 1, multiplied through by
    (U J1(U))^2 so it has no poles in the guided range."""
    k0 = 2 * math.pi / spec.wavelength
    n1, n2, a = spec.index_core, spec.index_clad, spec.radius
    n_eff = np.asarray(n_eff, dtype=float)
    u = k0 * a * np.sqrt(n1 ** 2 - n_eff ** 2)
    w = k0 * a * np.sqrt(n_eff ** 2 - n2 ** 2)
    j1, dj1 = jv(1, u), jvp(1, u)
    kq = kvp(1, w) / (w * kv(1, w))
    uj = u * j1
    lhs = (dj1 + uj * kq) * (n1 ** 2 * dj1 + n2 ** 2 * uj * kq)
    rhs = n_eff ** 2 * (1 / u ** 2 + 1 / w ** 2) ** 2 * uj ** 2
    return lhs - rhs


def dispersion_residual(spec: FiberSpec, n_eff: float) -> float:
    """Relative mismatch of the two sides of the (unscaled) eigenvalue equation."""
    k0 = 2 * math.pi / spec.wavelength
    n1, n2, a = spec.index_core, spec.index_clad, spec.radius
    u = k0 * a * math.sqrt(n1 ** 2 - n_eff ** 2)
    w = k0 * a * math.sqrt(n_eff ** 2 - n2 ** 2)
    jp = jvp(1, u) / (u * jv(1, u))
    kp = kvp(1, w) / (w * kv(1, w))
    lhs = (jp + kp) * (n1 ** 2 * jp + n2 ** 2 * kp)
    rhs = n_eff ** 2 * (1 / u ** 2 + 1 / w ** 2) ** 2
    return abs(lhs - rhs) / abs(rhs)


def solve_he11(spec: FiberSpec, tol: float = 1e-14, n_scan: int = 4000,
               allow_multimode: bool = False, profile_max: float = 2e-6,
               profile_points: int = 401) -> GuidedMode:
    """Fundamental mode effective index and evanescent profile.

    Scans ``n_scan`` points downward from the core index for the first sign
    change (the HE11 branch), bisects to ``tol`` and polishes with brentq.
    """
    if not tol > 0:
        raise ValueError("tol must be > 0")
    V = v_number(spec)
    if V >= SINGLE_MODE_CUTOFF and not allow_multimode:
        raise MultimodeError(f"V = {V:.4f} >= {SINGLE_MODE_CUTOFF:.4f}: fiber is multimode")

    n1, n2 = spec.index_core, spec.index_clad
    span = n1 - n2
    # cluster samples near both ends, where the root sits in the thin/thick limits
    x = 0.5 - 0.5 * np.cos(np.linspace(0.0, math.pi, n_scan + 2)[1:-1])
    grid = n1 - span * x
    vals = _dispersion(spec, grid)
    sign = np.sign(vals)
    flips = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    if flips.size == 0:
        raise ModeSolverError(
            f"no HE11 root in ({n2}, {n1}); V={V:.4f}, dispersion range "
            f"[{vals.min():.3e}, {vals.max():.3e}] over {n_scan} samples")
    hi, lo = grid[flips[0]], grid[flips[0] + 1]
    f_lo = _dispersion(spec, lo)
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        f_mid = _dispersion(spec, mid)
        if f_mid == 0:
            lo = hi = mid
            break
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    if lo == hi:
        n_eff = lo
    else:
        n_eff = brentq(lambda n: float(_dispersion(spec, n)), lo, hi, xtol=tol,
                       rtol=4 * np.finfo(float).eps)
    if not n2 < n_eff < n1:
        raise ModeSolverError(f"root n_eff={n_eff} outside guided range")

    mode = GuidedMode(spec=spec, n_eff=float(n_eff), V_number=V,
                      residual=dispersion_residual(spec, float(n_eff)),
                      profile_d=np.empty(0), profile=np.empty(0))
    d = np.linspace(0.0, profile_max, profile_points)
    object.__setattr__(mode, "profile_d", d)
    object.__setattr__(mode, "profile", evanescent_intensity(mode, d))
    return mode


def evanescent_intensity(mode: GuidedMode, d):
    """Azimuthally averaged |e|^2 at distance ``d`` from the surface, 1 at d = 0."""
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr < 0):
        raise ValueError("distance from the fiber surface must be >= 0")
    a = mode.spec.radius
    out = mode._raw_outside(a + d_arr) / mode._raw_outside(a)
    return float(out) if out.ndim == 0 else out
