"""Standing-wave tweezer potential in front of the nanofiber.

Along the tweezer axis the focused beam interferes with its own reflection
off the fiber. Both beams carry the on-axis Gaussian amplitude and Gouy phase
of a focus located ``focus_offset`` in front of the surface; the reflected
beam is the mirror image of the incident one, multiplied by ``r exp(i phi)``.
The Gouy phase is what stretches the fringe spacing beyond lambda/2 close to
the focus.

Energies are in joules; ``*_uK`` helpers convert through k_B.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq, fsolve, minimize_scalar

from .core import AU_C3, AU_POLARIZABILITY, C_LIGHT, CS_D1_WAVELENGTH, CS_D2_WAVELENGTH, EPS0, KB

# Cs ground state, D1/D2 oscillator strengths and core polarizability (a.u.)
_CS_LINES = ((CS_D1_WAVELENGTH, 0.3449), (CS_D2_WAVELENGTH, 0.7148))
_CS_CORE_AU = 15.8
# Hartree energy expressed as a wavelength: lambda_au = h c / E_h
_HARTREE_WAVELENGTH = 45.563352529e-9


def cs_ground_polarizability(wavelength: float) -> float:
    """Two-line estimate of the Cs 6S1/2 dynamic polarizability (SI, C m^2/V).

    About 3.05e3 a.u. at 935 nm. Accurate to a few percent away from the D
    lines, which is below the uncertainty of the trap model itself.
    """
    w = _HARTREE_WAVELENGTH / wavelength
    total = _CS_CORE_AU
    for lam, f in _CS_LINES:
        wi = _HARTREE_WAVELENGTH / lam
        total += f / (wi * wi - w * w)
    return total * AU_POLARIZABILITY


# Cs on a perfectly conducting wall (Derevianko et al. 1999): 4.269 a.u.
CS_METAL_C3 = 4.269 * AU_C3

# Output of calibrate_reflection() for the defaults below; see tests/test_trapfield.py
CALIBRATED_REFLECTION_AMPLITUDE = 0.199038
CALIBRATED_REFLECTION_PHASE = -2.428168
CALIBRATED_FOCUS_OFFSET = 2.607303e-6

FIRST_SITE_TARGET = 190e-9
SECOND_SITE_TARGET = 671e-9
# first-site onset lies between the 1.51 mW and 1.75 mW rows of the OD-decay table
ONSET_POWER_TARGET = 0.5 * (1.51e-3 + 1.75e-3)


@dataclass(frozen=True)
class TweezerBeamSpec:
    wavelength: float = 935e-9
    waist: float = 1.0e-6
    power: float = 1.5e-3
    polarizability: float | None = None
    focus_offset: float = CALIBRATED_FOCUS_OFFSET

    def __post_init__(self):
        if not self.waist > 0 or not self.wavelength > 0 or self.power < 0:
            raise ValueError("need waist > 0, wavelength > 0, power >= 0")
        if self.polarizability is None:
            object.__setattr__(self, "polarizability", cs_ground_polarizability(self.wavelength))

    @property
    def rayleigh_range(self) -> float:
        return math.pi * self.waist ** 2 / self.wavelength

    @property
    def peak_intensity(self) -> float:
        return 2 * self.power / (math.pi * self.waist ** 2)


@dataclass(frozen=True)
class SurfaceReflection:
    amplitude: float = CALIBRATED_REFLECTION_AMPLITUDE
    phase: float = CALIBRATED_REFLECTION_PHASE

    def __post_init__(self):
        if not 0.0 <= self.amplitude <= 1.0:
            raise ValueError("reflection amplitude must lie in [0, 1]")


@dataclass(frozen=True)
class PotentialProfile:
    grid: np.ndarray
    u_optical: np.ndarray
    u_vdw: np.ndarray
    u_total: np.ndarray
    c3: float

    def rows_uK(self):
        scale = 1e6 / KB
        return np.column_stack([self.grid * 1e9, self.u_optical * scale,
                                self.u_vdw * scale, self.u_total * scale])


@dataclass(frozen=True)
class TrapSite:
    position: float
    depth: float
    label: int
    barrier_inner: float
    barrier_outer: float

    @property
    def depth_uK(self) -> float:
        return self.depth / KB * 1e6


def _axial_mode(beam: TweezerBeamSpec, z):
    zr = beam.rayleigh_range
    k = 2 * math.pi / beam.wavelength
    x = z / zr
    return np.exp(1j * (k * z - np.arctan(x))) / np.sqrt(1 + x * x)


def axial_field(beam: TweezerBeamSpec, refl: SurfaceReflection, d):
    """Complex on-axis field, normalized to 1 at the focus of the incident beam."""
    d = np.asarray(d, dtype=float)
    zf = beam.focus_offset
    return _axial_mode(beam, zf - d) + refl.amplitude * np.exp(1j * refl.phase) * _axial_mode(beam, zf + d)


def standing_wave_intensity(beam: TweezerBeamSpec, refl: SurfaceReflection, d):
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr < 0):
        raise ValueError("d must be >= 0")
    out = beam.peak_intensity * np.abs(axial_field(beam, refl, d_arr)) ** 2
    return float(out) if out.ndim == 0 else out


def dipole_potential(intensity, polarizability: float):
    """U = -Re(alpha) I / (2 eps0 c)."""
    inten = np.asarray(intensity, dtype=float)
    if np.any(inten < 0):
        raise ValueError("intensity must be >= 0")
    out = -np.real(polarizability) * inten / (2 * EPS0 * C_LIGHT)
    return float(out) if out.ndim == 0 else out


def vdw_potential(c3: float, d):
    d_arr = np.asarray(d, dtype=float)
    if np.any(d_arr <= 0):
        raise ValueError("van der Waals potential diverges at d <= 0")
    out = -c3 / d_arr ** 3
    return float(out) if out.ndim == 0 else out


def default_grid(d_min: float = 2e-9, d_max: float = 2.5e-6, step: float = 0.5e-9) -> np.ndarray:
    return np.arange(d_min, d_max + 0.5 * step, step)


def potential_profile(beam: TweezerBeamSpec, refl: SurfaceReflection,
                      c3: float = CS_METAL_C3, grid=None) -> PotentialProfile:
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    u_opt = dipole_potential(standing_wave_intensity(beam, refl, grid), beam.polarizability)
    u_vdw = vdw_potential(c3, grid) if c3 else np.zeros_like(grid)
    return PotentialProfile(grid=grid, u_optical=np.asarray(u_opt), u_vdw=np.asarray(u_vdw),
                            u_total=np.asarray(u_opt) + np.asarray(u_vdw), c3=c3)


def _parabolic_vertex(x, y, j):
    x0, x1, x2 = x[j - 1], x[j], x[j + 1]
    y0, y1, y2 = y[j - 1], y[j], y[j + 1]
    den = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / den
    b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / den
    if a <= 0:
        return x1
    return float(np.clip(-b / (2 * a), x0, x2))


def find_trap_sites(profile: PotentialProfile, depth_threshold: float = 0.0,
                    thermal_margin_K: float = 0.0) -> list[TrapSite]:
    """Local minima of the total potential that hold an atom.

    Depth is the lower of the two escape barriers (toward and away from the
    surface). Sites whose depth does not exceed ``depth_threshold`` plus
    ``k_B * thermal_margin_K`` are dropped.
    """
    x = np.asarray(profile.grid, dtype=float)
    u = np.asarray(profile.u_total, dtype=float)
    if x.size < 3:
        raise ValueError("potential grid needs at least 3 points")
    if np.any(np.diff(x) <= 0):
        raise ValueError("potential grid must be strictly increasing")

    interior = np.arange(1, x.size - 1)
    minima = interior[(u[1:-1] < u[:-2]) & (u[1:-1] <= u[2:])]
    threshold = depth_threshold + KB * thermal_margin_K
    sites = []
    for idx, j in enumerate(minima):
        lo = minima[idx - 1] if idx > 0 else 0
        hi = minima[idx + 1] if idx + 1 < minima.size else x.size - 1
        inner = u[lo:j + 1].max() - u[j]
        outer = u[j:hi + 1].max() - u[j]
        depth = min(inner, outer)
        if depth > threshold:
            sites.append(TrapSite(position=_parabolic_vertex(x, u, j), depth=float(depth),
                                  label=len(sites) + 1, barrier_inner=float(inner),
                                  barrier_outer=float(outer)))
    return sites


def intensity_maxima(beam: TweezerBeamSpec, refl: SurfaceReflection, near=(FIRST_SITE_TARGET, SECOND_SITE_TARGET)):
    """Refine the intensity maxima closest to each guess in ``near``."""
    quarter = beam.wavelength / 4
    out = []
    for x0 in near:
        res = minimize_scalar(lambda d: -abs(axial_field(beam, refl, d)) ** 2,
                              bounds=(max(x0 - quarter, 0.0), x0 + quarter), method="bounded",
                              options={"xatol": 1e-14})
        out.append(float(res.x))
    return out


def first_site_onset_power(beam: TweezerBeamSpec, refl: SurfaceReflection, c3: float = CS_METAL_C3,
                           p_max: float = 20e-3, split: float | None = None, grid=None) -> float:
    """Lowest power at which a stable site appears closer than ``split`` to the surface."""
    split = 0.5 * (FIRST_SITE_TARGET + SECOND_SITE_TARGET) if split is None else split

    def has_first(p):
        prof = potential_profile(replace(beam, power=p), refl, c3, grid)
        return any(s.position < split for s in find_trap_sites(prof))

    lo, hi = 0.0, p_max
    if not has_first(hi):
        return math.inf
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if has_first(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-9:
            break
    return hi


def calibrate_reflection(beam: TweezerBeamSpec | None = None, c3: float = CS_METAL_C3,
                         targets=(FIRST_SITE_TARGET, SECOND_SITE_TARGET),
                         onset_power: float = ONSET_POWER_TARGET, rounds: int = 4,
                         amplitude_guess: float = 0.2):
    """Fit the reflection and focus placement to the reference trap geometry.

    Phase and focus offset put the first two intensity maxima on ``targets``;
    the amplitude puts the first-site stability onset at ``onset_power``.
    Returns ``(SurfaceReflection, TweezerBeamSpec)``.
    """
    beam = TweezerBeamSpec() if beam is None else beam
    zr = beam.rayleigh_range
    k = 2 * math.pi / beam.wavelength
    amp = amplitude_guess
    zf = beam.focus_offset if beam.focus_offset > 0 else 0.75 * zr
    phase = None
    for _ in range(rounds):
        if phase is None:
            phase = -(2 * k * targets[0] - math.atan((zf + targets[0]) / zr) + math.atan((zf - targets[0]) / zr))
            phase = (phase + math.pi) % (2 * math.pi) - math.pi

        def residual(p, amp=amp):
            b = replace(beam, focus_offset=p[1] * 1e-6)
            got = intensity_maxima(b, SurfaceReflection(amp, p[0]), targets)
            return [(g - t) * 1e9 for g, t in zip(got, targets)]

        sol = fsolve(residual, [phase, zf * 1e6], xtol=1e-9)
        phase, zf = float(sol[0]), float(sol[1]) * 1e-6
        b = replace(beam, focus_offset=zf)

        def onset_gap(a):
            return first_site_onset_power(b, SurfaceReflection(a, phase), c3) - onset_power

        amp = brentq(onset_gap, 0.02, 0.95, xtol=1e-6)
    phase = (phase + math.pi) % (2 * math.pi) - math.pi
    return SurfaceReflection(amp, phase), replace(beam, focus_offset=zf)
