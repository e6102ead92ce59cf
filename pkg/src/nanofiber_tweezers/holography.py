"""Weighted Gerchberg-Saxton phase masks for linear tweezer arrays.

The SLM plane and the focal plane are related by a unitary 2D FFT, so pixel
coordinates in the focal plane index spatial frequencies of the mask. One
focal pixel corresponds to ``wavelength * focal_length / (N * slm_pitch)``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HologramProblem:
    shape: tuple[int, int]
    targets: np.ndarray  # (M, 2) integer (row, col) pixels in the focal plane
    iterations: int = 100
    tolerance: float = 0.01
    seed: int = 0
    zero_nontarget: bool = True
    fix_phase_below: float | None = 0.05

    def __post_init__(self):
        ny, nx = self.shape
        for n in (ny, nx):
            if n < 2 or n & (n - 1):
                raise ValueError(f"grid dimensions must be powers of two, got {self.shape}")
        t = np.asarray(self.targets)
        if t.ndim != 2 or t.shape[1] != 2 or t.shape[0] == 0:
            raise ValueError("targets must be a nonempty (M, 2) array of pixel coordinates")
        if not np.all(np.equal(np.mod(t, 1), 0)):
            raise ValueError("targets must sit on grid pixels (integer coordinates)")
        t = t.astype(np.int64)
        if np.any(t < 0) or np.any(t[:, 0] >= ny) or np.any(t[:, 1] >= nx):
            raise ValueError("target outside the focal-plane grid")
        if len({tuple(p) for p in t}) != len(t):
            raise ValueError("targets must be distinct")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        object.__setattr__(self, "targets", t)


@dataclass
class HologramSolution:
    phase: np.ndarray
    spot_amplitudes: np.ndarray
    weights: list[np.ndarray]
    uniformity_error: float
    efficiency: float
    iterations_run: int
    best_iteration: int
    converged: bool
    uniformity_history: list[float] = field(default_factory=list)

    def metadata(self) -> dict:
        return {
            "n_spots": int(self.spot_amplitudes.size),
            "uniformity_error": float(self.uniformity_error),
            "efficiency": float(self.efficiency),
            "iterations_run": self.iterations_run,
            "best_iteration": self.best_iteration,
            "converged": self.converged,
        }


def focal_pixel_pitch(wavelength: float, focal_length: float, slm_pitch: float, n_pixels: int) -> float:
    return wavelength * focal_length / (n_pixels * slm_pitch)


def linear_array_targets(n_spots: int, pitch_px: int, shape: tuple[int, int], row: int | None = None):
    ny, nx = shape
    span = (n_spots - 1) * pitch_px
    if span >= nx:
        raise ValueError(f"{n_spots} spots at pitch {pitch_px} px do not fit in {nx} columns")
    row = ny // 4 if row is None else row
    start = (nx - span) // 2
    cols = start + pitch_px * np.arange(n_spots)
    return np.column_stack([np.full(n_spots, row), cols])


def linear_array_problem(n_spots: int = 200, pitch: float = 5e-6, *, wavelength: float = 935e-9,
                         focal_length: float = 10.24e-3, slm_pitch: float = 3.74e-6,
                         shape: tuple[int, int] = (128, 2048), **kw) -> HologramProblem:
    """Problem for ``n_spots`` at physical ``pitch`` (m) in the focal plane.

    Raises if the pitch is not an integer number of focal-plane pixels.
    """
    px = focal_pixel_pitch(wavelength, focal_length, slm_pitch, shape[1])
    ratio = pitch / px
    if abs(ratio - round(ratio)) > 1e-6 or round(ratio) < 1:
        raise ValueError(f"pitch {pitch} m is {ratio:.4f} focal pixels: not on grid")
    return HologramProblem(shape=shape, targets=linear_array_targets(n_spots, int(round(ratio)), shape), **kw)


def uniformity(spot_amplitudes) -> float:
    """(max - min) / (max + min) of the spot intensities |V_m|^2."""
    a = np.asarray(spot_amplitudes)
    if a.size == 0:
        raise ValueError("uniformity of an empty spot list is undefined")
    inten = np.abs(a) ** 2
    hi, lo = inten.max(), inten.min()
    if hi + lo == 0:
        return 0.0
    return float((hi - lo) / (hi + lo))


def forward(slm_field):
    return np.fft.fft2(slm_field, norm="ortho")


def backward(focal_field):
    return np.fft.ifft2(focal_field, norm="ortho")


def spot_fields(phase, targets):
    focal = forward(np.exp(1j * phase))
    return focal[targets[:, 0], targets[:, 1]], focal


def quantize_phase(phase, levels: int = 256):
    """Round a phase mask onto ``levels`` equally spaced SLM gray levels."""
    code = np.round(np.mod(phase, 2 * np.pi) / (2 * np.pi) * levels).astype(np.int64) % levels
    return code, code * (2 * np.pi / levels)


def initial_phase(problem: HologramProblem) -> np.ndarray:
    """Phase of the superposition of all spot gratings with seeded random phases."""
    rng = np.random.default_rng(problem.seed)
    focal = np.zeros(problem.shape, dtype=complex)
    t = problem.targets
    focal[t[:, 0], t[:, 1]] = np.exp(1j * rng.uniform(0.0, 2 * np.pi, size=len(t)))
    return np.angle(backward(focal))


def wgs_solve(problem: HologramProblem) -> HologramSolution:
    """Weighted GS with optional spot-phase freezing.

    Once the uniformity error first falls below ``fix_phase_below`` the spot
    phases are frozen and only the weights keep evolving, which removes the
    stagnation plain WGS shows on dense regular arrays.
    """
    rows, cols = problem.targets[:, 0], problem.targets[:, 1]
    phase = initial_phase(problem)
    w = np.ones(len(rows))
    weights = [w.copy()]
    history = []
    best = None
    fixed_phase = None

    for it in range(problem.iterations):
        focal = forward(np.exp(1j * phase))
        v = focal[rows, cols]
        amp = np.abs(v)
        err = uniformity(v)
        history.append(err)
        if best is None or err < best[0]:
            best = (err, it, phase.copy(), v.copy(), float(np.sum(np.abs(focal) ** 2)))
        if err < problem.tolerance and it > 0:
            break
        if it > 0:
            w = w * amp.mean() / np.maximum(amp, 1e-300)
            weights.append(w.copy())
        if fixed_phase is None and problem.fix_phase_below is not None and err < problem.fix_phase_below:
            fixed_phase = np.angle(v)
        spot_phase = np.angle(v) if fixed_phase is None else fixed_phase
        if problem.zero_nontarget:
            focal = np.zeros_like(focal)
        focal[rows, cols] = w * amp.mean() * np.exp(1j * spot_phase)
        phase = np.angle(backward(focal))
    else:
        it = problem.iterations - 1

    err, best_it, best_phase, v, total = best
    converged = err < problem.tolerance
    if not converged:
        log.warning("WGS did not reach uniformity %.3g after %d iterations (best %.3g)",
                    problem.tolerance, it + 1, err)
    return HologramSolution(phase=np.mod(best_phase, 2 * np.pi), spot_amplitudes=np.abs(v),
                            weights=weights, uniformity_error=err,
                            efficiency=float(np.sum(np.abs(v) ** 2) / total),
                            iterations_run=it + 1, best_iteration=best_it, converged=converged,
                            uniformity_history=history)


def write_pgm(path, phase, levels: int = 256) -> None:
    """8-bit binary PGM (P5) of the phase mask."""
    code, _ = quantize_phase(phase, levels)
    ny, nx = code.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n255\n".encode("ascii"))
        fh.write(code.astype(np.uint8).tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    # header is four whitespace-separated tokens and exactly one whitespace byte before the raster
    fields, pos = [], 0
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        end = pos
        while end < len(data) and not data[end:end + 1].isspace():
            end += 1
        if end == pos:
            raise ValueError("truncated PGM header")
        fields.append(data[pos:end])
        pos = end
    if fields[0] != b"P5":
        raise ValueError("not a binary PGM")
    nx, ny, maxval = (int(f) for f in fields[1:])
    if maxval != 255:
        raise ValueError("only 8-bit PGM supported")
    raster = data[pos + 1:pos + 1 + nx * ny]
    if len(raster) != nx * ny:
        raise ValueError("truncated PGM raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(ny, nx)


def write_phase_csv(path, phase) -> None:
    np.savetxt(path, np.mod(phase, 2 * np.pi), delimiter=",", fmt="%.6f")


def write_metadata(path, solution: HologramSolution, extra: dict | None = None) -> None:
    meta = solution.metadata()
    meta.update(extra or {})
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
