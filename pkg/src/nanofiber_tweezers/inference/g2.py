"""Cross-channel coincidence histograms and the normalized g2(tau)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from ..simkit.ttag import TimeTagStream

REF_WINDOW = (500e-9, 800e-9)
MIN_REFERENCE_COUNTS = 100


class InsufficientDataError(ValueError):
    pass


class UnsupportedRegimeError(ValueError):
    pass


@dataclass
class CoincidenceHistogram:
    tau: np.ndarray  # bin centers (s)
    counts: np.ndarray  # int64
    bin_width: float


@dataclass
class G2Result:
    tau_bins: np.ndarray
    raw_counts: np.ndarray
    ref_mean: float
    g2_normalized: np.ndarray
    ref_window: tuple[float, float]

    def g2_zero(self) -> float:
        return float(self.g2_normalized[np.argmin(np.abs(self.tau_bins))])

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.tau_bins, self.raw_counts, self.g2_normalized]),
                   delimiter=",", header="tau_s,raw,g2", comments="", fmt="%.10g")


def coincidence_histogram(stream: TimeTagStream, bin_width: float, window: float,
                          chunk: int = 200_000) -> CoincidenceHistogram:
    """Histogram of t1 - t0 over all channel-0/channel-1 pairs with |t1 - t0| <= window.

    Bins are centered on multiples of ``bin_width``; an odd number of ticks per
    bin makes them exactly symmetric about zero. Partial histograms over
    chunks of channel-0 tags are merged by integer addition.
    """
    ratio = bin_width / stream.resolution
    k = int(round(ratio))
    if k < 1 or abs(ratio - k) > 1e-6 * max(1.0, ratio):
        raise ValueError("bin width must be an integer multiple of the stream resolution")
    present = set(np.unique(stream.channels).tolist())
    if len(stream) and present != {0, 1}:
        raise ValueError("coincidence histogram needs tags on both channels 0 and 1")
    n_half = int(math.floor(window / bin_width + 1e-9))
    if n_half < 1:
        raise ValueError("window must span at least one bin")
    counts = np.zeros(2 * n_half + 1, dtype=np.int64)
    tau = np.arange(-n_half, n_half + 1) * bin_width
    if len(stream) == 0:
        return CoincidenceHistogram(tau, counts, bin_width)

    t0 = stream.channel_times(0)
    t1 = stream.channel_times(1)
    reach = n_half * k + k // 2
    for s in range(0, t0.size, chunk):
        a = t0[s:s + chunk]
        lo = np.searchsorted(t1, a - reach, side="left")
        hi = np.searchsorted(t1, a + reach, side="right")
        n = hi - lo
        total = int(n.sum())
        if total == 0:
            continue
        owner = np.repeat(np.arange(a.size), n)
        offset = np.arange(total) - np.repeat(np.cumsum(n) - n, n)
        delta = t1[lo[owner] + offset] - a[owner]
        idx = np.floor_divide(delta + k // 2, k) + n_half
        ok = (idx >= 0) & (idx < counts.size)
        counts += np.bincount(idx[ok], minlength=counts.size)
    return CoincidenceHistogram(tau, counts, bin_width)


def rebin(hist: CoincidenceHistogram, factor: int) -> CoincidenceHistogram:
    """Merge ``factor`` (odd) adjacent bins, keeping the zero bin centered."""
    if factor < 1 or factor % 2 == 0:
        raise ValueError("rebin factor must be a positive odd integer")
    n_half = (hist.counts.size - 1) // 2
    m_half = (n_half - factor // 2) // factor
    centre = n_half
    out = np.array([hist.counts[centre + j * factor - factor // 2: centre + j * factor + factor // 2 + 1].sum()
                    for j in range(-m_half, m_half + 1)], dtype=np.int64)
    width = hist.bin_width * factor
    return CoincidenceHistogram(np.arange(-m_half, m_half + 1) * width, out, width)


def normalize_g2(tau, raw, ref_window=REF_WINDOW, min_counts: float = MIN_REFERENCE_COUNTS) -> G2Result:
    """g2 = raw / mean(raw over ref_lo < |tau| < ref_hi)."""
    tau = np.asarray(tau, dtype=float)
    raw = np.asarray(raw, dtype=float)
    lo, hi = ref_window
    if not 0 <= lo < hi:
        raise ValueError("reference window must satisfy 0 <= lo < hi")
    if hi > np.max(np.abs(tau)) + 1e-15:
        raise ValueError("reference window extends beyond the histogram")
    sel = (np.abs(tau) > lo) & (np.abs(tau) < hi)
    if not sel.any():
        raise ValueError("no bins inside the reference window")
    total = raw[sel].sum()
    if total < min_counts:
        raise InsufficientDataError(
            f"{total:g} counts in the reference window, need >= {min_counts}")
    ref_mean = float(raw[sel].mean())
    return G2Result(tau_bins=tau, raw_counts=raw, ref_mean=ref_mean, g2_normalized=raw / ref_mean,
                    ref_window=(lo, hi))


def g2_from_stream(stream: TimeTagStream, bin_width: float = 0.8e-9, window: float = 1e-6,
                   ref_window=REF_WINDOW) -> G2Result:
    h = coincidence_histogram(stream, bin_width, window)
    return normalize_g2(h.tau, h.counts, ref_window)


def kappa(gamma: float, omega: float) -> float:
    """Damped Rabi-revival frequency sqrt((2 Omega)^2 - (gamma / 4)^2)."""
    arg = (2 * omega) ** 2 - (gamma / 4) ** 2
    if not arg > 0:
        raise UnsupportedRegimeError(
            "drive is not underdamped ((2 Omega)^2 <= (gamma/4)^2); the overdamped g2 branch is not supported")
    return math.sqrt(arg)


def g2_theory(gamma: float, omega: float, delta_bg: float, taus):
    """Resonant two-level g2 with uncorrelated-background offset ``delta_bg``."""
    if not 0 <= delta_bg <= 1:
        raise ValueError("delta_bg must lie in [0, 1]")
    k = kappa(gamma, omega)
    t = np.abs(np.asarray(taus, dtype=float))
    d = 0.75 * gamma
    ideal = 1 - np.exp(-d * t) * (np.cos(k * t) + d / k * np.sin(k * t))
    return (1 - delta_bg) * ideal + delta_bg


@dataclass
class G2Fit:
    kappa: float
    delta_bg: float
    kappa_stderr: float
    residual_norm: float


def fit_g2_kappa(result: G2Result, gamma: float, tau_max: float = 1e-6) -> G2Fit:
    """Fit the revival frequency and offset with the damping fixed to 3 gamma / 4."""
    sel = np.abs(result.tau_bins) <= tau_max
    t = np.abs(result.tau_bins[sel])
    y = result.g2_normalized[sel]
    w = 1.0 / np.sqrt(np.maximum(result.raw_counts[sel], 1.0)) * result.ref_mean
    d = 0.75 * gamma

    def resid(p):
        k, delta = p
        ideal = 1 - np.exp(-d * t) * (np.cos(k * t) + d / k * np.sin(k * t))
        return ((1 - delta) * ideal + delta - y) / w

    # start near the strongest Fourier component of the revival
    guess = 2 * math.pi * 3.6e6
    sol = least_squares(resid, [guess, max(0.0, float(y[np.argmin(t)]))],
                        bounds=([1e5, 0.0], [1e9, 1.0]), x_scale=[guess, 0.1])
    jtj = sol.jac.T @ sol.jac
    dof = max(1, t.size - 2)
    cov = np.linalg.pinv(jtj) * (2 * sol.cost / dof)
    return G2Fit(kappa=float(sol.x[0]), delta_bg=float(sol.x[1]),
                 kappa_stderr=float(math.sqrt(max(cov[0, 0], 0.0))), residual_norm=float(math.sqrt(2 * sol.cost)))
