"""Atom counting from per-site photon counts with a two-component Poisson mixture."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln
from scipy.stats import chi2

# significance of the atom component against the background-only model
LR_ALPHA = 0.01


class NonIdentifiableError(ValueError):
    pass


@dataclass
class MixtureFit:
    w: float
    mu_a: float
    mu_b: float
    n_est: int
    loglik: float
    stderr: dict
    iterations: int
    n_sites: int
    lr_stat: float = math.nan

    def zero_fraction(self) -> float:
        """Model probability of a zero-count site window."""
        return self.w * math.exp(-self.mu_a) + (1 - self.w) * math.exp(-self.mu_b)

    def report(self) -> dict:
        return {"w": self.w, "mu_a": self.mu_a, "mu_b": self.mu_b, "n_est": self.n_est,
                "loglik": self.loglik, "stderr": self.stderr, "iterations": self.iterations,
                "lr_stat": self.lr_stat, "model_zero_fraction": self.zero_fraction()}


def count_histogram(counts) -> np.ndarray:
    """Histogram h[k] = number of observations with k counts."""
    c = np.asarray(counts).ravel()
    if c.size and (c.min() < 0 or np.any(c != np.round(c))):
        raise ValueError("counts must be nonnegative integers")
    return np.bincount(c.astype(np.int64)) if c.size else np.zeros(1, dtype=np.int64)


def _log_pois(k, mu):
    if mu == 0:
        return np.where(k == 0, 0.0, -np.inf)
    return k * math.log(mu) - mu - gammaln(k + 1)


def _loglik(h, k, w, mu_a, mu_b):
    la = _log_pois(k, mu_a)
    lb = _log_pois(k, mu_b)
    with np.errstate(divide="ignore"):
        comp = np.logaddexp(np.log(w) + la if w > 0 else -np.inf * np.ones_like(la),
                            np.log1p(-w) + lb if w < 1 else -np.inf * np.ones_like(lb))
    mask = h > 0
    return float(np.sum(h[mask] * comp[mask]))


def _em(h, k, mu_b, w, mu_a, tol, max_iter):
    n = h.sum()
    ll = _loglik(h, k, w, mu_a, mu_b) / n
    for it in range(1, max_iter + 1):
        la = np.log(w) + _log_pois(k, mu_a) if w > 0 else np.full(k.shape, -np.inf)
        lb = np.log1p(-w) + _log_pois(k, mu_b) if w < 1 else np.full(k.shape, -np.inf)
        r = np.exp(la - np.logaddexp(la, lb))
        r = np.nan_to_num(r, nan=0.0)
        ha = h * r
        sa = ha.sum()
        w = float(sa / n)
        if sa > 0:
            mu_a = float(np.sum(ha * k) / sa)
        new = _loglik(h, k, w, mu_a, mu_b) / n
        if new - ll < tol:
            return w, mu_a, new * n, it
        ll = new
    return w, mu_a, ll * n, max_iter


def _stderr(h, k, w, mu_a, mu_b):
    """Parameter uncertainties from the summed outer product of per-observation scores."""
    pa = np.exp(_log_pois(k, mu_a))
    pb = np.exp(_log_pois(k, mu_b))
    p = w * pa + (1 - w) * pb
    ok = (h > 0) & (p > 0)
    s_w = (pa - pb)[ok] / p[ok]
    s_mu = (w * pa * (k / mu_a - 1))[ok] / p[ok]
    info = np.array([[np.sum(h[ok] * s_w * s_w), np.sum(h[ok] * s_w * s_mu)],
                     [np.sum(h[ok] * s_w * s_mu), np.sum(h[ok] * s_mu * s_mu)]])
    try:
        cov = np.linalg.inv(info)
        return {"w": float(math.sqrt(max(cov[0, 0], 0))), "mu_a": float(math.sqrt(max(cov[1, 1], 0)))}
    except np.linalg.LinAlgError:
        return {"w": math.inf, "mu_a": math.inf}


def fit_poisson_mixture(histogram, mu_b: float, n_sites: int = 200, starts: int = 10,
                        mu_a_range=None, tol: float = 1e-9, max_iter: int = 20000,
                        lr_alpha: float = LR_ALPHA) -> MixtureFit:
    """MLE of (w, mu_a) for P(k) = w Pois(k; mu_a) + (1 - w) Pois(k; mu_b), mu_b fixed.

    EM from ``starts`` evenly spaced mu_a values in [mu_b + 0.1, max(5, 3 mu_b)]; converged
    when the mean log-likelihood per observation gains less than ``tol``,
    which makes the fit invariant to scaling all bin counts.

    With mu_a close to mu_b the weight is not identifiable, so the atom
    component is kept only if the likelihood ratio against w = 0 exceeds the
    chi-square(2) quantile at ``lr_alpha``; otherwise w = 0 is reported.
    """
    h = np.asarray(histogram, dtype=float)
    if h.ndim != 1 or h.size < 2:
        raise NonIdentifiableError("need a histogram with at least two count bins")
    if np.any(h < 0) or h.sum() <= 0:
        raise ValueError("histogram must be nonnegative with positive total")
    if mu_b < 0:
        raise ValueError("mu_b must be >= 0")
    k = np.arange(h.size, dtype=float)
    lo, hi = (mu_b + 0.1, max(5.0, 3 * mu_b)) if mu_a_range is None else mu_a_range
    if h[1:].sum() == 0:
        # no site ever fired: the likelihood is maximized by an empty array
        ll = _loglik(h, k, 0.0, lo, mu_b)
        return MixtureFit(w=0.0, mu_a=lo, mu_b=mu_b, n_est=0, loglik=ll,
                          stderr={"w": math.inf, "mu_a": math.inf}, iterations=0, n_sites=n_sites, lr_stat=0.0)
    best = None
    for mu0 in np.linspace(lo, hi, starts):
        w, mu_a, ll, it = _em(h, k, mu_b, 0.5, float(mu0), tol, max_iter)
        if best is None or ll > best[2] + 1e-12 * abs(ll):
            best = (w, mu_a, ll, it)
    w, mu_a, ll, it = best
    ll0 = _loglik(h, k, 0.0, lo, mu_b)
    lr = max(0.0, 2 * (ll - ll0))
    if not mu_a > mu_b or lr < chi2.ppf(1 - lr_alpha, 2):
        return MixtureFit(w=0.0, mu_a=lo, mu_b=mu_b, n_est=0, loglik=ll0,
                          stderr={"w": math.inf, "mu_a": math.inf}, iterations=it, n_sites=n_sites, lr_stat=lr)
    return MixtureFit(w=w, mu_a=mu_a, mu_b=mu_b, n_est=int(round(w * n_sites)), loglik=ll,
                      stderr=_stderr(h, k, w, mu_a, mu_b), iterations=it, n_sites=n_sites, lr_stat=lr)


def sample_mixture_counts(w: float, mu_a: float, mu_b: float, shape, rng: np.random.Generator):
    occupied = rng.random(shape) < w
    return np.where(occupied, rng.poisson(mu_a, shape), rng.poisson(mu_b, shape))


def lower_bound_atoms(zero_frac_loading: float, zero_frac_control: float, n_sites: int) -> int:
    """floor((control - loading) * M), clamped at 0."""
    for f in (zero_frac_loading, zero_frac_control):
        if not 0.0 <= f <= 1.0:
            raise ValueError("zero fractions must lie in [0, 1]")
    # a few ulps of slack so products that are integers in exact arithmetic floor correctly
    x = (zero_frac_control - zero_frac_loading) * n_sites
    return max(0, int(math.floor(x + 1e-9)))


def site_counts(stream, n_sites: int, site_period: float, n_scans: int) -> np.ndarray:
    """(n_scans, n_sites) photon counts per site window, scans back to back."""
    t = stream.seconds()
    scan_period = n_sites * site_period
    scan = np.floor(t / scan_period).astype(np.int64)
    site = np.floor((t - scan * scan_period) / site_period).astype(np.int64)
    ok = (scan >= 0) & (scan < n_scans) & (site >= 0) & (site < n_sites)
    out = np.zeros((n_scans, n_sites), dtype=np.int64)
    np.add.at(out, (scan[ok], site[ok]), 1)
    return out
