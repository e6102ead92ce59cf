"""Fits of optical-depth decays and transmission spectra, and beta extraction."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.stats import f as f_dist

from ..simkit.od import BETA_FIRST_SITE, BETA_SECOND_SITE

log = logging.getLogger(__name__)

F_TEST_ALPHA = 0.01


class FitError(RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SingleExponentialWarning(UserWarning):
    pass


@dataclass
class DecayFit:
    n1: float
    tau1: float
    n2: float
    tau2: float
    beta1: float
    beta2: float
    residual_norm: float
    model_order: int
    iterations: int
    stderr: dict = field(default_factory=dict)
    f_test_p: float | None = None

    def report(self) -> dict:
        return {"n1": self.n1, "tau1": self.tau1, "n2": self.n2, "tau2": self.tau2,
                "beta1": self.beta1, "beta2": self.beta2, "residual_norm": self.residual_norm,
                "model_order": self.model_order, "iterations": self.iterations,
                "stderr": self.stderr, "f_test_p": self.f_test_p}


def decay_model(p, t, beta1, beta2, order):
    if order == 1:
        n2, tau2 = p
        return 2 * beta2 * n2 * np.exp(-t / tau2)
    n1, tau1, n2, tau2 = p
    return 2 * beta1 * n1 * np.exp(-t / tau1) + 2 * beta2 * n2 * np.exp(-t / tau2)


def decay_jacobian(p, t, beta1, beta2, order):
    """d(model)/d(params), columns in parameter order."""
    def block(beta, n, tau):
        e = np.exp(-t / tau)
        return [2 * beta * e, 2 * beta * n * e * t / tau ** 2]
    if order == 1:
        return np.column_stack(block(beta2, *p))
    n1, tau1, n2, tau2 = p
    return np.column_stack(block(beta1, n1, tau1) + block(beta2, n2, tau2))


def _loglinear(t, y):
    """(amplitude, tau) from a straight-line fit of ln y on positive samples."""
    ok = y > 0
    if ok.sum() < 2:
        return max(float(np.max(y, initial=0.0)), 1e-12), float(t[-1] - t[0]) or 1.0
    slope, icpt = np.polyfit(t[ok], np.log(y[ok]), 1)
    tau = -1.0 / slope if slope < 0 else 10 * float(t[-1] - t[0])
    return float(math.exp(icpt)), float(tau)


def _initial(t, y, beta1, beta2, order):
    half = t.size // 2
    a2, tau2 = _loglinear(t[half:], y[half:])
    if order == 1:
        a2, tau2 = _loglinear(t, y)
        return [a2 / (2 * beta2), tau2]
    head = max(4, t.size // 5)
    rest = y[:head] - a2 * np.exp(-t[:head] / tau2)
    a1, tau1 = _loglinear(t[:head], rest)
    tau1 = min(tau1, 0.5 * tau2)
    return [max(a1, 1e-6) / (2 * beta1), tau1, a2 / (2 * beta2), tau2]


def _solve(t, y, beta1, beta2, order, x0, max_iter):
    scale = np.abs(np.asarray(x0)) + 1e-12

    def fun(p):
        return decay_model(p, t, beta1, beta2, order) - y

    def jac(p):
        return decay_jacobian(p, t, beta1, beta2, order)

    lower = np.zeros(len(x0))
    lower[1::2] = 1e-9  # decay times stay positive
    x0 = np.maximum(x0, lower + 1e-12)
    return least_squares(fun, x0, jac=jac, bounds=(lower, np.inf), method="trf",
                         xtol=1e-10, ftol=1e-15, gtol=1e-15, max_nfev=max_iter, x_scale=scale)


def _stderr(sol, names):
    dof = max(1, sol.fun.size - sol.x.size)
    try:
        cov = np.linalg.pinv(sol.jac.T @ sol.jac) * (2 * sol.cost / dof)
    except np.linalg.LinAlgError:
        return {n: math.inf for n in names}
    return {n: float(math.sqrt(max(cov[i, i], 0.0))) for i, n in enumerate(names)}


def fit_od_decay(times, od_values, beta1: float = BETA_FIRST_SITE, beta2: float = BETA_SECOND_SITE,
                 model_order: int = 2, max_iter: int = 500, alpha: float = F_TEST_ALPHA) -> DecayFit:
    """Bounded least-squares fit of OD(t) = 2 b1 N1 e^{-t/t1} + 2 b2 N2 e^{-t/t2}.

    Order 1 fixes N1 = 0. For order 2 an F-test against the order-1 fit is
    run; if the second component is not significant at ``alpha`` a
    SingleExponentialWarning recommends order 1.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(od_values, dtype=float)
    if model_order not in (1, 2):
        raise ValueError("model_order must be 1 or 2")
    need = 4 if model_order == 1 else 8
    if t.size < need or t.shape != y.shape:
        raise ValueError(f"order-{model_order} fit needs >= {need} points of matching shape")
    if np.any(t < 0) or np.any(np.diff(t) <= 0):
        raise ValueError("times must be nonnegative and strictly increasing")

    sol1 = _solve(t, y, beta1, beta2, 1, _initial(t, y, beta1, beta2, 1), max_iter)
    if model_order == 1:
        sol = sol1
        if sol.status <= 0:
            raise FitError(f"decay fit did not converge: {sol.message}", best=sol.x)
        n2, tau2 = sol.x
        return DecayFit(n1=0.0, tau1=math.inf, n2=float(n2), tau2=float(tau2), beta1=beta1, beta2=beta2,
                        residual_norm=float(np.linalg.norm(sol.fun)), model_order=1, iterations=sol.nfev,
                        stderr={"n1": 0.0, "tau1": 0.0, **_stderr(sol, ["n2", "tau2"])})

    sol = _solve(t, y, beta1, beta2, 2, _initial(t, y, beta1, beta2, 2), max_iter)
    if sol.status <= 0:
        raise FitError(f"decay fit did not converge: {sol.message}", best=sol.x)
    n1, tau1, n2, tau2 = sol.x
    if tau1 > tau2:  # identifiability: the short-lived component is labeled 1
        n1, tau1, n2, tau2 = n2 * beta2 / beta1, tau2, n1 * beta1 / beta2, tau1
    rss2 = float(np.sum(sol.fun ** 2))
    rss1 = float(np.sum(sol1.fun ** 2))
    dof2 = t.size - 4
    if rss2 > 0 and dof2 > 0:
        fstat = max(rss1 - rss2, 0.0) / 2 / (rss2 / dof2)
        p = float(f_dist.sf(fstat, 2, dof2))
    else:
        p = 0.0 if rss1 > rss2 else 1.0
    if p > alpha:
        warnings.warn(f"second exponential not significant (F-test p = {p:.3g} > {alpha}); "
                      "use model_order=1", SingleExponentialWarning, stacklevel=2)
    return DecayFit(n1=float(n1), tau1=float(tau1), n2=float(n2), tau2=float(tau2), beta1=beta1, beta2=beta2,
                    residual_norm=float(math.sqrt(rss2)), model_order=2, iterations=sol.nfev,
                    stderr=_stderr(sol, ["n1", "tau1", "n2", "tau2"]), f_test_p=p)


def fit_od_decay_auto(times, od_values, beta1=BETA_FIRST_SITE, beta2=BETA_SECOND_SITE,
                      alpha: float = F_TEST_ALPHA) -> DecayFit:
    """Order-2 fit if the F-test supports it, else order 1."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SingleExponentialWarning)
        two = fit_od_decay(times, od_values, beta1, beta2, 2, alpha=alpha) if len(times) >= 8 else None
    if two is not None and two.f_test_p is not None and two.f_test_p <= alpha:
        return two
    one = fit_od_decay(times, od_values, beta1, beta2, 1)
    one.f_test_p = None if two is None else two.f_test_p
    return one


@dataclass
class SpectrumFit:
    od_peak: float
    center: float
    linewidth: float
    linewidth_free: bool
    residual_norm: float
    stderr: dict = field(default_factory=dict)

    def od_at(self, detuning):
        x = 2 * (np.asarray(detuning, dtype=float) - self.center) / self.linewidth
        return self.od_peak / (1 + x * x)

    def report(self) -> dict:
        return {"od_peak": self.od_peak, "center": self.center, "linewidth": self.linewidth,
                "linewidth_free": self.linewidth_free, "residual_norm": self.residual_norm,
                "stderr": self.stderr}


def spectrum_jacobian(p, d, linewidth=None):
    """d T / d(od, center[, linewidth]) for T = exp(-od / (1 + x^2)), x = 2 (d - c) / G."""
    od, c = p[0], p[1]
    g = p[2] if linewidth is None else linewidth
    x = 2 * (d - c) / g
    lor = 1 / (1 + x * x)
    tr = np.exp(-od * lor)
    dlor_dx = -2 * x * lor * lor
    cols = [-lor * tr, -od * dlor_dx * (-2 / g) * tr]
    if linewidth is None:
        cols.append(-od * dlor_dx * (-x / g) * tr)
    return np.column_stack(cols)


def fit_od_spectrum(detunings, transmissions, Gamma_fixed: float | None,
                    linewidth_guess: float | None = None) -> SpectrumFit:
    """Fit T(D) = exp(-OD / (1 + (2 (D - D0) / G)^2)); G fixed unless ``Gamma_fixed`` is None."""
    d = np.asarray(detunings, dtype=float)
    tr = np.asarray(transmissions, dtype=float)
    if np.any(tr <= 0) or np.any(tr > 1 + 1e-9):
        raise ValueError("transmissions must lie in (0, 1]")
    if Gamma_fixed is not None and not Gamma_fixed > 0:
        raise ValueError("Gamma must be > 0")
    if d.size < 3:
        raise ValueError("need at least 3 spectrum points")
    od = -np.log(tr)
    i = int(np.argmax(od))
    g0 = Gamma_fixed if Gamma_fixed is not None else (linewidth_guess or 0.25 * float(np.ptp(d)))
    x0 = [max(od[i], 1e-6), d[i]] + ([] if Gamma_fixed is not None else [g0])
    fixed = Gamma_fixed

    def fun(p):
        g = p[2] if fixed is None else fixed
        x = 2 * (d - p[1]) / g
        return np.exp(-p[0] / (1 + x * x)) - tr

    lower = [0.0, -np.inf] + ([] if fixed is not None else [1e-12])
    sol = least_squares(fun, x0, jac=lambda p: spectrum_jacobian(p, d, fixed),
                        bounds=(lower, [np.inf] * len(x0)), xtol=1e-12, ftol=1e-15, gtol=1e-15,
                        x_scale=[1.0, g0] + ([] if fixed is not None else [g0]))
    names = ["od_peak", "center"] + ([] if fixed is not None else ["linewidth"])
    return SpectrumFit(od_peak=float(sol.x[0]), center=float(sol.x[1]),
                       linewidth=float(sol.x[2] if fixed is None else fixed), linewidth_free=fixed is None,
                       residual_norm=float(np.linalg.norm(sol.fun)), stderr=_stderr(sol, names))


# the value quoted alongside the measured peak OD; ten times OD/N
QUOTED_D0 = 0.077


@dataclass
class BetaEstimate:
    d0: float
    beta: float
    notes: list = field(default_factory=list)

    def report(self) -> dict:
        return {"d0": self.d0, "beta": self.beta, "notes": self.notes}


def estimate_beta(od_peak: float, n_atoms: float) -> tuple[float, float]:
    """(d0, beta) = (OD / N, OD / 2N)."""
    if not n_atoms > 0:
        raise ValueError("n_atoms must be > 0")
    if od_peak < 0:
        raise ValueError("od_peak must be >= 0")
    d0 = od_peak / n_atoms
    return d0, d0 / 2


def beta_report(od_peak: float, n_atoms: float) -> BetaEstimate:
    d0, beta = estimate_beta(od_peak, n_atoms)
    notes = []
    if abs(d0 * 10 - QUOTED_D0) < 0.05 * QUOTED_D0:
        notes.append(f"d0 = OD/N = {d0:.5f}; the quoted d0 = {QUOTED_D0} is ten times larger and "
                     f"inconsistent with the quoted beta = d0/2 ~ {beta:.2%}; treated as a typo, "
                     "OD/N used literally")
    return BetaEstimate(d0=d0, beta=beta, notes=notes)
