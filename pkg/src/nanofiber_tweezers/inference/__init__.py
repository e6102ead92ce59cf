"""Analysis chain: g2, atom counting, decay and spectrum fits, beta extraction."""

from .decay import (BetaEstimate, DecayFit, FitError, SingleExponentialWarning, SpectrumFit, beta_report,
                    estimate_beta, fit_od_decay, fit_od_decay_auto, fit_od_spectrum)
from .g2 import (G2Result, InsufficientDataError, UnsupportedRegimeError, coincidence_histogram, fit_g2_kappa,
                 g2_from_stream, g2_theory, kappa, normalize_g2, rebin)
from .mixture import (MixtureFit, NonIdentifiableError, count_histogram, fit_poisson_mixture, lower_bound_atoms,
                      sample_mixture_counts, site_counts)

__all__ = [
    "BetaEstimate", "DecayFit", "FitError", "G2Result", "InsufficientDataError", "MixtureFit",
    "NonIdentifiableError", "SingleExponentialWarning", "SpectrumFit", "UnsupportedRegimeError", "beta_report",
    "coincidence_histogram", "count_histogram", "estimate_beta", "fit_g2_kappa", "fit_od_decay",
    "fit_od_decay_auto", "fit_od_spectrum", "fit_poisson_mixture", "g2_from_stream", "g2_theory", "kappa",
    "lower_bound_atoms", "normalize_g2", "rebin", "sample_mixture_counts", "site_counts",
]
