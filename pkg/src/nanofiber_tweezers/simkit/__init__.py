"""Monte-Carlo generators of synthetic fluorescence and transmission data."""

from .config import ExperimentConfig, budget_for_burst, correlated_fraction_for_g2zero, efficiency_for_counts
from .emitter import sample_emissions, sample_emissions_batch, sample_waiting_times, steady_state_rate
from .od import DecayParams, OdTrace, ProbeNoise, od_model, simulate_od_decay, simulate_spectrum
from .scan import ExperimentRun, sample_occupancy, simulate_experiment, simulate_scan, simulate_stationary
from .ttag import TimeTagStream, read_csv, read_ttag, write_csv, write_ttag

__all__ = [
    "DecayParams", "ExperimentConfig", "ExperimentRun", "OdTrace", "ProbeNoise", "TimeTagStream",
    "budget_for_burst", "correlated_fraction_for_g2zero", "efficiency_for_counts", "od_model",
    "read_csv", "read_ttag", "sample_emissions", "sample_emissions_batch", "sample_occupancy",
    "sample_waiting_times", "simulate_experiment", "simulate_od_decay", "simulate_scan",
    "simulate_spectrum", "simulate_stationary", "steady_state_rate", "write_csv", "write_ttag",
]
