"""Spectral analysis of distance covariance matrices for high-dimensional dependence detection."""

from .dcm import build_dcm, dcm_eigenvalues, sample_dcov_squared, tn_statistic
from .lsd import ModelSpec, density, named_model, solve_point, support_edge
from .measure import DiscreteMeasure, parse_measure, point_mass
from .rank import calibrate_dn, estimate_rank
from .spike import spike_location, theta_critical
from .synth import InnovationLaw, SpikeSpec, gen_independent, gen_spiked

__version__ = "0.1.0"

__all__ = [
    "DiscreteMeasure",
    "InnovationLaw",
    "ModelSpec",
    "SpikeSpec",
    "build_dcm",
    "calibrate_dn",
    "dcm_eigenvalues",
    "density",
    "estimate_rank",
    "gen_independent",
    "gen_spiked",
    "named_model",
    "parse_measure",
    "point_mass",
    "sample_dcov_squared",
    "solve_point",
    "spike_location",
    "support_edge",
    "theta_critical",
    "tn_statistic",
]
