"""Numerical evolution and diagnostics for timelike minimal graphs of
dimension 1+n and codimension q in Minkowski space."""

__version__ = "0.1.0"

from .config import SimConfig, parse_config, load_config
from .diagnostics import (DecayFit, NormsRecord, NullFormId, compute_norms,
                          decay_fit, det_expansion_check, energy_and_inequality,
                          null_estimate_ratio, null_form)
from .errors import (CoercivityLost, DegenerateSeries, IncompatibleWithPeriodicity,
                     IncompleteSeries, NonFinite, ParseError, SingularBlock,
                     SingularMetric, SpacelikeDegeneration, TmsimError,
                     UnresolvableProfile, ValidationError)
from .evolution import (EvolutionResult, StepReport, divergence_residual, evolve,
                        linear_wave_evolve, rk4_step, second_time_derivative)
from .geometry import (FirstJet, MetricPoint, coercivity_margin, det_and_inverse,
                       flux_coefficient, induced_metric, metric_point,
                       principal_coefficient)
from .grid import FieldState, GridSpec, first_jet_at, reduce_norms, spatial_derivative
from .initial_data import DataFamily, bump_profile, realize
from .vectorfields import (VectorField, apply_vector_field, commutator_check,
                           lorentz_fields)

__all__ = [
    "__version__",
    "SimConfig", "parse_config", "load_config",
    "DecayFit", "NormsRecord", "NullFormId", "compute_norms", "decay_fit",
    "det_expansion_check", "energy_and_inequality", "null_estimate_ratio", "null_form",
    "CoercivityLost", "DegenerateSeries", "IncompatibleWithPeriodicity",
    "IncompleteSeries", "NonFinite", "ParseError", "SingularBlock", "SingularMetric",
    "SpacelikeDegeneration", "TmsimError", "UnresolvableProfile", "ValidationError",
    "EvolutionResult", "StepReport", "divergence_residual", "evolve",
    "linear_wave_evolve", "rk4_step", "second_time_derivative",
    "FirstJet", "MetricPoint", "coercivity_margin", "det_and_inverse",
    "flux_coefficient", "induced_metric", "metric_point", "principal_coefficient",
    "FieldState", "GridSpec", "first_jet_at", "reduce_norms", "spatial_derivative",
    "DataFamily", "bump_profile", "realize",
    "VectorField", "apply_vector_field", "commutator_check", "lorentz_fields",
]
