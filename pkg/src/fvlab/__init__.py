"""Simulation and numerical verification laboratory for Fleming-Viot
particle systems in the fast-selection regime.

The package simulates the n-particle mutation/selection dynamics
exactly, builds the limiting condensate Markov chains and their exact
marginals, computes absorption laws (committors, Polya-urn
redistribution) in closed or near-closed form, and runs config-driven
statistical experiments comparing the two sides.
"""

from .chains import (
    CascadeAnalysis,
    RateMatrix,
    condensate_rates,
    conjectured_limit_rates,
    ctmc_marginal,
    simulate_ctmc,
)
from .committor import (
    CommittorTable,
    CompositionSpace,
    committor_numeric,
    committor_two_site,
    gamblers_ruin_committor,
    invasion_probability,
)
from .condensation import (
    InitialCondensationLaw,
    UrnLaw,
    initial_condensation_law,
    limit_weight_profile,
    minimal_order_set,
    polya_urn_law,
)
from .engine import (
    AbsorptionResult,
    EmpiricalMeasure,
    Event,
    EventCapError,
    Trajectory,
    next_event,
    simulate_fv,
    simulate_selection_absorption,
)
from .experiments import (
    EXPERIMENT_KINDS,
    ConfigError,
    ExperimentConfig,
    Report,
    derive_replica_rng,
    run_experiment,
)
from .metrics import (
    ConcentrationStats,
    LawOnStates,
    StepPath,
    concentration_stats,
    empirical_law,
    exact_law,
    l1_tv_path_distance,
    tv_distance,
)
from .model import (
    ExtendedRatio,
    Model,
    ModelError,
    PowerLawKilling,
    UniformPlusBoundedKilling,
    load_model,
    validate_model,
)

__version__ = "0.1.0"

__all__ = [
    "AbsorptionResult",
    "CascadeAnalysis",
    "CommittorTable",
    "CompositionSpace",
    "ConcentrationStats",
    "ConfigError",
    "EXPERIMENT_KINDS",
    "EmpiricalMeasure",
    "Event",
    "EventCapError",
    "ExperimentConfig",
    "ExtendedRatio",
    "InitialCondensationLaw",
    "LawOnStates",
    "Model",
    "ModelError",
    "PowerLawKilling",
    "RateMatrix",
    "Report",
    "StepPath",
    "Trajectory",
    "UniformPlusBoundedKilling",
    "UrnLaw",
    "committor_numeric",
    "committor_two_site",
    "concentration_stats",
    "condensate_rates",
    "conjectured_limit_rates",
    "ctmc_marginal",
    "derive_replica_rng",
    "empirical_law",
    "exact_law",
    "gamblers_ruin_committor",
    "initial_condensation_law",
    "invasion_probability",
    "l1_tv_path_distance",
    "limit_weight_profile",
    "load_model",
    "minimal_order_set",
    "next_event",
    "polya_urn_law",
    "run_experiment",
    "simulate_ctmc",
    "simulate_fv",
    "simulate_selection_absorption",
    "tv_distance",
    "validate_model",
    "__version__",
]
