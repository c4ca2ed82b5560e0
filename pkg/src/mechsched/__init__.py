"""Strategyproof makespan scheduling on unrelated machines, guided by predictions.

The makespan of an allocation is ``mechsched.core.makespan``; the name
``mechsched.makespan`` refers to the solver module.
"""
from .core import (
    INF,
    Allocation,
    InfeasibleError,
    Instance,
    MechSchedError,
    Prediction,
    ShapeError,
    ZeroOptWarning,
    approximation_ratio,
    load_profile,
    prediction_error,
)
from .instances import GeneratorSpec, gen_correlated, gen_figure1, gen_figure2, gen_perturbed, gen_uniform, generate
from .makespan import CapacityError, ExactSolver, GreedySolver, SolverResult, opt_oracle, solve_enumerate, solve_exact, solve_greedy
from .mechanisms import (
    ERROR_TOLERANT,
    FOLLOW_PREDICTION,
    GREEDY,
    MECHANISMS,
    SCALED,
    SIMPLE,
    GammaRangeWarning,
    MechanismOutcome,
    ScalarPlan,
    TiePolicy,
    assign_scaled_min,
    build_plan,
    run_mechanism,
    scalars_error_tolerant,
    scalars_follow,
    scalars_greedy,
    scalars_scaled,
    scalars_simple,
)
from .payments import MonopolistJobError, critical_payments, utility

__all__ = [
    "INF",
    "Allocation",
    "InfeasibleError",
    "Instance",
    "MechSchedError",
    "Prediction",
    "ShapeError",
    "ZeroOptWarning",
    "approximation_ratio",
    "load_profile",
    "prediction_error",
    "GeneratorSpec",
    "gen_correlated",
    "gen_figure1",
    "gen_figure2",
    "gen_perturbed",
    "gen_uniform",
    "generate",
    "CapacityError",
    "ExactSolver",
    "GreedySolver",
    "SolverResult",
    "opt_oracle",
    "solve_enumerate",
    "solve_exact",
    "solve_greedy",
    "ERROR_TOLERANT",
    "FOLLOW_PREDICTION",
    "GREEDY",
    "MECHANISMS",
    "SCALED",
    "SIMPLE",
    "GammaRangeWarning",
    "MechanismOutcome",
    "ScalarPlan",
    "TiePolicy",
    "assign_scaled_min",
    "build_plan",
    "run_mechanism",
    "scalars_error_tolerant",
    "scalars_follow",
    "scalars_greedy",
    "scalars_scaled",
    "scalars_simple",
    "MonopolistJobError",
    "critical_payments",
    "utility",
]

__version__ = "0.1.0"
