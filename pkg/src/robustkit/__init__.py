"""Robust linear and combinatorial optimization: counterparts, iterative
solvers, structured special cases and a comparison harness."""

from .algorithms import (
    OracleResult,
    SamplingBoundQuery,
    candidate_heuristic,
    cutting_plane_solve,
    required_sample_size,
    sample_and_solve,
    sample_scenarios,
    sampling_bound,
    surrogate_bound,
    surrogate_relaxation_bb,
    worst_case_oracle,
)
from .combinatorial import (
    IntervalGraph,
    KnapsackInstance,
    PathSolution,
    cc_knapsack_dp,
    knapsack_brute_force,
    midpoint_path,
    regret_of_path,
    regret_path_bb,
    regret_path_brute_force,
    shortest_path,
)
from .counterparts import (
    CounterpartArtifact,
    LightConfig,
    MulveyConfig,
    adjustable_counterpart,
    cc_counterpart,
    light_counterpart,
    mulvey_counterpart,
    nominal_optimum,
    regret_counterpart_finite,
    regret_dual_counterpart_interval,
    reliability_counterpart,
    strict_counterpart,
)
from .errors import InstanceError, LimitError, RobustError, SolveFailure, UnsupportedError
from .evaluate import (
    ComparisonTable,
    EvaluationReport,
    compare_concepts,
    evaluate_solution,
    evaluation_scenarios,
    price_of_robustness,
    robustness_gap,
)
from .model import (
    BudgetSet,
    ConstraintRow,
    FiniteSet,
    IntervalSet,
    Objective,
    PolytopeSet,
    Scenario,
    UncertainLinearProgram,
    Variable,
    instantiate,
    load_instance,
    parse_instance,
    problem_from_dict,
    problem_to_dict,
    serialize_instance,
    validate,
)
from .solver import DeterministicModel, SolveReport, solve, solve_lp, solve_mip, using_tolerances

__version__ = "0.1.0"
