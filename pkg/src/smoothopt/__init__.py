"""smoothopt: derivative-free constrained global optimization.

Constrained problems are reduced to unconstrained ones by exact nonsmooth
penalties, then minimized by successive stochastic smoothing: a decreasing
sequence of kernel widths, each smoothed function minimized locally by
projected two-point stochastic finite-difference gradient descent with
trajectory averaging, warm-started along the valley through the previous
stage minimizers.

Quick start::

    import numpy as np
    import smoothopt as so

    problem = so.make_problem("polygon", n=3)
    plan = so.default_plan(problem.domain, iterations=200, batch_size=2, L=15.0)
    result = so.successive_smoothing(
        problem.objective_batch, problem.domain, plan, "sphere",
        problem.sample_start(np.random.default_rng(0)), rng=0, vectorized=True)
    print("area:", problem.report(result.best_value))
"""

from .penalty import (
    Ball,
    Box,
    ConfigurationError,
    ContractViolationError,
    CustomSet,
    FeasibleSet,
    PenaltySpec,
    ball_constraint,
    box_constraints,
    distance,
    penalize,
    penalized_function,
    project,
    ray_retraction,
)
from .smoothing import (
    EvaluationError,
    GradientEstimate,
    Kernel,
    SmoothedValue,
    grad_estimate,
    sample_direction,
    second_moment_check,
    smoothed_value,
)
from .optimizer import (
    RunRecord,
    Schedule,
    StepRule,
    WidthRule,
    estimate_lipschitz,
    schedule_values,
    sgd_run,
    rate_bound,
)
from .continuation import (
    ContinuationResult,
    SmoothingPlan,
    StageResult,
    default_plan,
    geometric_widths,
    ravine_start,
    successive_smoothing,
)
from .problems import (
    CalibrationFunction,
    PolygonProblem,
    ProblemInstance,
    calibration,
    make_problem,
    polygon_area,
    polygon_penalized,
    problem_names,
)

__version__ = "0.1.0"
