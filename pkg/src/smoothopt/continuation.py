"""Successive smoothing: minimize a shrinking-width sequence of smoothed
functions, warm-starting each stage from the previous minimizers.

Strong smoothing erases shallow local minima while barely moving wide deep
ones, so tracking minimizers from a large width down to a small one lends the
method global behavior that single-width local descent lacks.  The warm start
extrapolates through the last two stage minimizers (the valley direction):
``start = project_X(x_curr + beta * (x_curr - x_prev))``.

Each stage's multi-step SGD run *is* the local descent of the classical
ravine method.  Stages are sequential by definition; independent restarts
parallelize freely.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .penalty import FeasibleSet
from .smoothing import EvaluationError, Kernel
from .optimizer import RunRecord, Schedule, StepRule, WidthRule, sgd_run

__all__ = [
    "SmoothingPlan",
    "StageResult",
    "ContinuationResult",
    "ravine_start",
    "successive_smoothing",
    "geometric_widths",
    "default_plan",
]


def geometric_widths(h0: float, stages: int, decay: float = 0.5) -> tuple[float, ...]:
    """Strictly decreasing widths ``h0 * decay**s`` for ``s = 0..stages-1``."""
    if not h0 > 0:
        raise ValueError("initial width h0 must be positive")
    if stages < 1:
        raise ValueError("need at least one stage")
    if not 0 < decay < 1:
        raise ValueError("decay must lie in (0, 1)")
    return tuple(h0 * decay ** s for s in range(stages))


@dataclass(frozen=True)
class SmoothingPlan:
    """Stage widths plus the per-stage inner run configuration.

    ``widths`` must be strictly decreasing.  ``steps`` gives one step rule per
    stage (a single rule may be broadcast).  With ``couple_widths`` the stage
    width only seeds the coupled rule ``h_t = L * rho_t / K`` instead of being
    held fixed within the stage.
    """

    widths: tuple[float, ...]
    steps: tuple[StepRule, ...]
    iterations: int
    batch_size: int
    ravine_beta: float = 1.0
    couple_widths: bool = False

    def __post_init__(self):
        widths = tuple(float(h) for h in self.widths)
        if len(widths) < 1:
            raise ValueError("plan needs at least one stage width")
        if any(not h > 0 for h in widths):
            raise ValueError("stage widths must be positive")
        if any(b >= a for a, b in zip(widths, widths[1:])):
            raise ValueError("stage widths must be strictly decreasing")
        steps = tuple(self.steps) if isinstance(self.steps, Sequence) else (self.steps,)
        if len(steps) == 1:
            steps = steps * len(widths)
        if len(steps) != len(widths):
            raise ValueError("need one step rule per stage (or a single rule)")
        if self.iterations < 1 or self.batch_size < 1:
            raise ValueError("iterations and batch size must be at least 1")
        if self.ravine_beta < 0:
            raise ValueError("ravine beta must be nonnegative")
        object.__setattr__(self, "widths", widths)
        object.__setattr__(self, "steps", steps)

    @property
    def stages(self) -> int:
        return len(self.widths)

    def schedule(self, stage: int) -> Schedule:
        width = WidthRule.coupled() if self.couple_widths else WidthRule.fixed(self.widths[stage])
        return Schedule(step=self.steps[stage], width=width)


@dataclass
class StageResult:
    """One stage of the outer loop.

    ``returned_point`` (the stage's step-weighted average) is what the next
    stage's ravine start extrapolates through.  ``best_so_far`` is the running
    minimum over probe evaluations of this and all earlier stages.
    """

    index: int
    h: float
    start: np.ndarray
    record: RunRecord
    returned_point: np.ndarray
    best_value: float
    best_so_far: float


@dataclass
class ContinuationResult:
    best_point: np.ndarray
    best_value: float
    stages: list[StageResult]
    evaluations: int


def ravine_start(x_prev, x_curr, beta: float, X: FeasibleSet) -> np.ndarray:
    """Extrapolate through two successive minimizers, projected back into X."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    x_prev = np.asarray(x_prev, dtype=float)
    x_curr = np.asarray(x_curr, dtype=float)
    return X.project(x_curr + beta * (x_curr - x_prev))


def successive_smoothing(F: Callable, X: FeasibleSet, plan: SmoothingPlan,
                         kernel: str | Kernel, x0, rng, *, vectorized: bool = False,
                         record_trajectory: bool = False) -> ContinuationResult:
    """Run the outer smoothing loop over ``plan.widths``.

    Stage 0 starts from ``x0``; stage 1 from stage 0's returned point (no
    extrapolation is possible with a single minimizer); stage ``s >= 2`` from
    the ravine extrapolation of the two previous returned points.  The result
    reports the best penalized value over all stages' probe evaluations.
    """
    variant = kernel.variant if isinstance(kernel, Kernel) else str(kernel)
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    x0 = np.asarray(x0, dtype=float)

    stages: list[StageResult] = []
    returned: list[np.ndarray] = []
    best_value = np.inf
    best_point = x0.copy()
    evaluations = 0

    for s in range(plan.stages):
        if s == 0:
            start = x0.copy()
        elif s == 1:
            start = returned[0].copy()
        else:
            start = ravine_start(returned[s - 2], returned[s - 1], plan.ravine_beta, X)
        try:
            record = sgd_run(F, X, start, plan.schedule(s), variant,
                             plan.batch_size, plan.iterations, gen,
                             vectorized=vectorized, record_trajectory=record_trajectory)
        except EvaluationError as err:
            raise err.with_context(stage=s) from None
        evaluations += record.evaluations
        if record.best_value < best_value:
            best_value = record.best_value
            best_point = record.best_point.copy()
        returned.append(record.weighted_average)
        stages.append(StageResult(
            index=s,
            h=plan.widths[s],
            start=start,
            record=record,
            returned_point=record.weighted_average,
            best_value=record.best_value,
            best_so_far=best_value,
        ))

    return ContinuationResult(best_point=best_point, best_value=best_value,
                              stages=stages, evaluations=evaluations)


def default_plan(X: FeasibleSet, *, iterations: int, batch_size: int,
                 L: float, stages: int = 11, decay: float = 0.5,
                 beta: float = 1.0, C: float = 1.0,
                 step_kind: str = "sphere-decaying",
                 step_alpha: float = 0.1) -> SmoothingPlan:
    """Plan with geometric widths from half the diameter of ``X`` down ~1000x.

    The default 11 stages at decay 0.5 end near ``1e-3 * h0``.  Step rules are
    built per stage with the distance bound tied to the stage scale
    (``D_s = 2 * h_s``): a stage's minimizer is expected within the previous
    stage's width of the warm start, so steps sized to the whole domain would
    be wasted after the first stage.  ``step_kind = "constant-scaled"`` uses
    ``rho_s = step_alpha * h_s / L`` instead.
    """
    lower, upper = X.bounding_box()
    diameter = float(np.linalg.norm(upper - lower))
    if not diameter > 0:
        raise ValueError("projection set has zero diameter")
    widths = geometric_widths(0.5 * diameter, stages, decay)
    n = lower.size
    steps = []
    for h in widths:
        if step_kind == "constant-scaled":
            steps.append(StepRule.constant(step_alpha * h / L))
        elif step_kind == "sphere-decaying":
            steps.append(StepRule.sphere_decaying(D=2.0 * h, L=L, n=n, K=batch_size, C=C))
        elif step_kind == "gaussian-decaying":
            steps.append(StepRule.gaussian_decaying(D=2.0 * h, L=L, n=n, K=batch_size))
        else:
            raise ValueError(f"unsupported default step kind {step_kind!r}")
    return SmoothingPlan(widths=widths, steps=tuple(steps), iterations=iterations,
                         batch_size=batch_size, ravine_beta=beta)
