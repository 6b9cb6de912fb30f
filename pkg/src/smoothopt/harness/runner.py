"""Benchmark runner: executes a config over its seed list and serializes results.

Each seed owns an independent random substream derived from its seed alone,
so results are bit-identical regardless of how many workers execute the pool
(``SMOOTHOPT_THREADS`` caps the worker count).  The summary CSV is written
once by a single writer after all runs finish, with full round-trip float
precision; per-run records are self-describing JSON documents written
atomically.

Wall-clock times live in the per-run records only: the summary CSV must
reproduce bit-for-bit across re-runs with identical seeds.
"""
from __future__ import annotations

import csv
import io
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
import numpy as np

from ..continuation import SmoothingPlan, geometric_widths, successive_smoothing
from ..optimizer import Schedule, StepRule, WidthRule, estimate_lipschitz, sgd_run
from ..penalty import Ball, Box, FeasibleSet, PenaltySpec, penalized_function
from ..problems import ProblemInstance, make_problem
from .config import RunConfig

__all__ = ["RunOutcome", "execute_config", "build_problem", "resolve_plan",
           "resolve_schedule", "CSV_COLUMNS", "worker_count"]

CSV_COLUMNS = [
    "problem", "n", "seed", "stages", "iterations_per_stage", "total_iterations",
    "batch_size", "Func. calc.", "Max. achived", "value_at_weighted_average",
    "Ideal value",
]


@dataclass
class RunOutcome:
    seed: int
    row: dict
    record: dict
    record_path: Path | None = None


def worker_count(n_runs: int) -> int:
    env = os.environ.get("SMOOTHOPT_THREADS")
    if env:
        return max(1, min(int(env), n_runs))
    return max(1, min(os.cpu_count() or 1, n_runs))


def _fmt(value) -> str:
    """Full round-trip precision for floats; plain text otherwise."""
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (np.floating,)):
        return repr(float(value))
    return str(value)


def build_problem(cfg: RunConfig) -> ProblemInstance:
    """Problem instance for a config, wrapping in a penalty when asked to."""
    params = dict(cfg.problem_params)
    n = params.pop("n", None)
    problem = make_problem(cfg.problem_name, n=n, **params)
    if cfg.constraint is None:
        return problem
    con = cfg.constraint
    if con["type"] == "ball":
        feasible: FeasibleSet = Ball(np.asarray(con["center"], dtype=float),
                                     float(con["radius"]))
    else:
        feasible = Box(np.asarray(con["lower"], dtype=float),
                       np.asarray(con["upper"], dtype=float))
    pen = con["penalty"]
    spec = PenaltySpec(kind=pen.get("kind", "distance"), M=float(pen.get("M", 10.0)),
                       anchor=pen.get("anchor"))
    base = problem.objective
    wrapped = penalized_function(base, feasible, spec)
    batch = None
    if spec.kind == "distance" and problem.objective_batch is not None:
        base_batch = problem.objective_batch

        def batch(X, _f=feasible, _b=base_batch, _M=spec.M):
            X = np.asarray(X, dtype=float)
            proj = _f.project(X)
            dist = np.linalg.norm(X - proj, axis=-1)
            return _b(proj) + _M * dist

    domain = feasible.inflated_box(0.1)
    return ProblemInstance(
        name=problem.name, dimension=problem.dimension,
        objective=wrapped, objective_batch=batch, domain=domain,
        sample_start=lambda rng: feasible.project(domain.sample(1, rng)[0]),
        report=problem.report, ideal_value=problem.ideal_value,
        lipschitz=None, parameters=problem.parameters,
    )


def _resolve_L(cfg: RunConfig, problem: ProblemInstance, scale: float) -> float:
    if problem.lipschitz is not None:
        return problem.lipschitz
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seeds[0], 0x11F5)))
    return estimate_lipschitz(
        problem.objective if problem.objective_batch is None else problem.objective_batch,
        problem.domain, scale, rng,
        vectorized=problem.objective_batch is not None)


def _step_rule(step: dict, *, h: float, D_auto: float, L: float, n: int, K: int,
               T: int) -> StepRule:
    kind = step["kind"]
    if kind == "constant":
        return StepRule.constant(float(step["rho"]))
    if kind == "constant-scaled":
        return StepRule.constant(float(step["alpha"]) * h / L)
    D = D_auto if step.get("D", "auto") == "auto" else float(step["D"])
    Lval = L if step.get("L", "auto") == "auto" else float(step["L"])
    C = float(step.get("C", 1.0))
    if kind == "sphere-decaying":
        return StepRule.sphere_decaying(D=D, L=Lval, n=n, K=K, C=C)
    if kind == "sphere-fixed":
        return StepRule.sphere_fixed(D=D, L=Lval, n=n, K=K, C=C, T=T)
    if kind == "gaussian-decaying":
        return StepRule.gaussian_decaying(D=D, L=Lval, n=n, K=K)
    if kind == "gaussian-fixed":
        return StepRule.gaussian_fixed(D=D, L=Lval, n=n, K=K, T=T)
    if kind == "gaussian-vanishing":
        return StepRule.gaussian_vanishing(D=D, L=Lval, n=n, K=K)
    raise ValueError(f"unsupported step kind {kind!r}")


def resolve_plan(cfg: RunConfig, problem: ProblemInstance) -> SmoothingPlan:
    """Turn the config's plan section into a concrete :class:`SmoothingPlan`."""
    lower, upper = problem.domain.bounding_box()
    diameter = float(np.linalg.norm(upper - lower))
    h0 = 0.5 * diameter if cfg.plan["h0"] == "auto" else float(cfg.plan["h0"])
    widths = geometric_widths(h0, int(cfg.plan["stages"]), float(cfg.plan["decay"]))
    L = _resolve_L(cfg, problem, scale=h0)
    steps = tuple(
        _step_rule(cfg.plan["step"], h=h, D_auto=2.0 * h, L=L, n=problem.dimension,
                   K=cfg.batch_size, T=cfg.iterations)
        for h in widths)
    return SmoothingPlan(widths=widths, steps=steps, iterations=cfg.iterations,
                         batch_size=cfg.batch_size, ravine_beta=float(cfg.plan["beta"]),
                         couple_widths=bool(cfg.plan["couple_widths"]))


def resolve_schedule(cfg: RunConfig, problem: ProblemInstance) -> Schedule:
    lower, upper = problem.domain.bounding_box()
    diameter = float(np.linalg.norm(upper - lower))
    width_cfg = cfg.schedule["width"]
    h_ref = float(width_cfg.get("h", 0.0)) or 0.5 * diameter
    L = _resolve_L(cfg, problem, scale=h_ref)
    step = _step_rule(cfg.schedule["step"], h=h_ref, D_auto=diameter, L=L,
                      n=problem.dimension, K=cfg.batch_size, T=cfg.iterations)
    if width_cfg["kind"] == "fixed":
        width = WidthRule.fixed(float(width_cfg["h"]))
    else:
        width = WidthRule.coupled(L=L, K=cfg.batch_size)
    return Schedule(step=step, width=width)


def _run_one(cfg: RunConfig, problem: ProblemInstance, seed: int,
             plan: SmoothingPlan | None, schedule: Schedule | None) -> RunOutcome:
    root = np.random.SeedSequence(seed)
    start_ss, opt_ss = root.spawn(2)
    if isinstance(cfg.start, str) and cfg.start == "auto":
        x0 = problem.sample_start(np.random.default_rng(start_ss))
    else:
        x0 = np.asarray(cfg.start, dtype=float)
    vectorized = problem.objective_batch is not None
    F = problem.objective_batch if vectorized else problem.objective
    rng = np.random.default_rng(opt_ss)
    t0 = time.perf_counter()

    if plan is not None:
        result = successive_smoothing(F, problem.domain, plan, cfg.kernel, x0, rng,
                                      vectorized=vectorized,
                                      record_trajectory=cfg.record_trajectory)
        stages = [{
            "index": s.index, "h": s.h,
            "start": s.start.tolist(),
            "returned_point": s.returned_point.tolist(),
            "best_value": s.best_value,
            "best_so_far": s.best_so_far,
            "wall_time": s.record.wall_time,
        } for s in result.stages]
        best_point, best_value = result.best_point, result.best_value
        final_avg = result.stages[-1].returned_point
        evaluations = result.evaluations
        n_stages = len(result.stages)
    else:
        record = sgd_run(F, problem.domain, x0, schedule, cfg.kernel, cfg.batch_size,
                         cfg.iterations, rng, vectorized=vectorized,
                         record_trajectory=cfg.record_trajectory)
        h = schedule.width.h if schedule.width.kind == "fixed" else None
        stages = [{
            "index": 0, "h": h,
            "start": x0.tolist(),
            "returned_point": record.weighted_average.tolist(),
            "best_value": record.best_value,
            "best_so_far": record.best_value,
            "wall_time": record.wall_time,
        }]
        best_point, best_value = record.best_point, record.best_value
        final_avg = record.weighted_average
        evaluations = record.evaluations
        n_stages = 1

    # one extra diagnostic evaluation, on top of the 2*K*T*stages accounting
    avg_value = float(problem.objective(final_avg))
    wall = time.perf_counter() - t0

    label_n = dict(problem.parameters).get("n", problem.dimension)
    row = {
        "problem": problem.name,
        "n": label_n,
        "seed": seed,
        "stages": n_stages,
        "iterations_per_stage": cfg.iterations,
        "total_iterations": cfg.iterations * n_stages,
        "batch_size": cfg.batch_size,
        "Func. calc.": evaluations,
        "Max. achived": problem.report(best_value),
        "value_at_weighted_average": problem.report(avg_value),
        "Ideal value": problem.ideal_value,
    }
    record_doc = {
        "format": "smoothopt-run/1",
        "config": cfg.raw,
        "seed": seed,
        "start": x0.tolist(),
        "stages": stages,
        "best_point": np.asarray(best_point).tolist(),
        "best_value": best_value,
        "reported_best": problem.report(best_value),
        "value_at_weighted_average": problem.report(avg_value),
        "evaluations": evaluations,
        "diagnostic_evaluations": 1,
        "wall_time": wall,
    }
    return RunOutcome(seed=seed, row=row, record=record_doc)


def _write_atomic(path: Path, text: str):
    tmp = path.with_name(f"{path.name}.tmp{os.getpid()}")
    tmp.write_text(text, encoding="utf-8", newline="")
    os.replace(tmp, path)


def execute_config(cfg: RunConfig) -> tuple[Path, list[RunOutcome]]:
    """Run every seed of a config; returns the CSV path and per-run outcomes."""
    problem = build_problem(cfg)
    plan = resolve_plan(cfg, problem) if cfg.plan is not None else None
    schedule = resolve_schedule(cfg, problem) if cfg.schedule is not None else None

    outcomes: list[RunOutcome] = []
    workers = worker_count(len(cfg.seeds))
    if workers == 1:
        for seed in cfg.seeds:
            outcomes.append(_run_one(cfg, problem, seed, plan, schedule))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_one, cfg, problem, seed, plan, schedule)
                       for seed in cfg.seeds]
            outcomes = [f.result() for f in futures]
    outcomes.sort(key=lambda o: o.seed)

    out_dir = Path(cfg.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    label_n = dict(problem.parameters).get("n", problem.dimension)
    for outcome in outcomes:
        path = out_dir / f"run-{problem.name}-n{label_n}-seed{outcome.seed}.json"
        _write_atomic(path, json.dumps(outcome.record, indent=2) + "\n")
        outcome.record_path = path

    buf = io.StringIO()
    writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
    writer.writerow(CSV_COLUMNS)
    for outcome in outcomes:
        writer.writerow([_fmt(outcome.row[c]) for c in CSV_COLUMNS])
    csv_path = out_dir / "results.csv"
    _write_atomic(csv_path, buf.getvalue())
    return csv_path, outcomes
