"""Run configuration: one structured YAML file, validated with line anchors.

A config chooses a problem, a kernel, seeds, an evaluation budget, an output
directory, and either a multi-stage smoothing ``plan`` or a single-stage
``schedule``.  Every default from the library is overridable here so that a
config file is the single source of truth for a reproducible run.

Example::

    problem: {name: polygon, n: 3}
    kernel: sphere
    seeds: {master: 42, count: 10}     # or an explicit list [1, 2, 3]
    budget: 100000
    output: out/
    iterations: 150                    # T per stage
    batch_size: 2                      # K
    plan:
      h0: auto                         # half the diameter of the projection set
      stages: 11
      decay: 0.5
      beta: 1.0
      step: {kind: constant-scaled, alpha: 0.1}
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..problems import problem_names

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config"]

_KERNELS = ("sphere", "gaussian")
_PLAN_STEP_KINDS = ("constant", "constant-scaled", "sphere-decaying", "gaussian-decaying")
_SCHEDULE_STEP_KINDS = ("constant", "sphere-fixed", "sphere-decaying", "gaussian-fixed",
                        "gaussian-decaying", "gaussian-vanishing")


class ConfigError(ValueError):
    """Invalid configuration; carries the offending key path and source line."""

    def __init__(self, message: str, path: str = "", line: int | None = None,
                 filename: str | None = None):
        self.path = path
        self.line = line
        self.filename = filename
        anchor = ""
        if filename is not None:
            anchor = f"{filename}:"
            if line is not None:
                anchor += f"{line}:"
            anchor += " "
        where = f"{path}: " if path else ""
        super().__init__(f"{anchor}{where}{message}")


def _line_map(text: str) -> dict[str, int]:
    """Map ``a.b[2].c`` key paths to 1-based source lines."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return {}
    lines: dict[str, int] = {}

    def walk(node, path):
        lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                sub = f"{path}.{key.value}" if path else str(key.value)
                lines.setdefault(sub, key.start_mark.line + 1)
                walk(value, sub)
        elif isinstance(node, yaml.SequenceNode):
            for i, value in enumerate(node.value):
                walk(value, f"{path}[{i}]")

    if root is not None:
        walk(root, "")
    return lines


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration (see module docstring for the file format)."""

    problem_name: str
    problem_params: dict
    kernel: str
    seeds: tuple[int, ...]
    budget: int
    output: str
    iterations: int
    batch_size: int
    plan: dict | None
    schedule: dict | None
    constraint: dict | None = None
    start: Any = "auto"
    record_trajectory: bool = False
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def stages(self) -> int:
        return int(self.plan["stages"]) if self.plan is not None else 1

    @property
    def planned_evaluations(self) -> int:
        return 2 * self.batch_size * self.iterations * self.stages


class _Checker:
    def __init__(self, data: dict, lines: dict[str, int], filename: str | None):
        self.data = data
        self.lines = lines
        self.filename = filename

    def fail(self, path: str, message: str):
        raise ConfigError(message, path=path, line=self.lines.get(path),
                          filename=self.filename)

    def get(self, path: str, default=None, required=False):
        node: Any = self.data
        for part in path.split("."):
            if not isinstance(node, dict) or part not in node:
                if required:
                    self.fail(path, "required key is missing")
                return default
            node = node[part]
        return node

    def number(self, path: str, *, default=None, required=False, minimum=None,
               integer=False, allow_auto=False):
        value = self.get(path, default=default, required=required)
        if value is None:
            return None
        if allow_auto and value == "auto":
            return "auto"
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(path, f"expected a number, got {value!r}")
        if integer and int(value) != value:
            self.fail(path, f"expected an integer, got {value!r}")
        if minimum is not None and value < minimum:
            self.fail(path, f"must be at least {minimum}, got {value!r}")
        return int(value) if integer else float(value)


def parse_config(data: dict, *, lines: dict[str, int] | None = None,
                 filename: str | None = None) -> RunConfig:
    """Validate a parsed mapping; raise :class:`ConfigError` on any defect."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping", filename=filename)
    c = _Checker(data, lines or {}, filename)

    known = {"problem", "kernel", "seeds", "budget", "output", "iterations",
             "batch_size", "plan", "schedule", "constraint", "start",
             "record_trajectory"}
    for key in data:
        if key not in known:
            c.fail(str(key), f"unknown key (known keys: {sorted(known)})")

    name = c.get("problem.name", required=True)
    if name not in problem_names():
        c.fail("problem.name", f"unknown problem {name!r}; known: {problem_names()}")
    problem_params = {k: v for k, v in c.get("problem", {}).items() if k != "name"}
    if name == "polygon":
        c.number("problem.n", required=True, integer=True, minimum=3)

    kernel = c.get("kernel", default="sphere")
    if kernel not in _KERNELS:
        c.fail("kernel", f"kernel must be one of {_KERNELS}, got {kernel!r}")

    seeds_raw = c.get("seeds", required=True)
    if isinstance(seeds_raw, dict):
        master = c.number("seeds.master", required=True, integer=True, minimum=0)
        count = c.number("seeds.count", required=True, integer=True, minimum=1)
        seeds = tuple(master + i for i in range(count))
    elif isinstance(seeds_raw, list):
        if not seeds_raw:
            c.fail("seeds", "seed list must be non-empty")
        for i, s in enumerate(seeds_raw):
            if isinstance(s, bool) or not isinstance(s, int):
                c.fail(f"seeds[{i}]", f"seeds must be integers, got {s!r}")
        seeds = tuple(int(s) for s in seeds_raw)
    else:
        c.fail("seeds", "seeds must be a list or {master, count}")

    budget = c.number("budget", required=True, integer=True, minimum=1)
    output = c.get("output", default="smoothopt-out")
    iterations = c.number("iterations", required=True, integer=True, minimum=1)
    batch_size = c.number("batch_size", default=1, integer=True, minimum=1)

    plan = c.get("plan")
    schedule = c.get("schedule")
    if (plan is None) == (schedule is None):
        c.fail("plan", "exactly one of 'plan' and 'schedule' must be given")

    if plan is not None:
        plan = dict(plan)
        c.number("plan.h0", default="auto", allow_auto=True, minimum=0.0)
        plan.setdefault("h0", "auto")
        plan["stages"] = c.number("plan.stages", default=11, integer=True, minimum=1)
        plan["decay"] = c.number("plan.decay", default=0.5)
        if not 0 < plan["decay"] < 1:
            c.fail("plan.decay", f"decay must lie in (0, 1), got {plan['decay']!r}")
        plan["beta"] = c.number("plan.beta", default=1.0, minimum=0.0)
        plan.setdefault("couple_widths", False)
        step = plan.get("step", {"kind": "sphere-decaying"})
        plan["step"] = _check_step(c, "plan.step", step, _PLAN_STEP_KINDS)

    if schedule is not None:
        schedule = dict(schedule)
        schedule["step"] = _check_step(c, "schedule.step",
                                       c.get("schedule.step", required=True),
                                       _SCHEDULE_STEP_KINDS)
        width = c.get("schedule.width", required=True)
        if not isinstance(width, dict) or width.get("kind") not in ("fixed", "coupled"):
            c.fail("schedule.width", "width must be {kind: fixed, h: ...} or {kind: coupled}")
        if width["kind"] == "fixed":
            c.number("schedule.width.h", required=True, minimum=0.0)
        schedule["width"] = dict(width)

    stages = int(plan["stages"]) if plan is not None else 1
    needed = 2 * batch_size * iterations * stages
    if budget < needed:
        c.fail("budget", f"evaluation budget {budget} is below 2*K*T*stages = {needed}")

    constraint = c.get("constraint")
    if constraint is not None:
        if name == "polygon":
            c.fail("constraint", "the polygon problem carries its own penalties")
        ctype = c.get("constraint.type")
        if ctype not in ("box", "ball"):
            c.fail("constraint.type", f"constraint type must be 'box' or 'ball', got {ctype!r}")
        if ctype == "ball":
            c.get("constraint.center", required=True)
            c.number("constraint.radius", required=True, minimum=0.0)
        else:
            c.get("constraint.lower", required=True)
            c.get("constraint.upper", required=True)
        pen = c.get("constraint.penalty", default={"kind": "distance", "M": 10.0})
        if pen.get("kind", "distance") not in ("distance", "constraint-sum", "ray-retraction"):
            c.fail("constraint.penalty.kind", f"unknown penalty kind {pen.get('kind')!r}")
        constraint = dict(constraint, penalty=dict(pen))

    start = c.get("start", default="auto")
    record_trajectory = bool(c.get("record_trajectory", default=False))

    return RunConfig(
        problem_name=name,
        problem_params=problem_params,
        kernel=kernel,
        seeds=seeds,
        budget=int(budget),
        output=str(output),
        iterations=int(iterations),
        batch_size=int(batch_size),
        plan=plan,
        schedule=schedule,
        constraint=constraint,
        start=start,
        record_trajectory=record_trajectory,
        raw=data,
    )


def _check_step(c: _Checker, path: str, step, allowed) -> dict:
    if not isinstance(step, dict) or "kind" not in step:
        c.fail(path, "step rule must be a mapping with a 'kind'")
    kind = step["kind"]
    if kind not in allowed:
        c.fail(f"{path}.kind", f"step kind must be one of {allowed}, got {kind!r}")
    out = dict(step)
    if kind == "constant":
        c.number(f"{path}.rho", required=True, minimum=0.0)
    elif kind == "constant-scaled":
        out.setdefault("alpha", 0.1)
        c.number(f"{path}.alpha", default=0.1, minimum=0.0)
    else:
        for field_name in ("D", "L"):
            out.setdefault(field_name, "auto")
            c.number(f"{path}.{field_name}", default="auto", allow_auto=True, minimum=0.0)
        out.setdefault("C", 1.0)
        c.number(f"{path}.C", default=1.0, minimum=0.0)
    return out


def load_config(path: str | Path) -> RunConfig:
    """Parse and validate a YAML config file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", filename=str(path)) from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        line = None
        mark = getattr(exc, "problem_mark", None)
        if mark is not None:
            line = mark.line + 1
        raise ConfigError(f"invalid YAML: {exc}", line=line, filename=str(path)) from None
    if data is None:
        raise ConfigError("config file is empty", filename=str(path))
    return parse_config(data, lines=_line_map(text), filename=str(path))
