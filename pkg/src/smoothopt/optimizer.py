"""Projected stochastic finite-difference gradient descent with averaging.

The iterate recursion is ``x_{t+1} = project_X(x_t - rho_t * eta_t)`` where
``eta_t`` is the *raw* batch two-point direction from
:mod:`smoothopt.smoothing` (the step-size rules are calibrated to it) and
``X`` is a compact convex set supplied by the caller.  ``X`` is distinct from
the feasible set of the original constrained problem: the penalized objective
must be allowed to be active inside ``X``.

Step-size and smoothing-width rules follow the known convergence guarantees
for convex Lipschitz objectives; :func:`rate_bound` evaluates the matching
right-hand sides so empirical rates can be checked against them.

A run is inherently sequential in ``t``; the ``K`` probes within an iteration
may be evaluated concurrently (directions are pre-drawn), and independent
seeds parallelize freely.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .penalty import FeasibleSet
from .smoothing import EvaluationError, Kernel, _two_point_batch

__all__ = [
    "StepRule",
    "WidthRule",
    "Schedule",
    "RunRecord",
    "schedule_values",
    "rate_bound",
    "sgd_run",
    "estimate_lipschitz",
    "ITERATE_TOL",
]

# Iterates are considered inside X up to this projection tolerance.
ITERATE_TOL = 1e-9

_STEP_KINDS = ("constant", "sphere-fixed", "sphere-decaying", "gaussian-fixed", "gaussian-decaying", "gaussian-vanishing")
_BOUND_KINDS = ("sphere-fixed", "sphere-decaying", "sphere-vanishing", "gaussian-fixed", "gaussian-decaying", "gaussian-vanishing")


@dataclass(frozen=True)
class StepRule:
    """Step-size sequence ``rho_t``.

    ``constant`` uses a user value.  The ``t2-*`` rules are tuned for
    sphere-direction estimates, the ``t3-*`` rules for Gaussian ones:

    * ``sphere-fixed``      ``rho   = D*sqrt(n*K) / (L*sqrt(2*T*(C + K/n)))``
    * ``sphere-decaying``   ``rho_t = D*sqrt(n*K) / (L*sqrt(2*t*(C + K/n)))``
    * ``gaussian-fixed``      ``rho   = D / (L*sqrt(2*T*(1 + (n-1)/K)))``
    * ``gaussian-decaying``   ``rho_t = D / (L*sqrt(2*t*(1 + (n-1)/K)))``
    * ``gaussian-vanishing``  ``rho_t = D / (L*sqrt(t*(1 + (n+3)/K)))``

    ``D`` bounds the norm of the projection set, ``L`` is the Lipschitz
    constant, ``n`` the dimension, ``K`` the batch size, ``C`` the sphere
    second-moment constant.  Fixed rules need the horizon ``T`` and reject
    queries beyond it.
    """

    kind: str
    rho: float | None = None
    D: float | None = None
    L: float | None = None
    n: int | None = None
    K: int | None = None
    C: float = 1.0
    T: int | None = None

    def __post_init__(self):
        if self.kind not in _STEP_KINDS:
            raise ValueError(f"unknown step rule {self.kind!r}; expected one of {_STEP_KINDS}")
        if self.kind == "constant":
            if self.rho is None or not self.rho > 0:
                raise ValueError("constant step rule needs rho > 0")
            return
        for name in ("D", "L", "n", "K"):
            v = getattr(self, name)
            if v is None or not v > 0:
                raise ValueError(f"step rule {self.kind!r} needs {name} > 0")
        if not self.C > 0:
            raise ValueError("C must be positive")
        if self.kind.endswith("-fixed") and (self.T is None or self.T < 1):
            raise ValueError(f"step rule {self.kind!r} needs a horizon T >= 1")

    @classmethod
    def constant(cls, rho: float) -> "StepRule":
        return cls("constant", rho=rho)

    @classmethod
    def sphere_fixed(cls, D, L, n, K, C=1.0, T=None) -> "StepRule":
        return cls("sphere-fixed", D=D, L=L, n=n, K=K, C=C, T=T)

    @classmethod
    def sphere_decaying(cls, D, L, n, K, C=1.0) -> "StepRule":
        return cls("sphere-decaying", D=D, L=L, n=n, K=K, C=C)

    @classmethod
    def gaussian_fixed(cls, D, L, n, K, T=None) -> "StepRule":
        return cls("gaussian-fixed", D=D, L=L, n=n, K=K, T=T)

    @classmethod
    def gaussian_decaying(cls, D, L, n, K) -> "StepRule":
        return cls("gaussian-decaying", D=D, L=L, n=n, K=K)

    @classmethod
    def gaussian_vanishing(cls, D, L, n, K) -> "StepRule":
        return cls("gaussian-vanishing", D=D, L=L, n=n, K=K)

    def value(self, t: int) -> float:
        if t < 1:
            raise ValueError("iteration index t starts at 1")
        if self.kind == "constant":
            return self.rho
        if self.kind.endswith("-fixed"):
            if t > self.T:
                raise ValueError(f"step rule {self.kind!r} defined for t <= T = {self.T}, got t = {t}")
            tau = self.T
        else:
            tau = t
        if self.kind.startswith("t2"):
            return self.D * np.sqrt(self.n * self.K) / (
                self.L * np.sqrt(2.0 * tau * (self.C + self.K / self.n)))
        if self.kind == "gaussian-vanishing":
            return self.D / (self.L * np.sqrt(tau * (1.0 + (self.n + 3.0) / self.K)))
        return self.D / (self.L * np.sqrt(2.0 * tau * (1.0 + (self.n - 1.0) / self.K)))


@dataclass(frozen=True)
class WidthRule:
    """Smoothing width ``h_t``: fixed, or coupled as ``h_t = L * rho_t / K``."""

    kind: str
    h: float | None = None
    L: float | None = None
    K: int | None = None

    def __post_init__(self):
        if self.kind not in ("fixed", "coupled"):
            raise ValueError("width rule must be 'fixed' or 'coupled'")
        if self.kind == "fixed" and (self.h is None or not self.h > 0):
            raise ValueError("fixed width rule needs h > 0")

    @classmethod
    def fixed(cls, h: float) -> "WidthRule":
        return cls("fixed", h=h)

    @classmethod
    def coupled(cls, L: float | None = None, K: int | None = None) -> "WidthRule":
        return cls("coupled", L=L, K=K)


@dataclass(frozen=True)
class Schedule:
    """A step rule paired with a width rule."""

    step: StepRule
    width: WidthRule

    def values(self, t: int) -> tuple[float, float]:
        rho = self.step.value(t)
        if self.width.kind == "fixed":
            return rho, self.width.h
        L = self.width.L if self.width.L is not None else self.step.L
        K = self.width.K if self.width.K is not None else self.step.K
        if L is None or K is None:
            raise ValueError("coupled width rule needs L and K (directly or from the step rule)")
        return rho, L * rho / K


def schedule_values(schedule: Schedule, t: int) -> tuple[float, float]:
    """Step size and smoothing width ``(rho_t, h_t)`` at iteration ``t >= 1``."""
    return schedule.values(t)


def rate_bound(which: str, *, D: float, L: float, n: int, K: int, C: float = 1.0,
                  t: int) -> float:
    """Right-hand side of the convergence guarantee for the named regime.

    ``t`` is the horizon ``T`` for the fixed-step forms and the current
    iteration for the decaying/vanishing forms (which are undefined at
    ``t = 1`` where ``sqrt(t) - 1`` vanishes).  The ``*-vanishing`` forms
    bound the gap of the *unsmoothed* objective under coupled widths; the
    others bound the gap of ``F_h``.
    """
    if which not in _BOUND_KINDS:
        raise ValueError(f"unknown bound {which!r}; expected one of {_BOUND_KINDS}")
    for name, v in (("D", D), ("L", L), ("n", n), ("K", K), ("C", C)):
        if not v > 0:
            raise ValueError(f"{name} must be positive")
    if which.endswith("-fixed"):
        if t < 1:
            raise ValueError("horizon t must be at least 1")
        if which == "sphere-fixed":
            return (L * D / np.sqrt(t)) * np.sqrt(2.0 * n / K) * np.sqrt(C + K / n)
        return (L * D / np.sqrt(t)) * np.sqrt(2.0 * (1.0 + (n - 1.0) / K))
    if t < 2:
        raise ValueError(f"bound {which!r} is undefined for t < 2 (sqrt(t) - 1 vanishes at t = 1)")
    tail = (2.0 + np.log(t)) / (np.sqrt(t) - 1.0)
    if which == "sphere-decaying":
        return (D * L / np.sqrt(2.0)) * np.sqrt(n / K) * np.sqrt(C + K / n) * tail
    if which == "sphere-vanishing":
        return (D * L / 2.0) * np.sqrt(n / K) * np.sqrt(2.0 + C + K / n) * tail
    if which == "gaussian-decaying":
        return L * D * np.sqrt(2.0) * np.sqrt(1.0 + (n - 1.0) / K) * tail
    return (D * L / 2.0) * np.sqrt(1.0 + (n + 3.0) / K) * tail


@dataclass
class RunRecord:
    """Reproducible summary of one SGD run.

    ``best_point``/``best_value`` track the minimum over all probe evaluations
    already paid for by the estimator (no extra objective calls).  The best
    value need not dominate the value at either average; averaging and best
    tracking answer different questions.  ``trajectory`` holds the visited
    iterates ``x_1..x_T`` when requested.
    """

    x_first: np.ndarray
    x_last: np.ndarray
    plain_average: np.ndarray
    weighted_average: np.ndarray
    best_point: np.ndarray
    best_value: float
    evaluations: int
    iterations: int
    seed: int | None
    wall_time: float
    trajectory: np.ndarray | None = None


def _as_rng(rng) -> tuple[np.random.Generator, int | None]:
    if isinstance(rng, np.random.Generator):
        return rng, None
    seed = int(rng) if isinstance(rng, (int, np.integer)) else None
    return np.random.default_rng(rng), seed


def sgd_run(F: Callable, X: FeasibleSet, x1, schedule: Schedule, kernel: str | Kernel,
            K: int, T: int, rng, *, vectorized: bool = False,
            record_trajectory: bool = False) -> RunRecord:
    """Run ``T`` projected two-point SGD steps from ``x1`` inside ``X``.

    ``F`` must be defined on all probe points ``x_t +- h_t * y`` (probes may
    leave ``X``; a penalized objective is total).  Returns the plain average
    ``mean(x_1..x_T)``, the step-weighted average ``sum(rho_t x_t)/sum(rho_t)``
    and the best probe seen.  Exactly ``2*K*T`` objective evaluations are
    performed, and identical seeds reproduce the record bit for bit.
    """
    if T < 1:
        raise ValueError("iteration count T must be at least 1")
    if K < 1:
        raise ValueError("batch size K must be at least 1")
    x = np.asarray(x1, dtype=float).copy()
    if not np.all(np.isfinite(x)) or X.distance(x) > ITERATE_TOL:
        raise ValueError("starting point x1 must lie in the projection set X")
    variant = kernel.variant if isinstance(kernel, Kernel) else str(kernel)
    gen, seed = _as_rng(rng)

    start = time.perf_counter()
    dim = x.size
    sum_x = np.zeros(dim)
    sum_rho_x = np.zeros(dim)
    sum_rho = 0.0
    best_value = np.inf
    best_point = x.copy()
    x_first = x.copy()
    traj = np.empty((T, dim)) if record_trajectory else None

    for t in range(1, T + 1):
        rho, h = schedule.values(t)
        if record_trajectory:
            traj[t - 1] = x
        sum_x += x
        sum_rho_x += rho * x
        sum_rho += rho
        kern = Kernel(variant, h)
        try:
            Y, plus, minus, f_plus, f_minus = _two_point_batch(F, x, kern, K, gen, vectorized)
        except EvaluationError as err:
            raise err.with_context(iteration=t) from None
        # best-point tracking reuses the probe evaluations already performed
        i_p = int(np.argmin(f_plus))
        if f_plus[i_p] < best_value:
            best_value = float(f_plus[i_p])
            best_point = plus[i_p].copy()
        i_m = int(np.argmin(f_minus))
        if f_minus[i_m] < best_value:
            best_value = float(f_minus[i_m])
            best_point = minus[i_m].copy()
        quotients = (f_plus - f_minus) / (2.0 * h)
        eta = (quotients[:, None] * Y).mean(axis=0)
        x = X.project(x - rho * eta)

    return RunRecord(
        x_first=x_first,
        x_last=x,
        plain_average=sum_x / T,
        weighted_average=sum_rho_x / sum_rho,
        best_point=best_point,
        best_value=best_value,
        evaluations=2 * K * T,
        iterations=T,
        seed=seed,
        wall_time=time.perf_counter() - start,
        trajectory=traj,
    )


def estimate_lipschitz(F: Callable, region: FeasibleSet, scale: float,
                       rng, *, samples: int = 1000, safety: float = 1.5,
                       vectorized: bool = False) -> float:
    """Estimate a Lipschitz constant from random symmetric difference quotients.

    Draws `samples` base points in `region` and sphere directions, takes the
    largest quotient ``|F(x + scale*y) - F(x - scale*y)| / (2*scale)`` and
    multiplies by `safety`.  An estimate at the smoothing scale of interest is
    what the step-size rules need.
    """
    if not scale > 0:
        raise ValueError("scale must be positive")
    gen, _ = _as_rng(rng)
    pts = region.sample(samples, gen)
    dirs = Kernel.sphere(scale).sample_directions(pts.shape[1], samples, gen)
    plus = pts + scale * dirs
    minus = pts - scale * dirs
    if vectorized:
        vals_p = np.asarray(F(plus), dtype=float)
        vals_m = np.asarray(F(minus), dtype=float)
    else:
        vals_p = np.array([float(F(p)) for p in plus])
        vals_m = np.array([float(F(p)) for p in minus])
    quotients = np.abs(vals_p - vals_m) / (2.0 * scale)
    if not np.all(np.isfinite(quotients)):
        i = int(np.argmax(~np.isfinite(quotients)))
        raise EvaluationError(plus[i], vals_p[i])
    return safety * float(quotients.max())
