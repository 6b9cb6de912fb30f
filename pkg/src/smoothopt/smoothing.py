"""Kernel smoothing and two-point stochastic finite-difference gradients.

A function ``F`` is smoothed by averaging over a width-``h`` probability
kernel, ``F_h(x) = E F(x + h*z)``.  Two kernels are supported:

* ``"sphere"`` -- directions uniform on the unit Euclidean sphere; the
  smoothing measure is uniform on the unit *ball* (the classical averaged
  function), and the symmetric two-point sample
  ``(F(x+h*y) - F(x-h*y)) / (2h) * y`` times the dimension ``n`` is an
  unbiased estimate of ``grad F_h(x)``.
* ``"gaussian"`` -- standard normal directions; the same two-point sample is
  already unbiased for ``grad F_h(x)`` without rescaling.

Only the symmetric (central) difference is implemented; it has lower variance
than the one-sided form and matches the step-size theory in
:mod:`smoothopt.optimizer`.

Batch samples are independent, so probe evaluations may run concurrently:
directions are drawn centrally before any evaluation, hence results do not
depend on how the probes are scheduled.  Objectives must tolerate concurrent
calls if the caller parallelizes them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "Kernel",
    "GradientEstimate",
    "SmoothedValue",
    "EvaluationError",
    "sample_direction",
    "grad_estimate",
    "smoothed_value",
    "second_moment_check",
]

_VARIANTS = ("sphere", "gaussian")


class EvaluationError(RuntimeError):
    """The objective returned a non-finite value at a probe point.

    Samples are never silently dropped -- that would bias the estimator -- so
    the first bad value aborts the whole estimate.  ``point`` and ``value``
    identify the offending probe; ``iteration`` and ``stage`` are filled in by
    the optimizer and continuation layers as the error propagates.
    """

    def __init__(self, point, value, iteration=None, stage=None):
        self.point = np.asarray(point, dtype=float)
        self.value = value
        self.iteration = iteration
        self.stage = stage
        super().__init__(self._message())

    def _message(self):
        msg = f"objective returned non-finite value {self.value!r} at {self.point!r}"
        if self.iteration is not None:
            msg += f" (iteration {self.iteration})"
        if self.stage is not None:
            msg += f" (stage {self.stage})"
        return msg

    def with_context(self, iteration=None, stage=None) -> "EvaluationError":
        err = EvaluationError(self.point, self.value,
                              iteration if iteration is not None else self.iteration,
                              stage if stage is not None else self.stage)
        return err


@dataclass(frozen=True)
class Kernel:
    """Smoothing distribution: a direction law plus a width ``h > 0``."""

    variant: str
    h: float

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown kernel variant {self.variant!r}; expected one of {_VARIANTS}")
        if not self.h > 0:
            raise ValueError("kernel width h must be positive")

    @classmethod
    def sphere(cls, h: float) -> "Kernel":
        return cls("sphere", h)

    @classmethod
    def gaussian(cls, h: float) -> "Kernel":
        return cls("gaussian", h)

    def with_width(self, h: float) -> "Kernel":
        return Kernel(self.variant, h)

    def sample_directions(self, dimension: int, count: int, rng: np.random.Generator) -> np.ndarray:
        """Draw `count` finite-difference directions, shape ``(count, dimension)``."""
        if dimension < 1:
            raise ValueError("dimension must be at least 1")
        g = rng.standard_normal((count, dimension))
        if self.variant == "gaussian":
            return g
        norms = np.linalg.norm(g, axis=1, keepdims=True)
        # a zero draw has probability zero; resample defensively anyway
        while np.any(norms == 0.0):
            bad = norms[:, 0] == 0.0
            g[bad] = rng.standard_normal((int(bad.sum()), dimension))
            norms = np.linalg.norm(g, axis=1, keepdims=True)
        return g / norms

    def sample_smoothing_points(self, dimension: int, count: int, rng: np.random.Generator) -> np.ndarray:
        """Draw from the smoothing measure itself: ball-uniform for the sphere
        variant (directions scaled by ``U**(1/n)``), standard normal otherwise."""
        z = self.sample_directions(dimension, count, rng)
        if self.variant == "sphere":
            z = z * (rng.random(count) ** (1.0 / dimension))[:, None]
        return z

    def gradient_scale(self, dimension: int) -> float:
        """Factor turning the raw two-point average into an unbiased gradient."""
        return float(dimension) if self.variant == "sphere" else 1.0


@dataclass(frozen=True)
class GradientEstimate:
    """Two-point batch estimate of a smoothed gradient.

    ``direction`` is the raw batch average consumed by the SGD recursion (its
    step-size theory absorbs the sphere kernel's ``1/n`` factor);
    ``unbiased_gradient`` is the rescaled estimate of ``grad F_h`` for
    diagnostics.
    """

    direction: np.ndarray
    unbiased_gradient: np.ndarray
    samples_used: int
    h: float


@dataclass(frozen=True)
class SmoothedValue:
    value: float
    std_error: float
    samples: int


def sample_direction(kernel: Kernel, dimension: int, rng: np.random.Generator) -> np.ndarray:
    """One direction from the kernel's law; deterministic given the stream state."""
    return kernel.sample_directions(dimension, 1, rng)[0]


def _evaluate(F: Callable, points: np.ndarray, vectorized: bool) -> np.ndarray:
    """Evaluate ``F`` at stacked points, guarding against non-finite output."""
    if vectorized:
        vals = np.asarray(F(points), dtype=float)
    else:
        vals = np.array([float(F(p)) for p in points], dtype=float)
    if vals.shape != (points.shape[0],):
        raise ValueError(f"objective returned shape {vals.shape}, expected ({points.shape[0]},)")
    bad = ~np.isfinite(vals)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise EvaluationError(points[i], vals[i])
    return vals


def _two_point_batch(F, x, kernel, K, rng, vectorized):
    """Shared sampling core: directions plus the two probe batches."""
    x = np.asarray(x, dtype=float)
    Y = kernel.sample_directions(x.size, K, rng)
    plus = x + kernel.h * Y
    minus = x - kernel.h * Y
    f_plus = _evaluate(F, plus, vectorized)
    f_minus = _evaluate(F, minus, vectorized)
    return Y, plus, minus, f_plus, f_minus


def grad_estimate(F: Callable, x, kernel: Kernel, K: int, rng: np.random.Generator,
                  *, vectorized: bool = False) -> GradientEstimate:
    """Batch two-point estimate of the smoothed gradient at ``x``.

    Performs exactly ``2 * K`` objective evaluations (the probe points
    ``x +- h*y`` for ``K`` independent directions ``y``).  With `vectorized`
    the objective receives the probes stacked as an ``(m, n)`` array and must
    return ``m`` values; the evaluation count is unchanged.
    """
    if K < 1:
        raise ValueError("batch size K must be at least 1")
    x = np.asarray(x, dtype=float)
    Y, _, _, f_plus, f_minus = _two_point_batch(F, x, kernel, K, rng, vectorized)
    quotients = (f_plus - f_minus) / (2.0 * kernel.h)
    direction = (quotients[:, None] * Y).mean(axis=0)
    scale = kernel.gradient_scale(x.size)
    return GradientEstimate(direction=direction,
                            unbiased_gradient=scale * direction,
                            samples_used=K,
                            h=kernel.h)


def smoothed_value(F: Callable, x, kernel: Kernel, N: int, rng: np.random.Generator,
                   *, vectorized: bool = False) -> SmoothedValue:
    """Monte-Carlo estimate of ``F_h(x) = E F(x + h*z)`` with its standard error.

    The sphere kernel draws ``z`` uniformly in the unit ball (not on the
    sphere): that is the measure whose gradient the two-point sphere estimator
    targets.  Exactly ``N`` objective evaluations are performed.
    """
    if N < 1:
        raise ValueError("sample count N must be at least 1")
    x = np.asarray(x, dtype=float)
    Z = kernel.sample_smoothing_points(x.size, N, rng)
    vals = _evaluate(F, x + kernel.h * Z, vectorized)
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / np.sqrt(N)) if N > 1 else float("nan")
    return SmoothedValue(value=mean, std_error=se, samples=N)


def second_moment_check(F: Callable, x, kernel: Kernel, K_probe: int, rng: np.random.Generator,
                        *, vectorized: bool = False) -> float:
    """Empirical mean of the squared norm of single two-point samples.

    Estimates ``E || (F(x+h*y) - F(x-h*y)) / (2h) * y ||^2`` over `K_probe`
    independent directions; used to check the kernel-dependent variance bounds
    of the step-size theory.
    """
    if K_probe < 1:
        raise ValueError("K_probe must be at least 1")
    x = np.asarray(x, dtype=float)
    Y, _, _, f_plus, f_minus = _two_point_batch(F, x, kernel, K_probe, rng, vectorized)
    quotients = (f_plus - f_minus) / (2.0 * kernel.h)
    sq_norms = quotients ** 2 * (Y ** 2).sum(axis=1)
    return float(sq_norms.mean())
