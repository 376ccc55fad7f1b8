"""Empirical-measure distances and weak-convergence diagnostics for orbital measures.

Orbital measures live on an infinite product space; they are probed here
through one-dimensional pushforwards under scalar observables, compared with
the Wasserstein-1 distance or a grid estimate of the Levy-Prohorov distance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .haar import (
    Observable,
    OrbitalAverage,
    _mean_stderr,
    as_generator,
    orbital_values,
    register_observable,
)
from .matrix_core import MatrixPrefix

__all__ = [
    "EmpiricalMeasure",
    "WindowMetric",
    "w1_distance",
    "levy_prohorov_estimate",
    "RecurrenceEstimate",
    "recurrence_estimate",
    "recurrence_from_values",
    "DiagnosticConfig",
    "Precompactness",
    "precompactness_diagnostic",
    "precompactness_from_values",
    "default_test_family",
    "CAUCHY",
    "ESCAPING",
    "INCONCLUSIVE",
]


class EmpiricalMeasure:
    """Uniform measure on a finite sample of reals, stored sorted."""

    def __init__(self, samples: Iterable[float]):
        s = np.sort(np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples,
                               dtype=float).ravel())
        if s.size < 1:
            raise ValueError("an empirical measure needs at least one sample")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must be finite")
        s.setflags(write=False)
        self.samples = s

    @property
    def count(self) -> int:
        return self.samples.size

    def cdf(self, x) -> np.ndarray:
        """Right-continuous distribution function."""
        return np.searchsorted(self.samples, x, side="right") / self.count

    @property
    def mean(self) -> float:
        return float(np.mean(self.samples))

    def __repr__(self):
        return f"EmpiricalMeasure(count={self.count})"


def w1_distance(a: EmpiricalMeasure, b: EmpiricalMeasure) -> float:
    """Wasserstein-1 distance, the integral of ``|F_a - F_b|``."""
    if a.count == b.count:
        return float(np.mean(np.abs(a.samples - b.samples)))
    pts = np.concatenate([a.samples, b.samples])
    pts.sort()
    widths = np.diff(pts)
    gap = np.abs(a.cdf(pts[:-1]) - b.cdf(pts[:-1]))
    return float(np.dot(gap, widths))


def _lp_holds(a: EmpiricalMeasure, b: EmpiricalMeasure, eps: float) -> bool:
    # Both one-sided conditions are step functions; their suprema sit on atoms.
    slack = eps + 1e-12
    if np.any(a.cdf(a.samples) - b.cdf(a.samples + eps) > slack):
        return False
    return not np.any(b.cdf(b.samples) - a.cdf(b.samples + eps) > slack)


def levy_prohorov_estimate(a: EmpiricalMeasure, b: EmpiricalMeasure, grid: float | None = None) -> float:
    """Smallest grid value ``eps`` with ``F_a(x - eps) - eps <= F_b(x) <= F_a(x + eps) + eps``.

    ``grid`` is the step of the ``eps`` grid; it defaults to ``1e-3`` of the
    pooled sample range (``1e-3`` when the range is zero).  The result is an
    upper bound on the exact value, within one step of it, and never exceeds 1.
    """
    if grid is None:
        lo = min(a.samples[0], b.samples[0])
        hi = max(a.samples[-1], b.samples[-1])
        grid = 1e-3 * (hi - lo) if hi > lo else 1e-3
    if not grid > 0:
        raise ValueError(f"grid resolution must be > 0, got {grid}")
    lo_k, hi_k = 0, int(math.ceil(1.0 / grid))
    if _lp_holds(a, b, 0.0):
        return 0.0
    while hi_k - lo_k > 1:
        mid = (lo_k + hi_k) // 2
        if _lp_holds(a, b, mid * grid):
            hi_k = mid
        else:
            lo_k = mid
    return min(hi_k * grid, 1.0)


@dataclass(frozen=True)
class WindowMetric:
    """Product-topology distance on the ``w x w`` window.

    ``d(a, b) = sum_{i,j<=w} 2^(-i-j) t_ij / (1 + t_ij)`` with
    ``t_ij = |a_ij - b_ij|`` and 1-based ``i, j``; always in ``[0, 1)``.
    """

    window: int

    @property
    def weights(self) -> np.ndarray:
        k = np.arange(1, self.window + 1)
        return 2.0 ** -(k[:, None] + k[None, :])

    def __call__(self, a, b) -> np.ndarray | float:
        w = self.window
        t = np.abs(np.asarray(a)[..., :w, :w] - np.asarray(b)[..., :w, :w])
        d = np.sum(self.weights * (t / (1.0 + t)), axis=(-2, -1))
        return float(d) if np.ndim(d) == 0 else d


def _reference(name: str, c: float, w: int) -> np.ndarray:
    if name == "zero":
        return np.zeros((w, w), dtype=complex)
    if name == "identity":
        return np.eye(w, dtype=complex)
    if name == "scalar":
        return c * np.eye(w, dtype=complex)
    raise ValueError(f"unknown reference point {name!r}; use 'zero', 'identity' or 'scalar'")


@register_observable("psi-distance")
def psi_distance(k: float = 1.0, reference: str = "zero", c: float = 1.0, window: int = 1) -> Observable:
    """``1 / (1 + k d_w(x, x0))``: positive, bounded by 1, equal to 1 at ``x0``."""
    k, c, window = float(k), float(c), int(window)
    if k <= 0:
        raise ValueError(f"k must be > 0, got {k}")
    x0 = _reference(reference, c, window)
    metric = WindowMetric(window)
    params = {"k": k, "reference": reference, "window": window}
    if reference == "scalar":
        params["c"] = c
    return Observable("psi-distance", window, lambda a: 1.0 / (1.0 + k * metric(a, x0)),
                      bound=1.0, positive=True, params=params)


def default_test_family(window: int, count: int) -> list[Observable]:
    """``f_k = 1 / (1 + k d_w(x, x0))`` for ``x0`` in {0, I} and ``k = 1..count``."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return [psi_distance(k=k, reference=ref, window=window)
            for ref in ("zero", "identity") for k in range(1, count + 1)]


def _check_schedule(f: Observable, n_schedule: Sequence[int]) -> list[int]:
    sched = [int(n) for n in n_schedule]
    if not sched or any(b <= a for a, b in zip(sched, sched[1:])):
        raise ValueError(f"n_schedule must be strictly increasing, got {sched}")
    if f.window > sched[0]:
        raise ValueError(f"observable window {f.window} exceeds smallest n = {sched[0]}")
    return sched


def _per_n_streams(rng, k: int) -> list[np.random.Generator]:
    return as_generator(rng).spawn(k)


@dataclass
class RecurrenceEstimate:
    n_schedule: list[int]
    per_n: list[OrbitalAverage]

    @property
    def inf(self) -> float:
        return min(a.mean for a in self.per_n)


def recurrence_from_values(n_schedule: Sequence[int], values: Sequence[np.ndarray]) -> RecurrenceEstimate:
    return RecurrenceEstimate(list(n_schedule), [_mean_stderr(np.asarray(v)) for v in values])


def recurrence_estimate(p: MatrixPrefix, f: Observable, n_schedule: Sequence[int], samples: int,
                        rng) -> RecurrenceEstimate:
    """Orbital averages of a positive observable along the schedule, and their infimum.

    Each ``n`` uses its own child stream spawned from ``rng``.
    """
    if not f.positive:
        raise ValueError(f"recurrence needs a strictly positive observable, {f.name!r} is not")
    sched = _check_schedule(f, n_schedule)
    streams = _per_n_streams(rng, len(sched))
    return recurrence_from_values(sched, [orbital_values(f, p, n, samples, g)
                                          for n, g in zip(sched, streams)])


CAUCHY = "cauchy-trend"
ESCAPING = "escaping"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class DiagnosticConfig:
    """Verdict thresholds for :func:`precompactness_diagnostic`.

    Cauchy tolerance is ``max(cauchy_floor, cauchy_stderr_factor * pooled
    stderr)``, the stderr pooled over the last half of the schedule.  Escaping
    requires the last ``escape_run`` increments of the distance to the first
    measure each to exceed ``escape_stderr_factor`` combined stderrs.
    """

    cauchy_floor: float = 0.02
    cauchy_stderr_factor: float = 5.0
    escape_run: int = 3
    escape_stderr_factor: float = 2.0


@dataclass
class Precompactness:
    n_schedule: list[int]
    measures: list[EmpiricalMeasure] = field(repr=False)
    averages: list[OrbitalAverage]
    pairwise: np.ndarray
    tolerance: float
    verdict: str

    def distance(self, n1: int, n2: int) -> float:
        return float(self.pairwise[self.n_schedule.index(n1), self.n_schedule.index(n2)])


def precompactness_from_values(n_schedule: Sequence[int], values: Sequence[np.ndarray],
                               config: DiagnosticConfig | None = None) -> Precompactness:
    """Pairwise W1 distances between pushforwards and the trend verdict."""
    cfg = config or DiagnosticConfig()
    sched = list(n_schedule)
    measures = [EmpiricalMeasure(v) for v in values]
    averages = [_mean_stderr(np.asarray(v)) for v in values]
    k = len(measures)
    pairwise = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            pairwise[i, j] = pairwise[j, i] = w1_distance(measures[i], measures[j])
    se = np.nan_to_num(np.array([a.stderr for a in averages]))
    half = k - k // 2
    pooled = float(np.sqrt(np.mean(se[half:] ** 2)))
    tol = max(cfg.cauchy_floor, cfg.cauchy_stderr_factor * pooled)

    last = pairwise[half:, half:]
    if np.all(last <= tol):
        verdict = CAUCHY
    else:
        ref = pairwise[0]
        steps = np.diff(ref)
        noise = cfg.escape_stderr_factor * np.sqrt(se[1:] ** 2 + se[:-1] ** 2)
        run = cfg.escape_run
        escaping = len(steps) >= run and bool(np.all(steps[-run:] > noise[-run:]))
        verdict = ESCAPING if escaping else INCONCLUSIVE
    return Precompactness(sched, measures, averages, pairwise, tol, verdict)


def precompactness_diagnostic(p: MatrixPrefix, f: Observable, n_schedule: Sequence[int], samples: int,
                              rng, config: DiagnosticConfig | None = None) -> Precompactness:
    """Cauchy-or-escaping trend of the pushforwards of the orbital measures under ``f``."""
    sched = _check_schedule(f, n_schedule)
    streams = _per_n_streams(rng, len(sched))
    values = [orbital_values(f, p, n, samples, g) for n, g in zip(sched, streams)]
    return precompactness_from_values(sched, values, config)
