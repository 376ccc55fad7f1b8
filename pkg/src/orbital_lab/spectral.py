"""Scaled spectral statistics of corners, radial profiles and identity audits.

For a Hermitian corner ``h(n)`` the statistics are the eigenvalues divided by
``n`` (nonnegative ones in decreasing order, negative ones in increasing
order), ``gamma1 = tr h(n) / n`` and ``gamma2 = tr h(n)^2 / n^2``.  For a
complex corner ``z(n)`` they are the eigenvalues of ``z(n)* z(n)`` divided by
``n^2`` and ``gamma = tr z(n)* z(n) / n^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import stats

from .matrix_core import (
    COMPLEX,
    HERMITIAN,
    CornerMatrix,
    MatrixPrefix,
    conjugate_check_u,
    corner,
    frobenius_window,
    tail,
)

__all__ = [
    "SpectralProfile",
    "SingularProfile",
    "RadialProfile",
    "hermitian_profile",
    "complex_profile",
    "radial_profile",
    "VerdictConfig",
    "BOUNDED",
    "UNBOUNDED",
    "INCONCLUSIVE",
    "boundedness_verdict",
    "AUDIT_RTOL",
    "AuditReport",
    "audit_trace_identity",
    "audit_frobenius_inequality_h",
    "audit_tau_inequality_z",
]

ZERO_SNAP = 1e-12
AUDIT_RTOL = 1e-12


def _sq_sum(a: np.ndarray) -> float:
    return math.fsum(np.concatenate([(a.real ** 2).ravel(), (a.imag ** 2).ravel()]))


@dataclass(frozen=True)
class SpectralProfile:
    n: int
    x_pos: np.ndarray
    x_neg: np.ndarray
    gamma1: float
    gamma2: float

    @property
    def eigenvalues(self) -> np.ndarray:
        """Unscaled eigenvalues, positive side first."""
        return np.concatenate([self.x_pos, self.x_neg]) * self.n


@dataclass(frozen=True)
class SingularProfile:
    n: int
    x: np.ndarray
    gamma: float

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.x * self.n ** 2


def hermitian_profile(c: CornerMatrix) -> SpectralProfile:
    if not c.hermitian:
        raise ValueError("hermitian_profile needs a hermitian corner")
    n = c.n
    lam = np.linalg.eigvalsh(c.entries)
    scale = np.max(np.abs(lam))
    lam = np.where(np.abs(lam) < ZERO_SNAP * scale, 0.0, lam)
    pos = np.sort(lam[lam >= 0])[::-1]
    neg = np.sort(lam[lam < 0])
    gamma1 = math.fsum(c.entries.diagonal().real) / n
    gamma2 = _sq_sum(c.entries) / n ** 2
    return SpectralProfile(n, pos / n, neg / n, gamma1, gamma2)


def complex_profile(c: CornerMatrix) -> SingularProfile:
    n = c.n
    # Squared singular values are the eigenvalues of c* c, nonnegative by construction.
    lam = np.linalg.svd(c.entries, compute_uv=False) ** 2
    lam = np.sort(lam)[::-1]
    return SingularProfile(n, lam / n ** 2, _sq_sum(c.entries) / n ** 2)


def _running_max(xs: Sequence[float]) -> list[float]:
    return np.maximum.accumulate(np.asarray(xs, dtype=float)).tolist()


@dataclass
class RadialProfile:
    kind: str
    n_schedule: list[int]
    profiles: list[Any]
    running_sup_gamma1_abs: list[float] = field(default_factory=list)
    running_sup_gamma2: list[float] = field(default_factory=list)
    running_sup_gamma: list[float] = field(default_factory=list)

    def series(self, name: str) -> np.ndarray:
        """Per-n values of ``gamma1``, ``gamma2`` or ``gamma``."""
        return np.array([getattr(pr, name) for pr in self.profiles], dtype=float)


def radial_profile(p: MatrixPrefix, n_schedule: Sequence[int]) -> RadialProfile:
    sched = [int(n) for n in n_schedule]
    if not sched or sched[0] < 1 or any(b <= a for a, b in zip(sched, sched[1:])):
        raise ValueError(f"n_schedule must be strictly increasing positive integers, got {sched}")
    if p.kind == HERMITIAN:
        profiles = [hermitian_profile(corner(p, n)) for n in sched]
        return RadialProfile(
            HERMITIAN, sched, profiles,
            running_sup_gamma1_abs=_running_max([abs(pr.gamma1) for pr in profiles]),
            running_sup_gamma2=_running_max([pr.gamma2 for pr in profiles]),
        )
    profiles = [complex_profile(corner(p, n)) for n in sched]
    return RadialProfile(COMPLEX, sched, profiles,
                         running_sup_gamma=_running_max([pr.gamma for pr in profiles]))


BOUNDED = "bounded-trend"
UNBOUNDED = "unbounded-trend"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class VerdictConfig:
    """Thresholds for :func:`boundedness_verdict`.

    ``slope_threshold`` is per unit ``n``; the fitted slope must exceed it at
    one-sided ``confidence``.  ``cauchy_tol`` bounds the spread (max - min) of
    the statistic over the last half of the schedule.
    """

    slope_threshold: float = 0.05
    confidence: float = 0.95
    cauchy_tol: float = 0.05
    min_points: int = 4


def _slope_lower_bound(ns: np.ndarray, ys: np.ndarray, confidence: float) -> float:
    if np.ptp(ys) == 0:
        return 0.0
    fit = stats.linregress(ns, ys)
    t = stats.t.ppf(confidence, df=len(ns) - 2)
    return fit.slope - t * fit.stderr


def boundedness_verdict(rp: RadialProfile, config: VerdictConfig | None = None) -> str:
    """Heuristic trend label for the radial statistics of a finite schedule.

    No finite computation decides a supremum over all ``n``; this only labels
    the observed trend.  ``unbounded-trend`` when the growth of ``gamma2``
    (``gamma`` for complex prefixes) or of ``|gamma1|`` against ``n`` is
    significantly steeper than the threshold, ``bounded-trend`` when
    ``gamma2`` / ``gamma`` is numerically Cauchy over the last half of the
    schedule, ``inconclusive`` otherwise.
    """
    cfg = config or VerdictConfig()
    ns = np.asarray(rp.n_schedule, dtype=float)
    if len(ns) < cfg.min_points:
        raise ValueError(f"boundedness_verdict needs >= {cfg.min_points} schedule points, got {len(ns)}")
    if rp.kind == HERMITIAN:
        main = rp.series("gamma2")
        growth = [main, np.abs(rp.series("gamma1"))]
    else:
        main = rp.series("gamma")
        growth = [main]
    if any(_slope_lower_bound(ns, ys, cfg.confidence) > cfg.slope_threshold for ys in growth):
        return UNBOUNDED
    last = main[len(main) - len(main) // 2:]
    if np.max(last) - np.min(last) <= cfg.cauchy_tol:
        return BOUNDED
    return INCONCLUSIVE


@dataclass
class AuditReport:
    """Outcome of checking one identity or inequality on one prefix."""

    operation: str
    parameters: dict[str, Any]
    lhs: float
    rhs_terms: dict[str, float]
    relation: str
    tolerance: float
    passed: bool

    @property
    def rhs(self) -> float:
        return math.fsum(self.rhs_terms.values())

    @property
    def scale(self) -> float:
        return max([abs(self.lhs)] + [abs(v) for v in self.rhs_terms.values()])

    def row(self) -> dict[str, Any]:
        return {
            "operation": self.operation,
            **{f"param_{k}": v for k, v in self.parameters.items()},
            "lhs": self.lhs,
            **{f"rhs_{k}": v for k, v in self.rhs_terms.items()},
            "relation": self.relation,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def _report(operation, parameters, lhs, terms, relation) -> AuditReport:
    rep = AuditReport(operation, parameters, lhs, terms, relation, AUDIT_RTOL, False)
    slack = AUDIT_RTOL * rep.scale
    if relation == "==":
        rep.passed = abs(lhs - rep.rhs) <= slack
    else:
        rep.passed = lhs <= rep.rhs + slack
    return rep


def _require(cond: bool, msg: str):
    if not cond:
        raise ValueError(msg)


def audit_trace_identity(p: MatrixPrefix, m: int, n: int) -> AuditReport:
    """``tr h(n) = tr (tail(h, m))(n - m) + tr h(m)`` for ``n > m >= 1``."""
    _require(p.kind == HERMITIAN, "audit_trace_identity needs a hermitian prefix")
    _require(n > m >= 1, f"need n > m >= 1, got m={m}, n={n}")

    def tr(q, k):
        return math.fsum(q.block(k).diagonal().real)

    return _report("trace_identity", {"m": m, "n": n}, tr(p, n),
                   {"tail": tr(tail(p, m), n - m), "head": tr(p, m)}, "==")


def audit_frobenius_inequality_h(p: MatrixPrefix, m: int, N: int) -> AuditReport:
    """Squared Frobenius norm of ``h(N)`` against its two shifted tails and the ``2m`` corner.

    Sums run over the original indices ``m+1..N`` for the plain and the
    block-swapped matrix, plus ``1..2m`` for the head.
    """
    _require(p.kind == HERMITIAN, "audit_frobenius_inequality_h needs a hermitian prefix")
    _require(m >= 1 and N > 2 * m, f"need m >= 1 and N > 2m, got m={m}, N={N}")
    terms = {
        "tail": frobenius_window(tail(p, m), N - m),
        "swapped_tail": frobenius_window(tail(conjugate_check_u(p, m), m), N - m),
        "head_2m": frobenius_window(p, 2 * m),
    }
    return _report("frobenius_inequality_h", {"m": m, "N": N}, frobenius_window(p, N), terms, "<=")


def audit_tau_inequality_z(p: MatrixPrefix, m: int, n: int) -> AuditReport:
    """``tau_n(z) <= tau_2m(z) + tau_n(tail(z, m)) + tau_n(tail(swap(z), m))`` for ``n > 3m``."""
    _require(p.kind == COMPLEX, "audit_tau_inequality_z needs a complex prefix")
    _require(m >= 1 and n > 3 * m, f"need m >= 1 and n > 3m, got m={m}, n={n}")
    terms = {
        "head_2m": frobenius_window(p, 2 * m),
        "tail": frobenius_window(tail(p, m), n),
        "swapped_tail": frobenius_window(tail(conjugate_check_u(p, m), m), n),
    }
    return _report("tau_inequality_z", {"m": m, "n": n}, frobenius_window(p, n), terms, "<=")
