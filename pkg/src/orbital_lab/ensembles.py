"""Seeded random and deterministic prefixes with analytically known scaled limits.

Every sampler is a pure function of its parameters and seed.  Normalization
is ``E|h_ij|^2 = sigma^2`` for every entry, diagonal included, so the scaled
squared trace ``tr h(n)^2 / n^2`` tends to ``sigma^2``.
"""
from __future__ import annotations

import math
from typing import Any, Callable

import numpy as np

from .matrix_core import (
    COMPLEX,
    HERMITIAN,
    MatrixPrefix,
    RuleSource,
    SeededSource,
    SumSource,
    register_rule,
    register_source,
    from_descriptor,
)

__all__ = [
    "gaussian_hermitian",
    "gaussian_complex",
    "rank_one",
    "deterministic_diag",
    "zero",
    "scalar",
    "sum",
    "DIAG_RULES",
    "ENSEMBLES",
    "build_ensemble",
]


class GaussianHermitianSource(SeededSource):
    tag = "gaussian_hermitian"

    def __init__(self, sigma: float, seed: int):
        if sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {sigma}")
        super().__init__(seed, HERMITIAN)
        self.sigma = float(sigma)

    def _fill_border(self, cache, k):
        # Draw order: diagonal entry, then (re, im) of h[0..k-1, k].
        g = self.border_rng(k).standard_normal(2 * k + 1)
        cache[k, k] = self.sigma * g[0]
        if k:
            off = (g[1::2] + 1j * g[2::2]) * (self.sigma / math.sqrt(2.0))
            cache[:k, k] = off
            cache[k, :k] = off.conj()

    def parameters(self):
        return {"sigma": self.sigma}


class GaussianComplexSource(SeededSource):
    tag = "gaussian_complex"

    def __init__(self, sigma: float, seed: int):
        if sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {sigma}")
        super().__init__(seed, COMPLEX)
        self.sigma = float(sigma)

    def _fill_border(self, cache, k):
        # Row-major border order: z[0..k-1, k], then z[k, 0..k].
        g = self.border_rng(k).standard_normal(2 * (2 * k + 1))
        z = (g[0::2] + 1j * g[1::2]) * (self.sigma / math.sqrt(2.0))
        cache[:k, k] = z[:k]
        cache[k, :k + 1] = z[k:]

    def parameters(self):
        return {"sigma": self.sigma}


class RankOneSource(SeededSource):
    """``h = x v v*`` with ``v_i`` standard complex Gaussians, ``E|v_i|^2 = 1``."""

    tag = "rank_one"

    def __init__(self, x: float, seed: int):
        super().__init__(seed, HERMITIAN)
        self.x = float(x)
        self._v = np.zeros(0, dtype=complex)

    def _grow(self, n):
        v = np.empty(n, dtype=complex)
        v[:len(self._v)] = self._v
        for k in range(len(self._v), n):
            re, im = self.border_rng(k).standard_normal(2)
            v[k] = complex(re, im) / math.sqrt(2.0)
        self._v = v
        super()._grow(n)

    def _fill_border(self, cache, k):
        v = self._v
        cache[:k + 1, k] = self.x * v[:k + 1] * v[k].conjugate()
        cache[k, :k] = cache[:k, k].conj()
        cache[k, k] = self.x * (v[k].real ** 2 + v[k].imag ** 2)

    @property
    def vector(self) -> np.ndarray:
        return self._v.copy()

    def parameters(self):
        return {"x": self.x}


for _cls in (GaussianHermitianSource, GaussianComplexSource, RankOneSource):
    register_source(_cls.tag)(
        lambda desc, _cls=_cls: _cls(*desc["parameters"].values(), desc["seed"])
    )


def gaussian_hermitian(sigma: float, seed: int) -> MatrixPrefix:
    """Hermitian prefix with independent centred Gaussian entries.

    Diagonal entries are real with variance ``sigma**2``; off-diagonal entries
    have independent real and imaginary parts of variance ``sigma**2 / 2``.
    """
    return MatrixPrefix(GaussianHermitianSource(sigma, seed))


def gaussian_complex(sigma: float, seed: int) -> MatrixPrefix:
    """Complex prefix with i.i.d. entries, ``E|z_ij|^2 = sigma**2``."""
    return MatrixPrefix(GaussianComplexSource(sigma, seed))


def rank_one(x: float, seed: int) -> MatrixPrefix:
    return MatrixPrefix(RankOneSource(x, seed))


@register_rule("diag")
def _diag_rule(rule: str = "constant", c: float = 0.0):
    d = DIAG_RULES[rule](c)
    return lambda i, j: np.where(i == j, d(np.broadcast_to(i, np.broadcast(i, j).shape)), 0.0)


DIAG_RULES: dict[str, Callable[[float], Callable[[np.ndarray], np.ndarray]]] = {
    "constant": lambda c: (lambda i: np.full(np.shape(i), float(c))),
    "index": lambda c: (lambda i: np.asarray(i, dtype=float)),
    "alternating": lambda c: (lambda i: np.where(np.asarray(i) % 2 == 0, 1.0, -1.0)),
}


def deterministic_diag(rule: Callable[[np.ndarray], Any] | str, c: float = 0.0) -> MatrixPrefix:
    """Hermitian diagonal prefix ``diag(rule(1), rule(2), ...)``.

    ``rule`` is either a vectorized function of the 1-based index array or a
    name from :data:`DIAG_RULES` (``"constant"`` uses ``c``); named rules are
    serializable.
    """
    if isinstance(rule, str):
        if rule not in DIAG_RULES:
            raise ValueError(f"unknown diagonal rule {rule!r}; known: {sorted(DIAG_RULES)}")
        return MatrixPrefix(RuleSource(kind=HERMITIAN, name="diag", params={"rule": rule, "c": float(c)}))

    def entries(i, j):
        shape = np.broadcast(i, j).shape
        d = np.asarray(rule(np.broadcast_to(i, shape)), dtype=float)
        return np.where(i == j, d, 0.0)

    return MatrixPrefix(RuleSource(entries, kind=HERMITIAN))


def zero(kind: str = HERMITIAN) -> MatrixPrefix:
    return MatrixPrefix(RuleSource(kind=kind, name="zero"))


def scalar(c: float, kind: str = HERMITIAN) -> MatrixPrefix:
    """``c`` times the identity."""
    return MatrixPrefix(RuleSource(kind=kind, name="scalar", params={"c": float(c)}))


def sum(p1: MatrixPrefix, p2: MatrixPrefix) -> MatrixPrefix:  # noqa: A001
    """Entrywise sum; both prefixes must have the same kind."""
    return MatrixPrefix(SumSource(p1.source, p2.source))


ENSEMBLES: dict[str, Callable[..., MatrixPrefix]] = {
    "gaussian_hermitian": gaussian_hermitian,
    "gaussian_complex": gaussian_complex,
    "rank_one": rank_one,
    "deterministic_diag": deterministic_diag,
    "zero": zero,
    "scalar": scalar,
}
SEEDED = {"gaussian_hermitian", "gaussian_complex", "rank_one"}


def build_ensemble(desc: dict[str, Any], seed: int | None = None) -> MatrixPrefix:
    """Construct a prefix from an ensemble descriptor ``{name, parameters, seed}``.

    ``seed`` overrides the descriptor's own seed.  ``sum`` takes
    ``parameters={"terms": [desc, desc]}``; each term receives a distinct seed
    derived from the outer one.
    """
    name = desc.get("name")
    params = dict(desc.get("parameters") or {})
    seed = desc.get("seed") if seed is None else seed
    if name == "sum":
        terms = params.get("terms") or []
        if len(terms) < 2:
            raise ValueError("ensemble 'sum' needs at least two terms")
        parts = [build_ensemble(t, None if seed is None else _term_seed(seed, k))
                 for k, t in enumerate(terms)]
        out = parts[0]
        for p in parts[1:]:
            out = sum(out, p)
        return out
    if name == "prefix":
        return from_descriptor(params)
    if name not in ENSEMBLES:
        raise ValueError(f"unknown ensemble {name!r}; known: {sorted(ENSEMBLES) + ['sum', 'prefix']}")
    if name in SEEDED:
        if seed is None:
            raise ValueError(f"ensemble {name!r} needs a seed")
        return ENSEMBLES[name](**params, seed=int(seed))
    return ENSEMBLES[name](**params)


def _term_seed(seed: int, k: int) -> int:
    return int(np.random.SeedSequence([int(seed), k]).generate_state(1, np.uint64)[0])
