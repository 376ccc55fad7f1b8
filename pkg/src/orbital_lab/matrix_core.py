"""Lazy prefixes of infinite matrices and the exact index transformations on them.

A :class:`MatrixPrefix` stands for a point of the space of infinite complex
matrices (``kind="complex"``) or of its Hermitian subspace
(``kind="hermitian"``).  Entries are realized on demand, corner by corner, and
every read of a realized entry returns the same value.

Indices in the public API (:meth:`MatrixPrefix.entry`, :class:`CheckU`) are
1-based, matching the usual matrix notation; arrays are 0-based.
"""
from __future__ import annotations

import hashlib
import math
import threading
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

__all__ = [
    "HERMITIAN",
    "COMPLEX",
    "KINDS",
    "CornerMatrix",
    "CheckU",
    "MatrixPrefix",
    "Source",
    "ExplicitSource",
    "RuleSource",
    "SeededSource",
    "TailSource",
    "CheckUSource",
    "SumSource",
    "stream_key",
    "as_prefix",
    "rule_prefix",
    "corner",
    "tail",
    "conjugate_check_u",
    "frobenius_window",
    "register_rule",
    "RULES",
    "register_source",
    "from_descriptor",
]

HERMITIAN = "hermitian"
COMPLEX = "complex"
KINDS = (HERMITIAN, COMPLEX)


def _check_kind(kind: str) -> str:
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
    return kind


def _is_exactly_hermitian(a: np.ndarray) -> bool:
    return bool(np.array_equal(a, a.conj().T))


def _mirror_upper(a: np.ndarray) -> np.ndarray:
    """Overwrite the strict lower triangle with the conjugate of the upper one."""
    il = np.tril_indices(a.shape[0], -1)
    a[il] = a.T[il].conj()
    a[np.diag_indices(a.shape[0])] = a.diagonal().real
    return a


@dataclass(frozen=True, eq=False)
class CornerMatrix:
    """Dense ``n x n`` complex matrix, the top-left corner of a prefix."""

    entries: np.ndarray
    hermitian: bool = False
    n: int = field(init=False)

    def __post_init__(self):
        a = np.array(self.entries, dtype=complex, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"corner must be a non-empty square matrix, got shape {a.shape}")
        if self.hermitian and not _is_exactly_hermitian(a):
            raise ValueError("hermitian corner is not exactly equal to its conjugate transpose")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "n", a.shape[0])

    def __eq__(self, other):
        if not isinstance(other, CornerMatrix):
            return NotImplemented
        return self.hermitian == other.hermitian and np.array_equal(self.entries, other.entries)

    def __repr__(self):
        return f"CornerMatrix(n={self.n}, hermitian={self.hermitian})"


@dataclass(frozen=True)
class CheckU:
    """The involutive permutation unitary that swaps index blocks ``[1, m]`` and ``[m+1, 2m]``."""

    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"block size m must be >= 1, got {self.m}")

    def pi(self, i: int) -> int:
        """Image of the 1-based index ``i`` under the block swap."""
        m = self.m
        if i < 1:
            raise ValueError(f"indices are 1-based, got {i}")
        if i <= m:
            return m + i
        if i <= 2 * m:
            return i - m
        return i

    def permutation(self, n: int) -> np.ndarray:
        """0-based index array of length ``n`` (``n >= 2m``) realizing the swap."""
        if n < 2 * self.m:
            raise ValueError(f"need n >= 2m = {2 * self.m}, got {n}")
        perm = np.arange(n)
        m = self.m
        perm[:m] += m
        perm[m:2 * m] -= m
        return perm

    def matrix(self, n: int) -> np.ndarray:
        """Dense ``n x n`` corner of the unitary, for ``n >= 2m``."""
        u = np.zeros((n, n))
        u[self.permutation(n), np.arange(n)] = 1.0
        return u


class Source:
    """Entry generator behind a :class:`MatrixPrefix`.

    Subclasses implement :meth:`block`, which returns the ``n x n`` corner as a
    (possibly read-only) array, and :meth:`descriptor`.
    """

    kind: str

    def block(self, n: int) -> np.ndarray:
        raise NotImplementedError

    def descriptor(self) -> dict[str, Any]:
        raise NotImplementedError


_SOURCES: dict[str, Callable[[dict[str, Any]], Source]] = {}


def register_source(name: str):
    def deco(builder):
        _SOURCES[name] = builder
        return builder
    return deco


def from_descriptor(desc: dict[str, Any]) -> "MatrixPrefix":
    """Rebuild a prefix from the structured form produced by :meth:`MatrixPrefix.descriptor`."""
    try:
        builder = _SOURCES[desc["source"]]
    except KeyError:
        raise ValueError(f"unknown prefix source {desc.get('source')!r}") from None
    src = builder(desc)
    if src.kind != desc.get("kind", src.kind):
        raise ValueError(f"descriptor kind {desc['kind']!r} does not match source kind {src.kind!r}")
    return MatrixPrefix(src)


class ExplicitSource(Source):
    """Finite array, zero-extended to an infinite matrix."""

    def __init__(self, array, kind: str = COMPLEX):
        a = np.array(array, dtype=complex, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"explicit source needs a square array, got shape {a.shape}")
        self.kind = _check_kind(kind)
        if kind == HERMITIAN and not _is_exactly_hermitian(a):
            raise ValueError("array is not exactly Hermitian")
        a.setflags(write=False)
        self.array = a

    def block(self, n):
        k = self.array.shape[0]
        if n <= k:
            return self.array[:n, :n]
        out = np.zeros((n, n), dtype=complex)
        out[:k, :k] = self.array
        return out

    def descriptor(self):
        a = self.array
        return {
            "kind": self.kind,
            "source": "explicit",
            "parameters": {"real": a.real.tolist(), "imag": a.imag.tolist()},
            "seed": None,
        }


@register_source("explicit")
def _explicit_from(desc):
    p = desc["parameters"]
    return ExplicitSource(np.asarray(p["real"]) + 1j * np.asarray(p["imag"]), desc["kind"])


# Named deterministic rules.  Each factory returns a vectorized function of the
# 1-based index grids (I, J).
RULES: dict[str, Callable[..., Callable[[np.ndarray, np.ndarray], np.ndarray]]] = {}


def register_rule(name: str):
    def deco(factory):
        RULES[name] = factory
        return factory
    return deco


@register_rule("zero")
def _zero_rule():
    return lambda i, j: np.zeros(np.broadcast(i, j).shape)


@register_rule("identity")
def _identity_rule():
    return lambda i, j: (i == j).astype(float)


@register_rule("scalar")
def _scalar_rule(c=1.0):
    return lambda i, j: np.where(i == j, float(c), 0.0)


class RuleSource(Source):
    """Deterministic rule ``(i, j) -> value`` evaluated on 1-based index grids.

    ``rule`` must accept broadcastable integer arrays.  Passing ``name`` (a key
    of :data:`RULES`) with ``params`` makes the source serializable.
    """

    def __init__(self, rule=None, kind: str = HERMITIAN, *, name: str | None = None, params=None):
        self.kind = _check_kind(kind)
        self.name = name
        self.params = dict(params or {})
        if rule is None:
            if name is None:
                raise ValueError("need a rule or a registered rule name")
            rule = RULES[name](**self.params)
        self.rule = rule

    def block(self, n):
        idx = np.arange(1, n + 1)
        a = np.asarray(self.rule(idx[:, None], idx[None, :]), dtype=complex)
        a = np.broadcast_to(a, (n, n)).copy()
        if self.kind == HERMITIAN and not _is_exactly_hermitian(a):
            raise ValueError("rule does not define a Hermitian matrix")
        return a

    def descriptor(self):
        if self.name is None:
            raise ValueError("anonymous rule sources are not serializable")
        return {"kind": self.kind, "source": "rule", "parameters": {"rule": self.name, "args": self.params},
                "seed": None}


@register_source("rule")
def _rule_from(desc):
    p = desc["parameters"]
    return RuleSource(kind=desc["kind"], name=p["rule"], params=p.get("args"))


def stream_key(tag: str, seed: int) -> np.ndarray:
    """128-bit Philox key for the stream labelled ``(tag, seed)``."""
    digest = hashlib.blake2b(f"{tag}:{int(seed)}".encode(), digest_size=16).digest()
    return np.frombuffer(digest, dtype="<u8").copy()


class SeededSource(Source):
    """Random source memoized in canonical order.

    Border ``k`` (the entries with ``max(i, j) = k``) is drawn from its own
    counter-based Philox stream, keyed by ``(tag, seed)`` with counter offset
    ``k``.  The realized matrix therefore does not depend on the order in which
    corners are requested.  Subclasses implement :meth:`_fill_border`.
    """

    tag = "seeded"

    def __init__(self, seed: int, kind: str):
        self.seed = int(seed)
        self.kind = _check_kind(kind)
        self._key = stream_key(self.tag, self.seed)
        self._cache = np.zeros((0, 0), dtype=complex)
        self._bound = 0
        self._lock = threading.Lock()

    def border_rng(self, k: int) -> np.random.Generator:
        """Generator for 0-based border ``k``."""
        return np.random.Generator(np.random.Philox(key=self._key, counter=[0, 0, 0, k]))

    def _fill_border(self, cache: np.ndarray, k: int) -> None:
        raise NotImplementedError

    def block(self, n):
        if n > self._bound:
            with self._lock:
                if n > self._bound:
                    self._grow(n)
        view = self._cache[:n, :n]
        view.setflags(write=False)
        return view

    def _grow(self, n):
        cap = self._cache.shape[0]
        if n > cap:
            new_cap = max(n, 2 * cap)
            cache = np.zeros((new_cap, new_cap), dtype=complex)
            cache[:cap, :cap] = self._cache
        else:
            cache = self._cache
        for k in range(self._bound, n):
            self._fill_border(cache, k)
        self._cache = cache
        self._bound = n

    def parameters(self) -> dict[str, Any]:
        return {}

    def descriptor(self):
        return {"kind": self.kind, "source": self.tag, "parameters": self.parameters(), "seed": self.seed}


class TailSource(Source):
    """Drop the first ``m`` rows and columns."""

    def __init__(self, parent: Source, m: int):
        if m < 0:
            raise ValueError(f"tail shift must be >= 0, got {m}")
        self.parent = parent
        self.m = int(m)
        self.kind = parent.kind

    def block(self, n):
        return self.parent.block(n + self.m)[self.m:, self.m:]

    def descriptor(self):
        return {"kind": self.kind, "source": "tail",
                "parameters": {"m": self.m, "parent": self.parent.descriptor()}, "seed": None}


@register_source("tail")
def _tail_from(desc):
    p = desc["parameters"]
    return TailSource(from_descriptor(p["parent"]).source, p["m"])


class CheckUSource(Source):
    """Entry permutation ``(i, j) -> (pi(i), pi(j))`` realizing conjugation by :class:`CheckU`."""

    def __init__(self, parent: Source, m: int):
        self.check_u = CheckU(int(m))
        self.parent = parent
        self.kind = parent.kind

    def block(self, n):
        need = max(n, 2 * self.check_u.m)
        perm = self.check_u.permutation(need)[:n]
        return self.parent.block(need)[np.ix_(perm, perm)]

    def descriptor(self):
        return {"kind": self.kind, "source": "check-u",
                "parameters": {"m": self.check_u.m, "parent": self.parent.descriptor()}, "seed": None}


@register_source("check-u")
def _check_u_from(desc):
    p = desc["parameters"]
    return CheckUSource(from_descriptor(p["parent"]).source, p["m"])


class SumSource(Source):
    def __init__(self, left: Source, right: Source):
        if left.kind != right.kind:
            raise ValueError(f"cannot add prefixes of kinds {left.kind!r} and {right.kind!r}")
        self.left, self.right = left, right
        self.kind = left.kind

    def block(self, n):
        return self.left.block(n) + self.right.block(n)

    def descriptor(self):
        return {"kind": self.kind, "source": "sum",
                "parameters": {"terms": [self.left.descriptor(), self.right.descriptor()]}, "seed": None}


@register_source("sum")
def _sum_from(desc):
    left, right = (from_descriptor(d).source for d in desc["parameters"]["terms"])
    return SumSource(left, right)


class MatrixPrefix:
    """A point of Mat or H, materialized lazily through its :class:`Source`."""

    def __init__(self, source: Source):
        self.source = source
        self.materialized_bound = 0

    @property
    def kind(self) -> str:
        return self.source.kind

    @property
    def hermitian(self) -> bool:
        return self.source.kind == HERMITIAN

    def block(self, n: int) -> np.ndarray:
        """The ``n x n`` corner as an array (read-only view for cached sources)."""
        n = int(n)
        if n < 1:
            raise ValueError(f"dimension must be >= 1, got {n}")
        out = self.source.block(n)
        self.materialized_bound = max(self.materialized_bound, n)
        return out

    def entry(self, i: int, j: int) -> complex:
        if i < 1 or j < 1:
            raise ValueError(f"indices are 1-based, got ({i}, {j})")
        return complex(self.block(max(i, j))[i - 1, j - 1])

    def descriptor(self) -> dict[str, Any]:
        return self.source.descriptor()

    def __repr__(self):
        return f"MatrixPrefix(kind={self.kind!r}, source={type(self.source).__name__})"


def as_prefix(c: CornerMatrix | np.ndarray, kind: str | None = None) -> MatrixPrefix:
    """Zero-extend a finite matrix to a prefix."""
    if isinstance(c, CornerMatrix):
        kind = kind or (HERMITIAN if c.hermitian else COMPLEX)
        c = c.entries
    return MatrixPrefix(ExplicitSource(c, kind or COMPLEX))


def rule_prefix(name: str, kind: str = HERMITIAN, **params) -> MatrixPrefix:
    """Prefix for a registered rule, e.g. ``rule_prefix("identity")``."""
    return MatrixPrefix(RuleSource(kind=kind, name=name, params=params))


def corner(p: MatrixPrefix, n: int) -> CornerMatrix:
    return CornerMatrix(p.block(n), hermitian=p.hermitian)


def tail(p: MatrixPrefix, m: int) -> MatrixPrefix:
    """Shifted prefix with ``tail(p, m).entry(i, j) == p.entry(m + i, m + j)``."""
    return MatrixPrefix(TailSource(p.source, m))


def conjugate_check_u(p: MatrixPrefix, m: int) -> MatrixPrefix:
    """Conjugate by the block-swap unitary of size ``m``.

    The unitary is a real symmetric permutation matrix equal to its own
    inverse, so the same entry permutation serves both the Hermitian
    conjugation action and the two-sided action on complex matrices.
    """
    return MatrixPrefix(CheckUSource(p.source, m))


def frobenius_window(p: MatrixPrefix, n: int) -> float:
    """Sum of ``|z_ij|**2`` over ``i, j <= n``, correctly rounded."""
    a = p.block(n)
    return math.fsum(np.concatenate([(a.real ** 2).ravel(), (a.imag ** 2).ravel()]))
