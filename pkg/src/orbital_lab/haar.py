"""Haar-random unitaries, orbital samples and Monte-Carlo orbital averages.

Haar sampling uses the QR factorization of a complex Ginibre matrix with the
phases of ``diag(R)`` moved into ``Q``; without that correction ``Q`` is not
Haar distributed.

An :class:`Observable` only reads a ``w x w`` window of a matrix.  Conjugating
by ``u`` in ``U(n)`` changes the window only through the first ``w`` columns of
``u``, and those columns are exactly the phase-corrected reduced QR factor of
the first ``w`` Gaussian columns.  :func:`orbital_windows` exploits this to draw
from the orbital measure at cost ``O(n^2 w)`` per sample instead of ``O(n^3)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple

import numpy as np

from .matrix_core import COMPLEX, HERMITIAN, CornerMatrix, MatrixPrefix

__all__ = [
    "as_generator",
    "haar_unitary",
    "haar_unitaries",
    "haar_frames",
    "orbital_sample_h",
    "orbital_sample_z",
    "orbital_windows",
    "Observable",
    "OBSERVABLES",
    "register_observable",
    "observable",
    "clamp",
    "DEFAULT_BOUND",
    "OrbitalAverage",
    "orbital_values",
    "orbital_average",
]

DEFAULT_BOUND = 1e6
_CHUNK_BYTES = 64 * 2 ** 20


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator or an integer seed (mapped to a Philox stream)."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        raise ValueError("an explicit random stream or seed is required")
    return np.random.Generator(np.random.Philox(int(rng)))


def _ginibre(rng, shape) -> np.ndarray:
    g = rng.standard_normal(shape + (2,))
    return (g[..., 0] + 1j * g[..., 1]) / np.sqrt(2.0)


def _phase_fixed_q(g: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(g)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    ad = np.abs(d)
    ph = np.where(ad > 0, d / np.where(ad > 0, ad, 1.0), 1.0)
    return q * ph[..., None, :]


def haar_unitaries(n: int, size: int, rng) -> np.ndarray:
    """``size`` independent Haar unitaries, shape ``(size, n, n)``."""
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    return _phase_fixed_q(_ginibre(as_generator(rng), (size, n, n)))


def haar_unitary(n: int, rng) -> CornerMatrix:
    """One ``n x n`` Haar-distributed unitary."""
    return CornerMatrix(haar_unitaries(n, 1, rng)[0])


def haar_frames(n: int, w: int, size: int, rng) -> np.ndarray:
    """First ``w`` columns of ``size`` Haar unitaries, shape ``(size, n, w)``."""
    if not 1 <= w <= n:
        raise ValueError(f"need 1 <= w <= n, got w={w}, n={n}")
    return _phase_fixed_q(_ginibre(as_generator(rng), (size, n, w)))


def _hermitize(a: np.ndarray) -> np.ndarray:
    # (a + a^H) / 2 is exactly conjugate-symmetric in floating point.
    return (a + np.conj(np.swapaxes(a, -1, -2))) / 2


def orbital_sample_h(p: MatrixPrefix, n: int, rng) -> CornerMatrix:
    """``u* h(n) u`` for a fresh Haar ``u``; ``p`` must be Hermitian."""
    if p.kind != HERMITIAN:
        raise ValueError(f"orbital_sample_h needs a hermitian prefix, got {p.kind!r}")
    c = p.block(n)
    if n == 1:
        # U(1) acts trivially by conjugation; skip the |u|^2 rounding.
        return CornerMatrix(c, hermitian=True)
    u = haar_unitaries(n, 1, rng)[0]
    return CornerMatrix(_hermitize(u.conj().T @ c @ u), hermitian=True)


def orbital_sample_z(p: MatrixPrefix, n: int, rng) -> CornerMatrix:
    """``u1 z(n) u2*`` for independent Haar ``u1, u2``; ``p`` must be complex."""
    if p.kind != COMPLEX:
        raise ValueError(f"orbital_sample_z needs a complex prefix, got {p.kind!r}")
    c = p.block(n)
    u = haar_unitaries(n, 2, rng)
    return CornerMatrix(u[0] @ c @ u[1].conj().T)


def orbital_windows(p: MatrixPrefix, n: int, w: int, samples: int, rng) -> np.ndarray:
    """Top-left ``w x w`` windows of ``samples`` orbital draws at level ``n``.

    Shape ``(samples, w, w)``.  Distributed exactly as the windows of
    :func:`orbital_sample_h` / :func:`orbital_sample_z` outputs.
    """
    rng = as_generator(rng)
    c = np.asarray(p.block(n))
    per = max(1, _CHUNK_BYTES // (16 * n * max(w, 1) * 3))
    out = np.empty((samples, w, w), dtype=complex)
    for start in range(0, samples, per):
        s = min(per, samples - start)
        if p.kind == HERMITIAN and n == 1:
            win = np.broadcast_to(c, (s, 1, 1))
        elif p.kind == HERMITIAN:
            f = haar_frames(n, w, s, rng)
            win = _hermitize(np.conj(np.swapaxes(f, -1, -2)) @ (c @ f))
        else:
            # Rows of a Haar unitary are the transposed columns of another.
            f1 = haar_frames(n, w, s, rng)
            f2 = haar_frames(n, w, s, rng)
            win = np.swapaxes(f1, -1, -2) @ c @ f2.conj()
        out[start:start + s] = win
    return out


def clamp(x, bound: float = DEFAULT_BOUND):
    return np.clip(x, -bound, bound)


@dataclass(frozen=True)
class Observable:
    """Bounded continuous function of the ``window x window`` corner.

    ``body`` maps an array of windows ``(S, w, w)`` to ``S`` reals.  ``positive``
    records that the function is strictly positive everywhere.
    """

    name: str
    window: int
    body: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    bound: float = DEFAULT_BOUND
    positive: bool = False
    params: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")

    def evaluate(self, windows: np.ndarray) -> np.ndarray:
        """Values on a stack of matrices of size at least ``window``."""
        a = np.asarray(windows)
        if a.shape[-1] < self.window or a.shape[-2] < self.window:
            raise ValueError(f"matrices of size {a.shape[-2:]} are smaller than window {self.window}")
        w = self.window
        return np.asarray(self.body(a[..., :w, :w]), dtype=float)

    def __call__(self, x) -> float:
        if isinstance(x, CornerMatrix):
            x = x.entries
        return float(self.evaluate(np.asarray(x)[None])[0])

    def describe(self) -> dict[str, Any]:
        return {"name": self.name, **self.params}


OBSERVABLES: dict[str, Callable[..., Observable]] = {}


def register_observable(name: str):
    def deco(factory):
        OBSERVABLES[name] = factory
        return factory
    return deco


def observable(name: str, **params) -> Observable:
    """Build a registered observable, e.g. ``observable("coord-re", i=1, j=1)``."""
    try:
        factory = OBSERVABLES[name]
    except KeyError:
        raise ValueError(f"unknown observable {name!r}; known: {sorted(OBSERVABLES)}") from None
    return factory(**params)


@register_observable("constant")
def _constant(value: float = 1.0) -> Observable:
    value = float(value)
    return Observable("constant", 1, lambda a: np.full(a.shape[:-2], value),
                      bound=abs(value), positive=value > 0, params={"value": value})


@register_observable("coord-re")
def _coord_re(i: int = 1, j: int = 1, bound: float = DEFAULT_BOUND) -> Observable:
    """``Re x_ij`` clamped to ``[-bound, bound]``."""
    i, j, bound = int(i), int(j), float(bound)
    return Observable("coord-re", max(i, j), lambda a: clamp(a[..., i - 1, j - 1].real, bound),
                      bound=bound, params={"i": i, "j": j, "bound": bound})


@register_observable("inv-abs")
def _inv_abs(i: int = 1, j: int = 1) -> Observable:
    """``1 / (1 + |x_ij|)``."""
    i, j = int(i), int(j)
    return Observable("inv-abs", max(i, j), lambda a: 1.0 / (1.0 + np.abs(a[..., i - 1, j - 1])),
                      bound=1.0, positive=True, params={"i": i, "j": j})


class OrbitalAverage(NamedTuple):
    mean: float
    stderr: float


def orbital_values(f: Observable, p: MatrixPrefix, n: int, samples: int, rng) -> np.ndarray:
    """Values of ``f`` on ``samples`` independent draws from the orbital measure at level ``n``."""
    if f.window > n:
        raise ValueError(f"observable window {f.window} exceeds n = {n}")
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    return f.evaluate(orbital_windows(p, n, f.window, samples, rng))


def _mean_stderr(values: np.ndarray) -> OrbitalAverage:
    mean = float(np.mean(values))
    if len(values) < 2:
        return OrbitalAverage(mean, float("nan"))
    return OrbitalAverage(mean, float(np.std(values, ddof=1) / np.sqrt(len(values))))


def orbital_average(f: Observable, p: MatrixPrefix, n: int, samples: int, rng) -> OrbitalAverage:
    """Monte-Carlo estimate of the orbital average of ``f`` at level ``n``."""
    return _mean_stderr(orbital_values(f, p, n, samples, rng))
