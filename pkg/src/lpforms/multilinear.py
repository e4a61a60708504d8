"""Exterior algebra on an n-dimensional inner-product space.

Alternating k-tensors are stored by their coefficients on the cobasis
``e^I`` for strictly increasing multi-indices ``I`` in lexicographic order,
with ``coeffs[I] = A(e_i1, ..., e_ik)``.  The same ordering indexes the
rows and columns of compound matrices, so that ``compound(Phi, k)`` acts on
k-vector coefficients exactly as ``Phi`` acts on vectors.
"""

from __future__ import annotations

import itertools
import string
from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Sequence

import numpy as np

from .errors import DegreeError, NumericError, ShapeError

__all__ = [
    "MultiIndexTable",
    "AlternatingTensor",
    "lex_multi_indices",
    "apply_to_vectors",
    "wedge",
    "wedge_vectors",
    "compound",
    "singular_values",
    "comass_norm",
    "comass_norms",
    "hodge_star",
    "permutation_sign",
]

MAX_DIM = 8

COMASS_RESTARTS = 16
COMASS_TOL = 1e-10
COMASS_MAX_ITER = 200


@dataclass(frozen=True)
class MultiIndexTable:
    """Strictly increasing k-tuples from ``{1..n}`` in lexicographic order."""

    n: int
    k: int
    indices: tuple[tuple[int, ...], ...]

    @property
    def rank(self) -> int:
        return len(self.indices)

    @property
    def zero_based(self) -> np.ndarray:
        """Indices as an integer array of shape ``(rank, k)`` counting from 0."""
        return np.array(self.indices, dtype=int).reshape(self.rank, self.k) - 1

    def position(self, index: Sequence[int]) -> int:
        return self.indices.index(tuple(index))

    def complement(self, index: Sequence[int]) -> tuple[int, ...]:
        present = set(index)
        return tuple(i for i in range(1, self.n + 1) if i not in present)


def _check_degree(n: int, k: int) -> None:
    if n < 1:
        raise ShapeError(f"dimension must be >= 1, got {n}")
    if k < 0 or k > n:
        raise DegreeError(f"degree {k} out of range 0..{n}")


@lru_cache(maxsize=None)
def lex_multi_indices(n: int, k: int) -> MultiIndexTable:
    """Enumerate the ``binomial(n, k)`` multi-indices of degree ``k``.

    >>> lex_multi_indices(3, 2).indices
    ((1, 2), (1, 3), (2, 3))
    """
    _check_degree(n, k)
    return MultiIndexTable(n, k, tuple(itertools.combinations(range(1, n + 1), k)))


def permutation_sign(seq: Sequence[int]) -> int:
    """Sign of the permutation sorting ``seq`` (entries distinct)."""
    inversions = sum(
        1 for a, b in itertools.combinations(range(len(seq)), 2) if seq[a] > seq[b]
    )
    return -1 if inversions % 2 else 1


@dataclass(frozen=True, eq=False)
class AlternatingTensor:
    """An alternating k-linear form on R^n given by cobasis coefficients."""

    n: int
    k: int
    coeffs: np.ndarray

    def __post_init__(self):
        _check_degree(self.n, self.k)
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        if c.shape[0] != comb(self.n, self.k):
            raise ShapeError(
                f"expected {comb(self.n, self.k)} coefficients for n={self.n}, "
                f"k={self.k}, got {c.shape[0]}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def basis(cls, n: int, index: Sequence[int], scale: float = 1.0) -> "AlternatingTensor":
        """The cobasis element ``scale * e^I`` for a 1-based increasing ``index``."""
        table = lex_multi_indices(n, len(index))
        c = np.zeros(table.rank)
        c[table.position(index)] = scale
        return cls(n, len(index), c)

    @classmethod
    def scalar(cls, n: int, value: float) -> "AlternatingTensor":
        return cls(n, 0, [value])

    @property
    def table(self) -> MultiIndexTable:
        return lex_multi_indices(self.n, self.k)

    def _like(self, other: "AlternatingTensor") -> None:
        if (self.n, self.k) != (other.n, other.k):
            raise ShapeError(
                f"cannot combine (n={self.n}, k={self.k}) with (n={other.n}, k={other.k})"
            )

    def __add__(self, other: "AlternatingTensor") -> "AlternatingTensor":
        self._like(other)
        return AlternatingTensor(self.n, self.k, self.coeffs + other.coeffs)

    def __sub__(self, other: "AlternatingTensor") -> "AlternatingTensor":
        self._like(other)
        return AlternatingTensor(self.n, self.k, self.coeffs - other.coeffs)

    def __mul__(self, scale: float) -> "AlternatingTensor":
        return AlternatingTensor(self.n, self.k, float(scale) * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self) -> "AlternatingTensor":
        return AlternatingTensor(self.n, self.k, -self.coeffs)

    def allclose(self, other: "AlternatingTensor", atol: float = 1e-12) -> bool:
        return (self.n, self.k) == (other.n, other.k) and bool(
            np.allclose(self.coeffs, other.coeffs, rtol=0.0, atol=atol)
        )

    def pullback(self, Phi: np.ndarray) -> "AlternatingTensor":
        """The form ``A o C_k(Phi)``, i.e. ``X -> A(Phi X_1, ..., Phi X_k)``."""
        C = compound(Phi, self.k)
        return AlternatingTensor(self.n, self.k, C.T @ self.coeffs)

    def full(self) -> np.ndarray:
        """Dense antisymmetric array of shape ``(n,) * k``."""
        T = np.zeros((self.n,) * self.k)
        for idx, c in zip(self.table.zero_based, self.coeffs):
            if c == 0.0:
                continue
            for perm in itertools.permutations(range(self.k)):
                T[tuple(idx[list(perm)])] = permutation_sign(perm) * c
        return T


def wedge_vectors(vectors: Sequence[Sequence[float]] | np.ndarray) -> np.ndarray:
    """Coefficients of the k-vector ``X_1 ^ ... ^ X_k``.

    ``vectors`` has shape ``(k, n)``; entry ``I`` of the result is the
    ``k x k`` minor of the column-stacked matrix on rows ``I``.
    """
    X = np.atleast_2d(np.asarray(vectors, dtype=float))
    k, n = X.shape
    if k == 0:
        return np.ones(1)
    rows = lex_multi_indices(n, k).zero_based
    return np.linalg.det(X.T[rows, :])


def apply_to_vectors(A: AlternatingTensor, X: Sequence[Sequence[float]] | np.ndarray) -> float:
    """Evaluate ``A(X_1, ..., X_k)``."""
    X = np.asarray(X, dtype=float)
    if A.k == 0:
        if X.size != 0:
            raise ShapeError("a 0-form takes no vector arguments")
        return float(A.coeffs[0])
    if X.shape != (A.k, A.n):
        raise ShapeError(f"expected {A.k} vectors of length {A.n}, got shape {X.shape}")
    return float(A.coeffs @ wedge_vectors(X))


def wedge(A: AlternatingTensor, B: AlternatingTensor) -> AlternatingTensor:
    """Exterior product of a j-form and a k-form."""
    if A.n != B.n:
        raise ShapeError(f"dimension mismatch: {A.n} vs {B.n}")
    n, j, k = A.n, A.k, B.k
    if j + k > n:
        raise DegreeError(f"wedge of degrees {j} and {k} exceeds dimension {n}")
    out = lex_multi_indices(n, j + k)
    coeffs = np.zeros(out.rank)
    pos = {I: p for p, I in enumerate(out.indices)}
    for a, I in zip(A.coeffs, A.table.indices):
        if a == 0.0:
            continue
        for b, J in zip(B.coeffs, B.table.indices):
            if b == 0.0 or set(I) & set(J):
                continue
            K = tuple(sorted(I + J))
            coeffs[pos[K]] += permutation_sign(I + J) * a * b
    return AlternatingTensor(n, j + k, coeffs)


@lru_cache(maxsize=None)
def _minor_index(n: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    idx = lex_multi_indices(n, k).zero_based
    rows = idx[:, None, :, None]
    cols = idx[None, :, None, :]
    return rows, cols


def compound(Phi: np.ndarray, k: int) -> np.ndarray:
    """k-th compound matrix: entry ``(I, J)`` is ``det(Phi[I, J])``.

    Accepts a stack of square matrices with shape ``(..., n, n)``.
    """
    Phi = np.asarray(Phi, dtype=float)
    if Phi.ndim < 2 or Phi.shape[-1] != Phi.shape[-2]:
        raise ShapeError(f"compound needs square matrices, got shape {Phi.shape}")
    n = Phi.shape[-1]
    _check_degree(n, k)
    batch = Phi.shape[:-2]
    if k == 0:
        return np.ones(batch + (1, 1))
    if k == 1:
        return Phi.copy()
    rows, cols = _minor_index(n, k)
    return np.linalg.det(Phi[..., rows, cols])


def singular_values(M: np.ndarray) -> np.ndarray:
    """Singular values in descending order, clamped at zero.

    Works on a single matrix or a stack ``(..., r, c)``.
    """
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise NumericError("singular_values: matrix has non-finite entries")
    s = np.linalg.svd(M, compute_uv=False)
    return np.maximum(s, 0.0)


def _contract_except(T: np.ndarray, X: list[np.ndarray], slot: int) -> np.ndarray:
    k = T.ndim
    letters = string.ascii_lowercase[:k]
    operands = [T]
    terms = [letters]
    for j in range(k):
        if j != slot:
            operands.append(X[j])
            terms.append(letters[j])
    return np.einsum(",".join(terms) + "->" + letters[slot], *operands)


def _alternating_ascent(T: np.ndarray, X: list[np.ndarray], tol: float, max_iter: int) -> float:
    # each slot update is the exact maximizer over that unit vector
    value = 0.0
    for _ in range(max_iter):
        prev = value
        for slot in range(T.ndim):
            v = _contract_except(T, X, slot)
            nv = np.linalg.norm(v)
            if nv == 0.0:
                return value
            X[slot] = v / nv
            value = nv
        if value - prev <= tol * value:
            break
    return value


def _euclidean(c: np.ndarray) -> np.ndarray:
    # scaled so that tiny or huge coefficients neither underflow nor overflow
    scale = np.max(np.abs(c), axis=-1, keepdims=True)
    safe = np.where(scale > 0, scale, 1.0)
    return (scale * np.linalg.norm(c / safe, axis=-1, keepdims=True))[..., 0]


def comass_norm(
    A: AlternatingTensor,
    *,
    restarts: int = COMASS_RESTARTS,
    tol: float = COMASS_TOL,
    max_iter: int = COMASS_MAX_ITER,
    seed: int = 0,
) -> float:
    """Spectral (comass) norm: ``max |A(X_1..X_k)|`` over unit vectors.

    For ``k`` in ``{0, 1, n-1, n}`` every k-vector is decomposable and the
    norm equals the Euclidean norm of the coefficients.  Otherwise the
    maximum is found by alternating slot-wise maximization from the
    dominant coordinate k-plane plus ``restarts`` random starts.
    """
    n, k = A.n, A.k
    c = A.coeffs
    if k in (0, 1, n - 1, n):
        return float(_euclidean(c))
    if not np.any(c):
        return 0.0
    T = A.full()
    rng = np.random.default_rng(seed)
    eye = np.eye(n)
    best = float(np.max(np.abs(c)))
    start = A.table.zero_based[int(np.argmax(np.abs(c)))]
    starts = [[eye[i].copy() for i in start]]
    starts += [list(rng.standard_normal((k, n))) for _ in range(restarts)]
    for X in starts:
        X = [x / np.linalg.norm(x) for x in X]
        best = max(best, _alternating_ascent(T, X, tol, max_iter))
    return min(best, float(_euclidean(c)))


def comass_norms(n: int, k: int, coeffs: np.ndarray, *, seed: int = 0) -> np.ndarray:
    """Comass norm of each row of a ``(m, binomial(n, k))`` coefficient array."""
    coeffs = np.asarray(coeffs, dtype=float)
    if k in (0, 1, n - 1, n):
        return _euclidean(coeffs)
    flat = coeffs.reshape(-1, coeffs.shape[-1])
    out = np.array([comass_norm(AlternatingTensor(n, k, row), seed=seed) for row in flat])
    return out.reshape(coeffs.shape[:-1])


def hodge_star(A: AlternatingTensor) -> AlternatingTensor:
    """Hodge dual in an oriented orthonormal frame.

    ``*e^I = sign(I, I^c) e^{I^c}``, so the volume covector maps to 1.
    """
    n, k = A.n, A.k
    src = A.table
    dst = lex_multi_indices(n, n - k)
    out = np.zeros(dst.rank)
    for c, I in zip(A.coeffs, src.indices):
        Ic = src.complement(I)
        out[dst.position(Ic)] += permutation_sign(I + Ic) * c
    return AlternatingTensor(n, n - k, out)
