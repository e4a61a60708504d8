"""Orientation-preserving diffeomorphisms between chart domains.

Maps are given by vectorized callables on ``(m, n)`` point arrays.  The
inverse map is always supplied by the caller; nothing here inverts maps
numerically.  Every pointwise operation accepts a single point ``(n,)`` or
a batch ``(m, n)`` and returns results of matching rank.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import eigh

from .errors import DegenerateMapError, OrientationError, ShapeError
from .geometry import ChartDomain
from .multilinear import singular_values

__all__ = [
    "Diffeomorphism",
    "SingularSpectrum",
    "jacobian_matrix",
    "frame_matrix",
    "singular_spectrum",
    "jacobian_determinant",
    "inverse_spectrum",
    "minimax_singular_oracle",
    "singular_value_bracket",
    "DEGENERACY_CUTOFF",
]

PointMap = Callable[[np.ndarray], np.ndarray]
JacobianMap = Callable[[np.ndarray], np.ndarray]

DEFAULT_FD_STEP = 1e-5
DEGENERACY_CUTOFF = 1e-12


@dataclass(frozen=True, eq=False)
class Diffeomorphism:
    """A map ``source -> target`` with its inverse.

    ``jacobian`` and ``inverse_jacobian`` are optional analytic coordinate
    Jacobians ``dy^a/dx^b``; without them central differences are used.
    """

    source: ChartDomain
    target: ChartDomain
    forward: PointMap
    inverse: PointMap
    jacobian: Optional[JacobianMap] = None
    inverse_jacobian: Optional[JacobianMap] = None
    fd_step: float = DEFAULT_FD_STEP
    name: str = ""

    def __post_init__(self):
        if self.source.n != self.target.n:
            raise ShapeError(
                f"source and target dimensions differ: {self.source.n} vs {self.target.n}"
            )
        if not self.fd_step > 0:
            raise ShapeError("fd_step must be positive")

    @property
    def n(self) -> int:
        return self.source.n

    def apply(self, x: np.ndarray) -> np.ndarray:
        """``phi(x)`` reduced onto the target's periodic axes."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(self.forward(np.atleast_2d(x)), dtype=float)
        y = self.target.wrap(y)
        return y[0] if x.ndim == 1 else y

    def apply_inverse(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        x = np.asarray(self.inverse(np.atleast_2d(y)), dtype=float)
        x = self.source.wrap(x)
        return x[0] if y.ndim == 1 else x

    def inverted(self) -> "Diffeomorphism":
        """The inverse diffeomorphism ``target -> source``."""
        return Diffeomorphism(
            source=self.target,
            target=self.source,
            forward=self.inverse,
            inverse=self.forward,
            jacobian=self.inverse_jacobian,
            inverse_jacobian=self.jacobian,
            fd_step=self.fd_step,
            name=f"inverse({self.name})" if self.name else "",
        )


@dataclass(frozen=True, eq=False)
class SingularSpectrum:
    """Descending singular values ``alphas`` at ``point`` (batched rows)."""

    alphas: np.ndarray
    point: np.ndarray

    def top_product(self, k: int) -> np.ndarray:
        return np.prod(self.alphas[..., :k], axis=-1)

    def bottom_product(self, k: int) -> np.ndarray:
        n = self.alphas.shape[-1]
        return np.prod(self.alphas[..., n - k:], axis=-1)


def _fd_jacobian(phi: Diffeomorphism, x: np.ndarray) -> np.ndarray:
    m, n = x.shape
    h = phi.fd_step
    J = np.empty((m, n, n))
    for b in range(n):
        step = np.zeros(n)
        step[b] = h
        plus = np.asarray(phi.forward(x + step), dtype=float)
        minus = np.asarray(phi.forward(x - step), dtype=float)
        J[:, :, b] = phi.target.periodic_difference(plus, minus) / (2.0 * h)
    return J


def _raw_jacobian(phi: Diffeomorphism, x: np.ndarray) -> np.ndarray:
    if phi.jacobian is not None:
        J = np.asarray(phi.jacobian(x), dtype=float)
        if J.shape != (x.shape[0], phi.n, phi.n):
            raise ShapeError(f"analytic jacobian returned shape {J.shape}")
        return J
    return _fd_jacobian(phi, x)


def jacobian_matrix(phi: Diffeomorphism, x: np.ndarray, *, check: bool = True) -> np.ndarray:
    """Coordinate Jacobian ``D phi(x)``; raises if its determinant is <= 0."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    J = _raw_jacobian(phi, pts)
    if check:
        det = np.linalg.det(J)
        if np.any(~(det > 0)):
            bad = int(np.argmin(np.where(np.isfinite(det), det, -np.inf)))
            raise OrientationError(
                f"{phi.name or 'map'}: det D phi = {det[bad]:.3e} <= 0 at {pts[bad].tolist()}",
                location=pts[bad],
            )
    return J[0] if np.ndim(x) == 1 else J


def frame_matrix(phi: Diffeomorphism, x: np.ndarray) -> np.ndarray:
    """Tangent map in orthonormal frames: ``E_N(phi(x))^{-1} D phi(x) E_M(x)``.

    With Cholesky frames ``E = L^{-T}`` this is ``L_N^T D phi L_M^{-T}``.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    D = jacobian_matrix(phi, pts)
    L_M = phi.source.metric_cholesky(pts)
    L_N = phi.target.metric_cholesky(phi.apply(pts))
    right = np.linalg.inv(np.swapaxes(L_M, -1, -2))
    Phi = np.swapaxes(L_N, -1, -2) @ D @ right
    return Phi[0] if np.ndim(x) == 1 else Phi


def _spectrum_from_frame(Phi: np.ndarray, pts: np.ndarray, name: str) -> SingularSpectrum:
    alphas = singular_values(Phi)
    low = alphas[:, -1] <= DEGENERACY_CUTOFF
    if np.any(low):
        bad = int(np.argmax(low))
        raise DegenerateMapError(
            f"{name or 'map'}: smallest singular value {alphas[bad, -1]:.3e} "
            f"<= {DEGENERACY_CUTOFF:g} at {pts[bad].tolist()}",
            location=pts[bad],
        )
    return SingularSpectrum(alphas, pts)


def singular_spectrum(phi: Diffeomorphism, x: np.ndarray) -> SingularSpectrum:
    """Singular values of ``phi`` at ``x`` (rows, for a batch of points)."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    spec = _spectrum_from_frame(frame_matrix(phi, pts), pts, phi.name)
    if np.ndim(x) == 1:
        return SingularSpectrum(spec.alphas[0], spec.point[0])
    return spec


def jacobian_determinant(phi: Diffeomorphism, x: np.ndarray) -> np.ndarray | float:
    """Jacobian determinant with respect to the Riemannian volume forms.

    Computed as ``sqrt(det g_N(phi(x))) det D phi(x) / sqrt(det g_M(x))``,
    without going through the singular values.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    D = jacobian_matrix(phi, pts)
    L_M = phi.source.metric_cholesky(pts)
    L_N = phi.target.metric_cholesky(phi.apply(pts))
    rho_M = np.prod(np.diagonal(L_M, axis1=-2, axis2=-1), axis=-1)
    rho_N = np.prod(np.diagonal(L_N, axis1=-2, axis2=-1), axis=-1)
    J = rho_N * np.linalg.det(D) / rho_M
    return float(J[0]) if np.ndim(x) == 1 else J


def inverse_spectrum(phi: Diffeomorphism, y: np.ndarray) -> SingularSpectrum:
    """Singular values ``beta`` of ``phi^{-1}`` at target points ``y``."""
    return singular_spectrum(phi.inverted(), y)


def _stretch_quadratic(phi: Diffeomorphism, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # |T phi X|^2_{g_N} = X^T K X, |X|^2_{g_M} = X^T G X in coordinates
    D = jacobian_matrix(phi, x)[0]
    gN = phi.target.metric_at(phi.apply(x))[0]
    G = phi.source.metric_at(x)[0]
    K = D.T @ gN @ D
    return K, G


def minimax_singular_oracle(
    phi: Diffeomorphism, x: np.ndarray, i: int, *, angles: int = 10_000,
    subspaces: int = 4000, seed: int = 0,
) -> float:
    """Singular value ``alpha_i`` from the min-max characterization.

    ``alpha_i = min over (n-i+1)-dim S of max over X in S of |T phi X| / |X|``
    with lengths measured in the two metrics directly (no frames, no SVD).
    For ``n = 2`` the subspaces are lines and the sweep over ``angles``
    directions is exhaustive up to the angular resolution.  For ``n = 3`` the
    outer minimum is taken over ``subspaces`` random subspaces, so the
    result is an upper estimate; see :func:`singular_value_bracket`.
    """
    n = phi.n
    if not 1 <= i <= n:
        raise ShapeError(f"singular value index {i} outside 1..{n}")
    x = np.asarray(x, dtype=float).reshape(1, n)
    if n == 2:
        K, G = _stretch_quadratic(phi, x)
        theta = np.linspace(0.0, np.pi, angles, endpoint=False)
        X = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        stretch = np.sqrt(
            np.einsum("ma,ab,mb->m", X, K, X) / np.einsum("ma,ab,mb->m", X, G, X)
        )
        # i = 1: the only 2-dim subspace is the plane; i = 2: minimum over lines
        return float(stretch.max() if i == 1 else stretch.min())
    if n == 3:
        return singular_value_bracket(phi, x[0], i, subspaces=subspaces, seed=seed)[1]
    raise NotImplementedError("minimax oracle is implemented for n = 2 and n = 3 only")


def _rayleigh_extremes(K: np.ndarray, G: np.ndarray, B: np.ndarray) -> tuple[float, float]:
    # extreme stretch over span(B): generalized eigenproblem on the subspace
    w = eigh(B.T @ K @ B, B.T @ G @ B, eigvals_only=True)
    w = np.sqrt(np.maximum(w, 0.0))
    return float(w[0]), float(w[-1])


def singular_value_bracket(
    phi: Diffeomorphism, x: np.ndarray, i: int, *, subspaces: int = 4000, seed: int = 0,
) -> tuple[float, float]:
    """``(maximin, minimax)`` estimates of ``alpha_i`` from random subspaces.

    Inner extrema are exact on each sampled subspace, so the first value
    never exceeds ``alpha_i`` and the second never falls below it.
    """
    n = phi.n
    if not 1 <= i <= n:
        raise ShapeError(f"singular value index {i} outside 1..{n}")
    x = np.asarray(x, dtype=float).reshape(1, n)
    K, G = _stretch_quadratic(phi, x)
    rng = np.random.default_rng(seed)
    lower = 0.0
    upper = np.inf
    for _ in range(subspaces):
        B_max, _ = np.linalg.qr(rng.standard_normal((n, n - i + 1)))
        upper = min(upper, _rayleigh_extremes(K, G, B_max)[1])
        B_min, _ = np.linalg.qr(rng.standard_normal((n, i)))
        lower = max(lower, _rayleigh_extremes(K, G, B_min)[0])
    return lower, upper
