"""k-form fields on charts, their transport, pointwise norms and L^p norms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb
from typing import Callable, Optional

import numpy as np

from .diffeo import Diffeomorphism, inverse_spectrum, jacobian_matrix, singular_spectrum
from .errors import ArgumentError, DegreeError, NumericError, ShapeError
from .geometry import (
    ChartDomain,
    QuadratureRule,
    integrate_values,
    orthonormal_frame,
    sup_norm_estimate,
)
from .multilinear import comass_norms, compound

__all__ = [
    "FormField",
    "PointwiseReport",
    "pullback",
    "pushforward",
    "pointwise_norm",
    "lp_norm",
    "lp_from_values",
    "parse_exponent",
    "verify_pointwise_bounds",
]

CoeffMap = Callable[[np.ndarray], np.ndarray]
Mask = Callable[[np.ndarray], np.ndarray]

SUPPORT_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class FormField:
    """A k-form ``sum_I coeffs_I(x) dx^I`` on ``chart``.

    ``coeffs`` maps ``(m, n)`` points to ``(m, binomial(n, k))``.  When a
    ``support_mask`` is given the coefficients must vanish where it is false.
    """

    chart: ChartDomain
    k: int
    coeffs: CoeffMap
    support_mask: Optional[Mask] = None
    name: str = ""

    def __post_init__(self):
        if not 0 <= self.k <= self.chart.n:
            raise DegreeError(f"degree {self.k} out of range 0..{self.chart.n}")

    @property
    def n(self) -> int:
        return self.chart.n

    @property
    def rank(self) -> int:
        return comb(self.n, self.k)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        c = np.asarray(self.coeffs(pts), dtype=float)
        if c.ndim == 1 and self.rank == 1:
            c = c[:, None]
        if c.shape != (pts.shape[0], self.rank):
            raise ShapeError(
                f"{self.name or 'form'}: coefficients have shape {c.shape}, "
                f"expected {(pts.shape[0], self.rank)}"
            )
        finite = np.all(np.isfinite(c), axis=1)
        if not np.all(finite):
            bad = pts[int(np.argmin(finite))]
            raise NumericError(
                f"{self.name or 'form'}: non-finite coefficients at {bad.tolist()}", location=bad
            )
        return c

    def mask(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        if self.support_mask is None:
            return np.ones(pts.shape[0], dtype=bool)
        return np.asarray(self.support_mask(pts), dtype=bool)

    def support_violation(self, points: np.ndarray) -> float:
        """Largest coefficient magnitude found outside the support mask."""
        pts = np.atleast_2d(points)
        outside = ~self.mask(pts)
        if not np.any(outside):
            return 0.0
        return float(np.max(np.abs(self.evaluate(pts[outside]))))


def _transport(phi: Diffeomorphism, eta: FormField) -> FormField:
    if eta.chart is not phi.target:
        if eta.n != phi.n:
            raise ShapeError(f"form lives in dimension {eta.n}, map in {phi.n}")
    k = eta.k
    target = phi.target

    def coeffs(x):
        x = np.atleast_2d(x)
        y = phi.apply(x)
        inside = target.contains(y)
        out = np.zeros((x.shape[0], eta.rank))
        if not np.any(inside):
            return out
        xi, yi = x[inside], y[inside]
        vals = eta.evaluate(yi)
        if k == 0:
            out[inside] = vals
        else:
            C = compound(jacobian_matrix(phi, xi), k)
            out[inside] = np.einsum("mji,mj->mi", C, vals)
        return out

    mask = None
    if eta.support_mask is not None:
        def mask(x):
            x = np.atleast_2d(x)
            y = phi.apply(x)
            return target.contains(y) & eta.mask(y)

    label = f"pullback({eta.name})" if eta.name else ""
    return FormField(phi.source, k, coeffs, mask, label)


def pullback(phi: Diffeomorphism, eta: FormField) -> FormField:
    """``phi^* eta`` on the source chart.

    Coefficients transform by the transposed compound of the coordinate
    Jacobian: ``(phi^* eta)_J(x) = sum_I C_k(D phi(x))_{I J} eta_I(phi(x))``.
    Points mapped outside the target box get zero coefficients.
    """
    return _transport(phi, eta)


def pushforward(phi: Diffeomorphism, omega: FormField) -> FormField:
    """``phi_* omega = (phi^{-1})^* omega`` on the target chart."""
    pushed = _transport(phi.inverted(), omega)
    label = f"pushforward({omega.name})" if omega.name else ""
    return FormField(pushed.chart, pushed.k, pushed.coeffs, pushed.support_mask, label)


def pointwise_norm(omega: FormField, x: np.ndarray, *, seed: int = 0) -> np.ndarray | float:
    """Spectral norm ``|omega|(x)`` measured with the chart metric.

    Coefficients are moved to the orthonormal frame by ``C_k(E(x))^T`` and
    the comass norm is taken there.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    c = omega.evaluate(pts)
    k = omega.k
    if k > 0:
        E = orthonormal_frame(omega.chart, pts)
        c = np.einsum("mji,mj->mi", compound(E, k), c)
    out = comass_norms(omega.n, k, c, seed=seed)
    return float(out[0]) if np.ndim(x) == 1 else out


def parse_exponent(p) -> float:
    """Accept a real ``p >= 1`` or ``inf`` in any common spelling."""
    if isinstance(p, str):
        if p.strip().lower() in ("inf", "infinity", "∞"):
            return math.inf
        try:
            p = float(p)
        except ValueError:
            raise ArgumentError(f"not an exponent: {p!r}") from None
    p = float(p)
    if math.isnan(p) or p < 1:
        raise ArgumentError(f"exponent must lie in [1, inf], got {p}")
    return p


def lp_from_values(chart: ChartDomain, rule: QuadratureRule, norms: np.ndarray, p: float) -> float:
    """``(integral of |omega|^p)^(1/p)`` from pointwise norms at the nodes."""
    p = parse_exponent(p)
    if math.isinf(p):
        raise ArgumentError("lp_from_values handles finite p only")
    total = integrate_values(chart, rule, np.asarray(norms, dtype=float) ** p)
    return max(total, 0.0) ** (1.0 / p)


def lp_norm(
    omega: FormField,
    p,
    rule: QuadratureRule,
    *,
    samples: int = 4096,
    extra_points: np.ndarray | None = None,
) -> float:
    """L^p norm of a form; ``p = inf`` is estimated by dense sampling."""
    p = parse_exponent(p)
    if math.isinf(p):
        return sup_norm_estimate(
            omega.chart,
            lambda pts: pointwise_norm(omega, pts),
            samples,
            rule=rule,
            extra_points=extra_points,
        )
    return lp_from_values(omega.chart, rule, pointwise_norm(omega, rule.nodes), p)


@dataclass(frozen=True)
class PointwiseReport:
    """Worst pointwise excess ``lhs - rhs`` for both transport directions."""

    checked: int
    push_max_violation: float
    push_location: Optional[np.ndarray]
    pull_max_violation: Optional[float]
    pull_location: Optional[np.ndarray]
    tol: float

    @property
    def ok(self) -> bool:
        worst = self.push_max_violation
        if self.pull_max_violation is not None:
            worst = max(worst, self.pull_max_violation)
        return worst <= self.tol


def verify_pointwise_bounds(
    phi: Diffeomorphism,
    omega: FormField,
    points: np.ndarray,
    *,
    eta: FormField | None = None,
    tol: float = 1e-8,
) -> PointwiseReport:
    """Check ``|phi_* omega|(phi x) <= beta_1..beta_k |omega|(x)`` at source points.

    With ``eta`` (a form on the target) also check
    ``|phi^* eta|(x) <= alpha_1..alpha_k |eta|(phi x)``.
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    y = phi.apply(x)
    k = omega.k

    beta = inverse_spectrum(phi, y)
    lhs = pointwise_norm(pushforward(phi, omega), y)
    rhs = beta.top_product(k) * pointwise_norm(omega, x)
    excess = lhs - rhs
    i = int(np.argmax(excess))
    push_v, push_at = float(excess[i]), x[i]

    pull_v = pull_at = None
    if eta is not None:
        alpha = singular_spectrum(phi, x)
        lhs = pointwise_norm(pullback(phi, eta), x)
        rhs = alpha.top_product(eta.k) * pointwise_norm(eta, y)
        excess = lhs - rhs
        j = int(np.argmax(excess))
        pull_v, pull_at = float(excess[j]), x[j]

    return PointwiseReport(x.shape[0], push_v, push_at, pull_v, pull_at, tol)
