"""Single-chart Riemannian domains, orthonormal frames and quadrature.

A :class:`ChartDomain` is a coordinate box, optionally periodic along some
axes (a flat torus factor), carrying a metric field ``x -> g(x)``.  Metric
callables are vectorized: they take points of shape ``(m, n)`` and return
``(m, n, n)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from .errors import ArgumentError, MetricDegenerateError, NumericError, ShapeError

__all__ = [
    "ChartDomain",
    "QuadratureRule",
    "euclidean_metric",
    "constant_metric",
    "orthonormal_frame",
    "volume_density",
    "quadrature_nodes",
    "integrate",
    "integrate_values",
    "sample_points",
    "box_corners",
    "sup_norm_estimate",
]

MetricField = Callable[[np.ndarray], np.ndarray]

SYMMETRY_TOL = 1e-12
DEFAULT_SUP_SAMPLES = 4096
DEFAULT_ORDER = 16


def euclidean_metric(n: int) -> MetricField:
    def g(x):
        x = np.atleast_2d(x)
        return np.broadcast_to(np.eye(n), (x.shape[0], n, n)).copy()

    return g


def constant_metric(G: Sequence[Sequence[float]]) -> MetricField:
    G = np.array(G, dtype=float)

    def g(x):
        x = np.atleast_2d(x)
        return np.broadcast_to(G, (x.shape[0],) + G.shape).copy()

    return g


@dataclass(frozen=True, eq=False)
class ChartDomain:
    """An oriented coordinate box with a metric field.

    Periodic axes identify ``lower`` with ``upper``.  Orientation is the
    coordinate order.
    """

    lower: np.ndarray
    upper: np.ndarray
    periodic: tuple[bool, ...] = ()
    metric: Optional[MetricField] = None
    name: str = ""

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float).reshape(-1)
        hi = np.array(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape or lo.size == 0:
            raise ShapeError("lower and upper must be nonempty and of equal length")
        if not np.all(lo < hi):
            raise ArgumentError(f"empty box: lower={lo.tolist()} upper={hi.tolist()}")
        n = lo.size
        per = tuple(bool(p) for p in self.periodic) or (False,) * n
        if len(per) != n:
            raise ShapeError(f"periodic flags need length {n}, got {len(per)}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "periodic", per)
        if self.metric is None:
            object.__setattr__(self, "metric", euclidean_metric(n))

    @property
    def n(self) -> int:
        return self.lower.size

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def coordinate_volume(self) -> float:
        return float(np.prod(self.widths))

    def wrap(self, points: np.ndarray) -> np.ndarray:
        """Reduce periodic coordinates into ``[lower, upper)``."""
        pts = np.array(points, dtype=float)
        if any(self.periodic):
            ax = np.array(self.periodic)
            w = self.widths[ax]
            pts[..., ax] = self.lower[ax] + np.mod(pts[..., ax] - self.lower[ax], w)
        return pts

    def periodic_difference(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """``a - b`` with periodic components folded into ``[-w/2, w/2)``."""
        d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        if any(self.periodic):
            d = np.array(d)
            ax = np.array(self.periodic)
            w = self.widths[ax]
            d[..., ax] = np.mod(d[..., ax] + w / 2, w) - w / 2
        return d

    def contains(self, points: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
        """Boolean mask of points inside the box; periodic axes always pass."""
        pts = np.atleast_2d(points)
        slack = rtol * self.widths
        inside = (pts >= self.lower - slack) & (pts <= self.upper + slack)
        inside[:, np.array(self.periodic)] = True
        return np.all(inside, axis=1)

    def metric_at(self, points: np.ndarray) -> np.ndarray:
        """Evaluate and validate the metric at ``(m, n)`` points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[-1] != self.n:
            raise ShapeError(f"points must have {self.n} coordinates, got {pts.shape[-1]}")
        g = np.asarray(self.metric(pts), dtype=float)
        if g.shape != (pts.shape[0], self.n, self.n):
            raise ShapeError(f"metric returned shape {g.shape}")
        if not np.all(np.isfinite(g)):
            bad = int(np.argmax(~np.all(np.isfinite(g), axis=(1, 2))))
            raise MetricDegenerateError("metric has non-finite entries", location=pts[bad])
        asym = np.max(np.abs(g - np.swapaxes(g, -1, -2)), axis=(1, 2))
        scale = np.maximum(1.0, np.max(np.abs(g), axis=(1, 2)))
        if np.any(asym > SYMMETRY_TOL * scale):
            bad = int(np.argmax(asym / scale))
            raise MetricDegenerateError("metric is not symmetric", location=pts[bad])
        return g

    def metric_cholesky(self, points: np.ndarray) -> np.ndarray:
        """Lower Cholesky factors ``L`` with ``g = L L^T`` at each point."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        g = self.metric_at(pts)
        try:
            return np.linalg.cholesky(g)
        except np.linalg.LinAlgError:
            eig_min = np.linalg.eigvalsh(g)[:, 0]
            bad = int(np.argmin(eig_min))
            raise MetricDegenerateError(
                f"metric is not positive definite (min eigenvalue {eig_min[bad]:.3e})",
                location=pts[bad],
            ) from None


def _single(x) -> bool:
    return np.ndim(x) == 1


def orthonormal_frame(chart: ChartDomain, x: np.ndarray) -> np.ndarray:
    """Positively oriented g-orthonormal frame; columns are ``E_1..E_n``.

    ``g = L L^T`` and ``E = L^{-T}``, so ``E^T g E = I`` and ``det E > 0``.
    Accepts one point ``(n,)`` or a batch ``(m, n)``.
    """
    L = chart.metric_cholesky(x)
    E = np.linalg.inv(np.swapaxes(L, -1, -2))
    flip = np.linalg.det(E) < 0
    if np.any(flip):
        E[flip, :, -1] *= -1.0
    return E[0] if _single(x) else E


def volume_density(chart: ChartDomain, x: np.ndarray) -> np.ndarray | float:
    """Riemannian volume density ``sqrt(det g(x))``."""
    L = chart.metric_cholesky(x)
    rho = np.prod(np.diagonal(L, axis1=-2, axis2=-1), axis=-1)
    return float(rho[0]) if _single(x) else rho


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    order: int


@lru_cache(maxsize=64)
def _axis_rule(lo: float, hi: float, periodic: bool, order: int):
    if periodic:
        h = (hi - lo) / order
        return lo + h * np.arange(order), np.full(order, h)
    t, w = np.polynomial.legendre.leggauss(order)
    return lo + (t + 1.0) * (hi - lo) / 2.0, w * (hi - lo) / 2.0


def quadrature_nodes(chart: ChartDomain, order: int) -> QuadratureRule:
    """Tensor-product rule with ``order`` points per axis.

    Gauss-Legendre on bounded axes, the uniform (trapezoidal) rule on
    periodic ones.
    """
    if int(order) != order or order < 1:
        raise ArgumentError(f"quadrature order must be a positive integer, got {order}")
    order = int(order)
    axes = [
        _axis_rule(float(lo), float(hi), per, order)
        for lo, hi, per in zip(chart.lower, chart.upper, chart.periodic)
    ]
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    wgrids = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    nodes = np.stack([g.reshape(-1) for g in grids], axis=1)
    weights = np.prod(np.stack([w.reshape(-1) for w in wgrids], axis=1), axis=1)
    return QuadratureRule(nodes, weights, order)


def _check_finite(values: np.ndarray, points: np.ndarray, what: str) -> None:
    ok = np.isfinite(values)
    if not np.all(ok):
        bad = int(np.argmin(ok))
        raise NumericError(f"{what}: non-finite value at {points[bad].tolist()}", location=points[bad])


def integrate_values(chart: ChartDomain, rule: QuadratureRule, values: np.ndarray) -> float:
    """Quadrature sum for values already evaluated at ``rule.nodes``."""
    values = np.asarray(values, dtype=float)
    _check_finite(values, rule.nodes, "integrate")
    return float(np.sum(rule.weights * values * volume_density(chart, rule.nodes)))


def integrate(chart: ChartDomain, f: Callable[[np.ndarray], np.ndarray], rule: QuadratureRule) -> float:
    """``sum_i w_i f(x_i) sqrt(det g(x_i))`` over the rule's nodes."""
    return integrate_values(chart, rule, np.asarray(f(rule.nodes), dtype=float).reshape(-1))


@lru_cache(maxsize=32)
def _halton(n: int, samples: int) -> np.ndarray:
    return qmc.Halton(d=n, scramble=False).random(samples)


def sample_points(chart: ChartDomain, samples: int) -> np.ndarray:
    """First ``samples`` points of the unscrambled Halton sequence in the box.

    Prefixes are nested, so larger sample counts only add points.
    """
    if int(samples) != samples or samples < 1:
        raise ArgumentError(f"samples must be a positive integer, got {samples}")
    u = _halton(chart.n, int(samples))
    return chart.lower + u * chart.widths


def box_corners(chart: ChartDomain) -> np.ndarray:
    """The ``2^n`` vertices of the box (periodic axes contribute ``lower`` only)."""
    axes = [
        np.array([lo]) if per else np.array([lo, hi])
        for lo, hi, per in zip(chart.lower, chart.upper, chart.periodic)
    ]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=1)


def sup_norm_estimate(
    chart: ChartDomain,
    f: Callable[[np.ndarray], np.ndarray],
    samples: int = DEFAULT_SUP_SAMPLES,
    *,
    rule: QuadratureRule | None = None,
    extra_points: np.ndarray | None = None,
    mask: Callable[[np.ndarray], np.ndarray] | None = None,
) -> float:
    """Estimate ``sup |f|`` by sampling.

    The sample set is the low-discrepancy prefix, the box corners, the
    quadrature nodes of ``rule`` (order 16 when omitted) and any
    ``extra_points``.  With a
    ``mask`` only points where it holds are considered; an empty masked set
    gives 0.
    """
    if rule is None:
        rule = quadrature_nodes(chart, DEFAULT_ORDER)
    parts = [sample_points(chart, samples), box_corners(chart), rule.nodes]
    if extra_points is not None:
        parts.append(np.atleast_2d(extra_points))
    pts = np.concatenate(parts, axis=0)
    if mask is not None:
        pts = pts[np.asarray(mask(pts), dtype=bool)]
        if pts.shape[0] == 0:
            return 0.0
    vals = np.asarray(f(pts), dtype=float).reshape(-1)
    _check_finite(vals, pts, "sup_norm_estimate")
    return float(np.max(np.abs(vals)))
