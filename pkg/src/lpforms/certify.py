"""Bound factors for the L^p transport inequalities and their certificates.

For a pushforward of a k-form the two-sided bound reads

    lower * ||omega||_p <= ||phi_* omega||_p <= upper * ||omega||_p

with ``lower = 1 / sup_S (a_1..a_k)^(1/q) (a_{k+1}..a_n)^(-1/p)`` and
``upper = sup_S (a_1..a_{n-k})^(1/p) (a_{n-k+1}..a_n)^(-1/q)``, the suprema
running over the support ``S`` of ``omega``.  Pullbacks use the same
expressions in the singular values ``b_i`` of the inverse map, which can be
rewritten in ``a_i`` through ``b_i = 1 / a_{n-i+1} o phi^{-1}``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .diffeo import Diffeomorphism, SingularSpectrum, jacobian_determinant, singular_spectrum
from .errors import ArgumentError, EmptySupportError, LpFormsError
from .fields import FormField, lp_from_values, parse_exponent, pointwise_norm, pullback, pushforward
from .geometry import ChartDomain, box_corners, quadrature_nodes, sample_points

__all__ = [
    "BoundFactors",
    "BoundCertificate",
    "Scenario",
    "conjugate_exponent",
    "factor_points",
    "factor_integrands",
    "kform_factors",
    "scalar_factors",
    "density_factors",
    "pullback_factors",
    "pullback_factors_alpha",
    "certify",
    "DEFAULT_EPS_SUP",
]

DEFAULT_EPS_SUP = 1e-6
PUSH, PULL = "push", "pull"

Mask = Optional[Callable[[np.ndarray], np.ndarray]]


def conjugate_exponent(p) -> float:
    """``q`` with ``1/p + 1/q = 1``; ``1 <-> inf``."""
    p = parse_exponent(p)
    if p == 1.0:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def _reciprocals(p: float) -> tuple[float, float]:
    # (1/p, 1/q) with t^(1/inf) = 1
    inv_p = 0.0 if math.isinf(p) else 1.0 / p
    return inv_p, 1.0 - inv_p


@dataclass(frozen=True)
class BoundFactors:
    lower: float
    upper: float
    k: int
    p: float
    q: float
    masked: bool

    def as_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "k": self.k,
            "p": _fmt_exp(self.p),
            "q": _fmt_exp(self.q),
            "masked": self.masked,
        }


def _fmt_exp(p: float):
    return "inf" if math.isinf(p) else p


def factor_points(chart: ChartDomain, samples: int, order: int = 16, extra=None) -> np.ndarray:
    """Low-discrepancy samples, box corners, quadrature nodes and extra points."""
    parts = [sample_points(chart, samples), box_corners(chart), quadrature_nodes(chart, order).nodes]
    if extra is not None and len(extra):
        parts.append(np.atleast_2d(extra))
    return np.concatenate(parts, axis=0)


def _masked(points: np.ndarray, mask: Mask) -> np.ndarray:
    if mask is None:
        return np.ones(points.shape[0], dtype=bool)
    keep = np.asarray(mask(points), dtype=bool)
    if not np.any(keep):
        raise EmptySupportError(f"support mask selects none of {points.shape[0]} sample points")
    return keep


def _sup(values: np.ndarray) -> float:
    return float(np.max(values))


def factor_integrands(alphas: np.ndarray, k: int, p) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise quantities whose suprema give the pushforward factors.

    Returns ``(a_1..a_k)^(1/q) (a_{k+1}..a_n)^(-1/p)`` (lower factor is the
    reciprocal of its supremum) and ``(a_1..a_{n-k})^(1/p) (a_{n-k+1}..a_n)^(-1/q)``
    (upper factor is its supremum) for every row of ``alphas``.
    """
    alphas = np.atleast_2d(alphas)
    n = alphas.shape[-1]
    inv_p, inv_q = _reciprocals(parse_exponent(p))
    lower_arg = np.prod(alphas[:, :k], axis=1) ** inv_q * np.prod(alphas[:, k:], axis=1) ** (-inv_p)
    upper_arg = (
        np.prod(alphas[:, : n - k], axis=1) ** inv_p * np.prod(alphas[:, n - k:], axis=1) ** (-inv_q)
    )
    return lower_arg, upper_arg


def _kform_from_alphas(alphas: np.ndarray, k: int, p: float) -> tuple[float, float]:
    lower_arg, upper_arg = factor_integrands(alphas, k, p)
    return 1.0 / _sup(lower_arg), _sup(upper_arg)


def kform_factors(
    phi: Diffeomorphism,
    support_mask: Mask,
    k: int,
    p,
    samples: int = 4096,
    *,
    points: np.ndarray | None = None,
    spectrum: SingularSpectrum | None = None,
) -> BoundFactors:
    """Pushforward factors for k-forms from the singular values of ``phi``.

    The suprema run over ``points`` (or the default sample set of the source
    chart) restricted to ``support_mask``.  A precomputed ``spectrum`` at
    those points may be passed to skip the SVDs.
    """
    p = parse_exponent(p)
    if not 0 <= k <= phi.n:
        raise ArgumentError(f"degree {k} out of range 0..{phi.n}")
    if spectrum is None:
        if points is None:
            points = factor_points(phi.source, samples)
        spectrum = singular_spectrum(phi, points)
    keep = _masked(spectrum.point, support_mask)
    lower, upper = _kform_from_alphas(spectrum.alphas[keep], k, p)
    return BoundFactors(lower, upper, k, p, conjugate_exponent(p), support_mask is not None)


def _jacobian_on(phi, support_mask, samples, points, jacobian):
    if jacobian is None:
        if points is None:
            points = factor_points(phi.source, samples)
        jacobian = jacobian_determinant(phi, points)
    keep = _masked(points, support_mask)
    return np.asarray(jacobian)[keep]


def scalar_factors(
    phi: Diffeomorphism,
    support_mask: Mask,
    p,
    samples: int = 4096,
    *,
    points: np.ndarray | None = None,
    jacobian: np.ndarray | None = None,
) -> BoundFactors:
    """Factors for functions: ``1 / sup J^(-1/p)`` and ``sup J^(1/p)``."""
    p = parse_exponent(p)
    inv_p, _ = _reciprocals(p)
    J = _jacobian_on(phi, support_mask, samples, points, jacobian)
    return BoundFactors(
        1.0 / _sup(J ** (-inv_p)), _sup(J**inv_p), 0, p, conjugate_exponent(p), support_mask is not None
    )


def density_factors(
    phi: Diffeomorphism,
    support_mask: Mask,
    p,
    samples: int = 4096,
    *,
    points: np.ndarray | None = None,
    jacobian: np.ndarray | None = None,
) -> BoundFactors:
    """Factors for densities: ``1 / sup J^(1/q)`` and ``sup J^(-1/q)``."""
    p = parse_exponent(p)
    _, inv_q = _reciprocals(p)
    J = _jacobian_on(phi, support_mask, samples, points, jacobian)
    return BoundFactors(
        1.0 / _sup(J**inv_q), _sup(J ** (-inv_q)), phi.n, p, conjugate_exponent(p), support_mask is not None
    )


def pullback_factors(
    phi: Diffeomorphism,
    support_mask: Mask,
    k: int,
    p,
    samples: int = 4096,
    *,
    points: np.ndarray | None = None,
    spectrum: SingularSpectrum | None = None,
) -> BoundFactors:
    """Pullback factors from the singular values of ``phi^{-1}``.

    ``points`` and ``support_mask`` live on the target chart.
    """
    inv = phi.inverted()
    if spectrum is None and points is None:
        points = factor_points(inv.source, samples)
    return kform_factors(inv, support_mask, k, p, samples, points=points, spectrum=spectrum)


def pullback_factors_alpha(
    phi: Diffeomorphism,
    support_mask: Mask,
    k: int,
    p,
    samples: int = 4096,
    *,
    points: np.ndarray | None = None,
    spectrum: SingularSpectrum | None = None,
) -> BoundFactors:
    """Pullback factors rewritten in the singular values of ``phi``.

    ``lower = 1 / sup (a_1..a_{n-k})^(1/p) (a_{n-k+1}..a_n)^(-1/q)`` and
    ``upper = sup (a_1..a_k)^(1/q) (a_{k+1}..a_n)^(-1/p)``, with the supremum
    over source points whose image lies in the support (``support_mask`` is
    a target-chart predicate).
    """
    p = parse_exponent(p)
    n = phi.n
    if spectrum is None:
        if points is None:
            points = factor_points(phi.source, samples)
        spectrum = singular_spectrum(phi, points)
    mask = None
    if support_mask is not None:
        def mask(x):
            return support_mask(phi.apply(x))
    keep = _masked(spectrum.point, mask)
    a = spectrum.alphas[keep]
    inv_p, inv_q = _reciprocals(p)
    low_arg = np.prod(a[:, : n - k], axis=1) ** inv_p * np.prod(a[:, n - k:], axis=1) ** (-inv_q)
    up_arg = np.prod(a[:, :k], axis=1) ** inv_q * np.prod(a[:, k:], axis=1) ** (-inv_p)
    return BoundFactors(
        1.0 / _sup(low_arg), _sup(up_arg), k, p, conjugate_exponent(p), support_mask is not None
    )


@dataclass(frozen=True)
class BoundCertificate:
    scenario: str
    direction: str
    form: str
    k: int
    p: float
    norm_source: float
    norm_pushed: float
    norm_source_refined: float
    norm_pushed_refined: float
    order: int
    factors: BoundFactors
    r_low: float
    r_up: float
    eps: float
    eps_quad: float
    eps_sup: float
    passed: bool
    duality_gap: Optional[float] = None

    def as_dict(self) -> dict:
        d = {
            "scenario": self.scenario,
            "direction": self.direction,
            "form": self.form,
            "k": self.k,
            "p": _fmt_exp(self.p),
            "norm_source": self.norm_source,
            "norm_pushed": self.norm_pushed,
            "norm_source_refined": self.norm_source_refined,
            "norm_pushed_refined": self.norm_pushed_refined,
            "orders": [self.order, 2 * self.order],
            "factors": self.factors.as_dict(),
            "r_low": self.r_low,
            "r_up": self.r_up,
            "eps": self.eps,
            "eps_quad": self.eps_quad,
            "eps_sup": self.eps_sup,
            "verdict": "pass" if self.passed else "fail",
        }
        if self.duality_gap is not None:
            d["duality_gap"] = self.duality_gap
        return d


@dataclass(eq=False)
class Scenario:
    """A map together with test forms on both charts and run settings.

    ``source_forms`` feed the pushforward direction and ``target_forms`` the
    pullback direction; each maps a degree to a list of forms.  Expensive
    pointwise data is cached per instance.
    """

    name: str
    phi: Diffeomorphism
    source_forms: dict[int, list[FormField]]
    target_forms: dict[int, list[FormField]]
    order: int = 16
    samples: int = 4096
    eps_sup: float = DEFAULT_EPS_SUP
    seed: int = 0
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.RLock = field(default_factory=threading.RLock, repr=False)

    def _memo(self, key, fn):
        with self._lock:
            if key not in self._cache:
                self._cache[key] = fn()
            return self._cache[key]

    def forms(self, direction: str, k: int) -> list[FormField]:
        table = self.source_forms if direction == PUSH else self.target_forms
        return table.get(k, [])

    def paired_points(self, samples: int, order: int) -> tuple[np.ndarray, np.ndarray]:
        """Corresponding point sets ``(S_M, S_N)`` with ``S_N = phi(S_M)``.

        Each side holds its own samples and quadrature nodes plus the images
        of the other side's, so that suprema on either chart are taken over
        matching points.
        """
        def build():
            phi = self.phi
            base_M = factor_points(phi.source, samples, order)
            base_N = factor_points(phi.target, samples, order)
            xs = np.concatenate([base_M, phi.apply_inverse(base_N)])
            ys = np.concatenate([phi.apply(base_M), base_N])
            keep = phi.source.contains(xs) & phi.target.contains(ys)
            return xs[keep], ys[keep]

        return self._memo(("points", samples, order), build)

    def alpha_spectrum(self, samples: int, order: int) -> SingularSpectrum:
        xs, _ = self.paired_points(samples, order)
        return self._memo(("alpha", samples, order), lambda: singular_spectrum(self.phi, xs))

    def beta_spectrum(self, samples: int, order: int) -> SingularSpectrum:
        _, ys = self.paired_points(samples, order)
        return self._memo(
            ("beta", samples, order), lambda: singular_spectrum(self.phi.inverted(), ys)
        )

    def jacobian_values(self, samples: int, order: int) -> np.ndarray:
        xs, _ = self.paired_points(samples, order)
        return self._memo(("J", samples, order), lambda: jacobian_determinant(self.phi, xs))

    def transported(self, direction: str, form: FormField) -> FormField:
        key = ("transported", direction, id(form))
        if direction == PUSH:
            return self._memo(key, lambda: pushforward(self.phi, form))
        return self._memo(key, lambda: pullback(self.phi, form))

    def node_norms(self, form: FormField, order: int) -> np.ndarray:
        rule = quadrature_nodes(form.chart, order)
        return self._memo(
            ("nodes", id(form), order), lambda: pointwise_norm(form, rule.nodes, seed=self.seed)
        )

    def point_norms(self, form: FormField, points_key, points: np.ndarray) -> np.ndarray:
        return self._memo(
            ("pts", id(form), points_key), lambda: pointwise_norm(form, points, seed=self.seed)
        )


def _lp_pair(scenario: Scenario, form: FormField, p: float, order: int) -> tuple[float, float]:
    out = []
    for m in (order, 2 * order):
        rule = quadrature_nodes(form.chart, m)
        out.append(lp_from_values(form.chart, rule, scenario.node_norms(form, m), p))
    return out[0], out[1]


def _rel(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0.0 else abs(a - b) / scale


def _ratio(num: float, den: float) -> float:
    if den == 0.0:
        return 1.0 if num == 0.0 else math.inf
    return num / den


def certify(
    scenario: Scenario,
    direction: str,
    k: int,
    p,
    *,
    order: int | None = None,
    samples: int | None = None,
    form: str | None = None,
) -> BoundCertificate:
    """Certify the two-sided L^p bound for one (direction, k, p) tuple.

    ``direction`` is ``"push"`` (forms on the source) or ``"pull"``
    (forms on the target).  Norms are computed at
    quadrature orders ``order`` and ``2 * order``; their relative gap is the
    quadrature budget.  The certificate passes when ``r_low >= 1 - eps`` and
    ``r_up <= 1 + eps`` with ``eps = max(eps_sup, budget)``.
    """
    try:
        return _certify(scenario, direction, k, p, order, samples, form)
    except LpFormsError as err:
        err.scenario = scenario.name
        if err.args and not str(err.args[0]).startswith(f"[{scenario.name}]"):
            err.args = (f"[{scenario.name}] {err.args[0]}",) + err.args[1:]
        raise


def _certify(scenario, direction, k, p, order, samples, form_name) -> BoundCertificate:
    if direction not in (PUSH, PULL):
        raise ArgumentError(f"direction must be 'push' or 'pull', got {direction!r}")
    p = parse_exponent(p)
    order = scenario.order if order is None else int(order)
    samples = scenario.samples if samples is None else int(samples)
    phi = scenario.phi
    n = phi.n

    candidates = scenario.forms(direction, k)
    if form_name is not None:
        candidates = [f for f in candidates if f.name == form_name]
    if not candidates:
        raise ArgumentError(f"no {direction} form of degree {k}" + (f" named {form_name!r}" if form_name else ""))
    omega = candidates[0]
    pushed = scenario.transported(direction, omega)

    xs, ys = scenario.paired_points(samples, order)
    # fail fast on a degenerate map whatever the degree
    scenario.alpha_spectrum(samples, order)
    src_pts, dst_pts = (xs, ys) if direction == PUSH else (ys, xs)
    src_key, dst_key = ("M", "N") if direction == PUSH else ("N", "M")
    key = (samples, order)

    if math.isinf(p):
        norm_src = float(np.max(scenario.point_norms(omega, (src_key,) + key, src_pts)))
        norm_dst = float(np.max(scenario.point_norms(pushed, (dst_key,) + key, dst_pts)))
        ref_src, ref_dst = norm_src, norm_dst
        eps_quad = 0.0
    else:
        norm_src, ref_src = _lp_pair(scenario, omega, p, order)
        norm_dst, ref_dst = _lp_pair(scenario, pushed, p, order)
        eps_quad = max(_rel(norm_src, ref_src), _rel(norm_dst, ref_dst))

    mask = omega.support_mask
    duality_gap = None
    if direction == PUSH:
        if k == 0:
            factors = scalar_factors(phi, mask, p, points=xs, jacobian=scenario.jacobian_values(*key))
        elif k == n:
            factors = density_factors(phi, mask, p, points=xs, jacobian=scenario.jacobian_values(*key))
        else:
            factors = kform_factors(phi, mask, k, p, spectrum=scenario.alpha_spectrum(*key))
    else:
        factors = pullback_factors(phi, mask, k, p, spectrum=scenario.beta_spectrum(*key))
        alt = pullback_factors_alpha(phi, mask, k, p, spectrum=scenario.alpha_spectrum(*key))
        duality_gap = max(_rel(factors.lower, alt.lower), _rel(factors.upper, alt.upper))

    r_low = _ratio(norm_dst, factors.lower * norm_src)
    r_up = _ratio(norm_dst, factors.upper * norm_src)
    eps = max(scenario.eps_sup, eps_quad)
    passed = bool(r_low >= 1.0 - eps and r_up <= 1.0 + eps)
    return BoundCertificate(
        scenario=scenario.name,
        direction=direction,
        form=omega.name,
        k=k,
        p=p,
        norm_source=norm_src,
        norm_pushed=norm_dst,
        norm_source_refined=ref_src,
        norm_pushed_refined=ref_dst,
        order=order,
        factors=factors,
        r_low=r_low,
        r_up=r_up,
        eps=eps,
        eps_quad=eps_quad,
        eps_sup=scenario.eps_sup,
        passed=passed,
        duality_gap=duality_gap,
    )
