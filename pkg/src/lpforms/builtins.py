"""Built-in maps, metrics and form families used by scenario files.

Every map ships with an explicit inverse and analytic Jacobians for both
directions, each derived from its own formula.
"""

from __future__ import annotations

from math import comb
from typing import Mapping, Sequence

import numpy as np
import sympy

from .diffeo import Diffeomorphism
from .errors import ConfigError
from .geometry import ChartDomain, MetricField, constant_metric, euclidean_metric
from .multilinear import lex_multi_indices

__all__ = [
    "MAP_KINDS",
    "METRIC_KINDS",
    "FORM_KINDS",
    "PATTERNS",
    "make_map",
    "make_metric",
    "compile_expression",
    "pattern_values",
    "bump_profile",
]

MAP_KINDS = ("identity", "linear", "shear", "rotation", "sinusoidal", "radial-stretch")
METRIC_KINDS = ("identity", "diagonal", "constant", "warped", "conformal", "expression")
FORM_KINDS = ("constant", "expression", "bump")
PATTERNS = ("first", "last", "ones", "ramp")

TAU = 2.0 * np.pi


# ---------------------------------------------------------------- expressions

def compile_expression(text: str, n: int):
    """Compile an expression in ``x1..xn`` to a vectorized callable.

    The callable takes ``(m, n)`` points and returns ``(m,)`` values.
    """
    symbols = sympy.symbols(" ".join(f"x{i}" for i in range(1, n + 1)), seq=True)
    local = {f"x{i + 1}": s for i, s in enumerate(symbols)}
    try:
        expr = sympy.sympify(text, locals=local)
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc}") from None
    unknown = expr.free_symbols - set(symbols)
    if unknown:
        raise ConfigError(f"expression {text!r} uses unknown symbols {sorted(map(str, unknown))}")
    fn = sympy.lambdify(symbols, expr, modules="numpy")

    def f(points):
        pts = np.atleast_2d(points)
        # non-finite values are reported by the caller with their location
        with np.errstate(all="ignore"):
            out = fn(*[pts[:, i] for i in range(n)])
        return np.broadcast_to(np.asarray(out, dtype=float), (pts.shape[0],)).copy()

    return f


# -------------------------------------------------------------------- metrics

def _warped_metric(chart_lower, widths):
    # g = I + b b^T with b_i = 0.5 cos(2 pi x_{i+1} / w_{i+1}); SPD everywhere
    def g(points):
        pts = np.atleast_2d(points)
        t = TAU * (pts - chart_lower) / widths
        b = 0.5 * np.cos(np.roll(t, -1, axis=1))
        n = pts.shape[1]
        return np.eye(n)[None] + b[:, :, None] * b[:, None, :]

    return g


def _conformal_metric(chart_lower, widths, amplitude):
    def g(points):
        pts = np.atleast_2d(points)
        t = TAU * (pts - chart_lower) / widths
        factor = 1.0 + amplitude * np.prod(np.sin(t), axis=1)
        n = pts.shape[1]
        return factor[:, None, None] * np.eye(n)[None]

    return g


def make_metric(spec: Mapping, lower: Sequence[float], upper: Sequence[float]) -> MetricField:
    """Metric field from a ``{kind = ..., ...}`` table."""
    lower = np.asarray(lower, dtype=float)
    widths = np.asarray(upper, dtype=float) - lower
    n = lower.size
    kind = spec.get("kind", "identity")
    if kind == "identity":
        return euclidean_metric(n)
    if kind == "diagonal":
        d = _floats(spec, "values", n)
        if np.any(d <= 0):
            raise ConfigError("diagonal metric entries must be positive", field="metric.values")
        return constant_metric(np.diag(d))
    if kind == "constant":
        G = np.asarray(spec.get("matrix"), dtype=float)
        if G.shape != (n, n):
            raise ConfigError(f"constant metric needs an {n}x{n} matrix", field="metric.matrix")
        return constant_metric(G)
    if kind == "warped":
        return _warped_metric(lower, widths)
    if kind == "conformal":
        amp = float(spec.get("amplitude", 0.3))
        if not abs(amp) < 1:
            raise ConfigError("conformal amplitude must satisfy |a| < 1", field="metric.amplitude")
        return _conformal_metric(lower, widths, amp)
    if kind == "expression":
        entries = spec.get("entries")
        if not isinstance(entries, Mapping):
            raise ConfigError("expression metric needs an 'entries' table", field="metric.entries")
        fns = {}
        for key, text in entries.items():
            if len(key) != 3 or key[0] != "g" or not key[1:].isdigit():
                raise ConfigError(f"metric entry key {key!r} must look like 'g12'", field="metric.entries")
            i, j = int(key[1]) - 1, int(key[2]) - 1
            if not (0 <= i < n and 0 <= j < n):
                raise ConfigError(f"metric entry {key!r} outside {n}x{n}", field="metric.entries")
            fns[(min(i, j), max(i, j))] = compile_expression(str(text), n)

        def g(points):
            pts = np.atleast_2d(points)
            out = np.zeros((pts.shape[0], n, n))
            for i in range(n):
                if (i, i) not in fns:
                    out[:, i, i] = 1.0
            for (i, j), f in fns.items():
                v = f(pts)
                out[:, i, j] = v
                out[:, j, i] = v
            return out

        return g
    raise ConfigError(f"unknown metric kind {kind!r}; expected one of {METRIC_KINDS}", field="metric.kind")


def _floats(spec, key, size=None):
    if key not in spec:
        raise ConfigError(f"missing field {key!r}", field=key)
    try:
        arr = np.asarray(spec[key], dtype=float).reshape(-1)
    except (TypeError, ValueError):
        raise ConfigError(f"field {key!r} must be a list of numbers", field=key) from None
    if size is not None and arr.size != size:
        raise ConfigError(f"field {key!r} needs {size} entries, got {arr.size}", field=key)
    return arr


# ----------------------------------------------------------------------- maps

def _const_jac(A):
    A = np.asarray(A, dtype=float)

    def jac(points):
        return np.broadcast_to(A, (np.atleast_2d(points).shape[0],) + A.shape).copy()

    return jac


def _linear(source, target, A, offset):
    A = np.asarray(A, dtype=float)
    Ainv = np.linalg.inv(A)
    b = np.asarray(offset, dtype=float)
    return dict(
        forward=lambda x: np.atleast_2d(x) @ A.T + b,
        inverse=lambda y: (np.atleast_2d(y) - b) @ Ainv.T,
        jacobian=_const_jac(A),
        inverse_jacobian=_const_jac(Ainv),
    )


def _solve_sine_shift(s, a):
    # solve t + a sin t = s for |a| < 1; f is strictly increasing and t lies in [s-|a|, s+|a|]
    lo = s - abs(a)
    hi = s + abs(a)
    t = s - a * np.sin(s) / (1.0 + a * np.cos(s))
    t = np.clip(t, lo, hi)
    for _ in range(60):
        f = t + a * np.sin(t) - s
        lo = np.where(f < 0, t, lo)
        hi = np.where(f > 0, t, hi)
        step = f / (1.0 + a * np.cos(t))
        t_new = t - step
        bad = (t_new <= lo) | (t_new >= hi)
        t_new = np.where(bad, 0.5 * (lo + hi), t_new)
        if np.all(np.abs(t_new - t) <= 4e-16 * np.maximum(1.0, np.abs(t))):
            return t_new
        t = t_new
    return t


def _sinusoidal(source: ChartDomain, a: float, coupling: float):
    """Componentwise sine warp followed by a triangular sine shear.

    ``z_i = x_i + a w_i/(2 pi) sin(2 pi (x_i - l_i)/w_i)`` then
    ``y_i = z_i + c w_i/(2 pi) sin(2 pi (z_{i+1} - l_{i+1})/w_{i+1})`` for
    ``i < n`` and ``y_n = z_n``.  ``det = prod(1 + a cos(.)) > 0`` for
    ``|a| < 1``; the map preserves the box up to periodic wrap.
    """
    lo = source.lower
    w = source.widths
    n = source.n

    def phase(v):
        return TAU * (v - lo) / w

    def forward(x):
        x = np.atleast_2d(x)
        z = x + a * w / TAU * np.sin(phase(x))
        y = z.copy()
        y[:, :-1] += coupling * w[:-1] / TAU * np.sin(phase(z)[:, 1:])
        return y

    def jacobian(x):
        x = np.atleast_2d(x)
        m = x.shape[0]
        dz = 1.0 + a * np.cos(phase(x))
        z = x + a * w / TAU * np.sin(phase(x))
        S = np.broadcast_to(np.eye(n), (m, n, n)).copy()
        idx = np.arange(n - 1)
        S[:, idx, idx + 1] = coupling * (w[:-1] / w[1:]) * np.cos(phase(z)[:, 1:])
        return S * dz[:, None, :]

    def unshear(y):
        z = np.array(y, dtype=float)
        for i in range(n - 2, -1, -1):
            z[:, i] = y[:, i] - coupling * w[i] / TAU * np.sin(TAU * (z[:, i + 1] - lo[i + 1]) / w[i + 1])
        return z

    def inverse(y):
        z = unshear(np.atleast_2d(y))
        t = _solve_sine_shift(phase(z), a)
        return lo + t * w / TAU

    def inverse_jacobian(y):
        y = np.atleast_2d(y)
        m = y.shape[0]
        z = unshear(y)
        t = _solve_sine_shift(phase(z), a)
        # dz/dy by back substitution: row i = e_i - c (w_i/w_{i+1}) cos(.) * row_{i+1}
        Z = np.broadcast_to(np.eye(n), (m, n, n)).copy()
        for i in range(n - 2, -1, -1):
            slope = coupling * (w[i] / w[i + 1]) * np.cos(TAU * (z[:, i + 1] - lo[i + 1]) / w[i + 1])
            Z[:, i, :] -= slope[:, None] * Z[:, i + 1, :]
        dx = 1.0 / (1.0 + a * np.cos(t))
        return dx[:, :, None] * Z

    return dict(forward=forward, inverse=inverse, jacobian=jacobian, inverse_jacobian=inverse_jacobian)


def _radial_stretch(a: float, center):
    """``y = c + (x - c)(1 + a r^2)``, ``r = |x - c|``, for ``a > 0``."""
    c = np.asarray(center, dtype=float)

    def radius_inverse(rho):
        # r + a r^3 = rho, closed form through sinh
        return 2.0 / np.sqrt(3.0 * a) * np.sinh(np.arcsinh(1.5 * rho * np.sqrt(3.0 * a)) / 3.0)

    def forward(x):
        d = np.atleast_2d(x) - c
        r2 = np.sum(d * d, axis=1, keepdims=True)
        return c + d * (1.0 + a * r2)

    def jacobian(x):
        d = np.atleast_2d(x) - c
        n = d.shape[1]
        r2 = np.sum(d * d, axis=1)
        return (1.0 + a * r2)[:, None, None] * np.eye(n) + 2.0 * a * d[:, :, None] * d[:, None, :]

    def inverse(y):
        e = np.atleast_2d(y) - c
        rho = np.linalg.norm(e, axis=1)
        r = radius_inverse(rho)
        ratio = np.where(rho > 0, r / np.where(rho > 0, rho, 1.0), 1.0)
        return c + e * ratio[:, None]

    def inverse_jacobian(y):
        e = np.atleast_2d(y) - c
        n = e.shape[1]
        rho = np.linalg.norm(e, axis=1)
        r = radius_inverse(rho)
        safe = np.where(rho > 0, rho, 1.0)
        ratio = np.where(rho > 0, r / safe, 1.0)
        # d(r/rho)/drho / rho, with r'(rho) = 1 / (1 + 3 a r^2)
        dr = 1.0 / (1.0 + 3.0 * a * r * r)
        coef = np.where(rho > 0, (dr * rho - r) / safe**3, 0.0)
        return ratio[:, None, None] * np.eye(n) + coef[:, None, None] * e[:, :, None] * e[:, None, :]

    return dict(forward=forward, inverse=inverse, jacobian=jacobian, inverse_jacobian=inverse_jacobian)


def make_map(spec: Mapping, source: ChartDomain, target: ChartDomain, fd_step: float = 1e-5) -> Diffeomorphism:
    """Diffeomorphism from a ``{kind = ..., ...}`` table."""
    n = source.n
    kind = spec.get("kind")
    center = spec.get("center")
    if kind == "identity":
        parts = _linear(source, target, np.eye(n), np.zeros(n))
    elif kind == "linear":
        A = np.asarray(spec.get("matrix"), dtype=float)
        if A.shape != (n, n):
            raise ConfigError(f"linear map needs an {n}x{n} matrix", field="map.matrix")
        offset = _floats(spec, "offset", n) if "offset" in spec else np.zeros(n)
        parts = _linear(source, target, A, offset)
    elif kind == "shear":
        if n < 2:
            raise ConfigError("shear needs n >= 2", field="map.kind")
        A = np.eye(n)
        A[0, 1] = float(spec.get("s", 1.0))
        parts = _linear(source, target, A, np.zeros(n))
    elif kind == "rotation":
        if n < 2:
            raise ConfigError("rotation needs n >= 2", field="map.kind")
        theta = float(spec.get("theta", 0.0))
        c = np.asarray(center, dtype=float) if center is not None else (source.lower + source.upper) / 2
        R = np.eye(n)
        R[:2, :2] = [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
        parts = _linear(source, target, R, c - R @ c)
    elif kind == "sinusoidal":
        a = float(spec.get("a", 0.5))
        coupling = float(spec.get("coupling", a))
        if not abs(a) < 1:
            raise ConfigError("sinusoidal amplitude must satisfy |a| < 1", field="map.a")
        parts = _sinusoidal(source, a, coupling)
    elif kind == "radial-stretch":
        a = float(spec.get("a", 0.25))
        if not a > 0:
            raise ConfigError("radial-stretch needs a > 0", field="map.a")
        c = np.asarray(center, dtype=float) if center is not None else (source.lower + source.upper) / 2
        parts = _radial_stretch(a, c)
    else:
        raise ConfigError(f"unknown map kind {kind!r}; expected one of {MAP_KINDS}", field="map.kind")
    return Diffeomorphism(source, target, fd_step=fd_step, name=str(kind), **parts)


# ---------------------------------------------------------------------- forms

def pattern_values(pattern: str, n: int, k: int) -> np.ndarray:
    """Degree-agnostic coefficient patterns over the lexicographic table.

    ``first``/``last`` select a single cobasis element; ``ones`` sets every
    coefficient to 1; ``ramp`` uses ``1 + j/2`` at position ``j``.
    """
    R = comb(n, k)
    if pattern == "first":
        v = np.zeros(R)
        v[0] = 1.0
    elif pattern == "last":
        v = np.zeros(R)
        v[-1] = 1.0
    elif pattern == "ones":
        v = np.ones(R)
    elif pattern == "ramp":
        v = 1.0 + 0.5 * np.arange(R)
    else:
        raise ConfigError(f"unknown pattern {pattern!r}; expected one of {PATTERNS}", field="forms.pattern")
    return v


def bump_profile(chart: ChartDomain, center, radius: float, power: float):
    """``(1 - r^2/R^2)^power`` inside the coordinate ball, 0 outside.

    Distances use the minimal image on periodic axes.  Returns the profile
    and the support predicate ``r < R``.
    """
    c = np.asarray(center, dtype=float)

    def r2(points):
        d = chart.periodic_difference(np.atleast_2d(points), c)
        return np.sum(d * d, axis=1) / radius**2

    def profile(points):
        s = r2(points)
        return np.where(s < 1.0, np.clip(1.0 - s, 0.0, None) ** power, 0.0)

    def mask(points):
        return r2(points) < 1.0

    return profile, mask


def index_key(index: Sequence[int]) -> str:
    return "".join(str(i) for i in index) if index else "0"


def components_table(n: int, k: int, table: Mapping) -> list:
    """Map ``{"12": expr, ...}`` keys onto lexicographic positions."""
    keys = [index_key(I) for I in lex_multi_indices(n, k).indices]
    unknown = set(table) - set(keys)
    if unknown:
        raise ConfigError(
            f"unknown multi-index keys {sorted(unknown)} for n={n}, k={k}; expected {keys}",
            field="forms.components",
        )
    return [table.get(key) for key in keys]
