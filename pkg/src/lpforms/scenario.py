"""Scenario files: parsing, validation, serialization and instantiation.

A scenario is a TOML document::

    name = "shear-torus"
    exponents = [1, 1.5, 2, 3, "inf"]   # "inf" spells p = infinity
    order = 16                          # quadrature points per axis
    samples = 4096                      # low-discrepancy sup-norm samples

    [source]
    lower = [0.0, 0.0]
    upper = [1.0, 1.0]
    periodic = [true, true]
    metric = { kind = "identity" }

    [map]
    kind = "shear"
    s = 1.0

    [[forms]]
    degree = 1
    kind = "constant"
    values = [1.0, 0.0]

``[target]`` defaults to a copy of ``[source]``.  See README.md for every
field.
"""

from __future__ import annotations

import copy
import math
import sys
from dataclasses import dataclass, field
from math import comb
from pathlib import Path
from typing import Any

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import builtins
from .certify import DEFAULT_EPS_SUP, Scenario
from .diffeo import jacobian_matrix
from .errors import ConfigError, LpFormsError
from .fields import FormField, parse_exponent
from .geometry import ChartDomain, quadrature_nodes, sample_points

__all__ = [
    "ScenarioConfig",
    "load_scenario",
    "parse_scenario",
    "dump_scenario",
    "build_scenario",
    "DEFAULT_EXPONENTS",
]

DEFAULT_EXPONENTS = (1.0, 1.5, 2.0, 3.0, math.inf)
ORIENTATION_SAMPLES = 4096

_TOP_KEYS = {
    "name", "description", "expect", "exponents", "degrees", "order", "samples",
    "eps_sup", "fd_step", "seed", "source", "target", "map", "forms",
}
_CHART_KEYS = {"lower", "upper", "periodic", "metric"}
_FORM_KEYS = {
    "name", "degree", "kind", "on", "values", "pattern", "components", "scale",
    "center", "radius", "power",
}


@dataclass
class ScenarioConfig:
    name: str
    source: dict
    target: dict
    map: dict
    forms: list[dict]
    exponents: list[float] = field(default_factory=lambda: list(DEFAULT_EXPONENTS))
    degrees: list[int] | None = None
    order: int = 16
    samples: int = 4096
    eps_sup: float = DEFAULT_EPS_SUP
    fd_step: float = 1e-5
    seed: int = 0
    expect: str = "pass"
    description: str = ""

    @property
    def n(self) -> int:
        return len(self.source["lower"])

    @property
    def degree_list(self) -> list[int]:
        return list(range(self.n + 1)) if self.degrees is None else list(self.degrees)

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"name": self.name}
        if self.description:
            d["description"] = self.description
        d["expect"] = self.expect
        d["exponents"] = ["inf" if math.isinf(p) else p for p in self.exponents]
        if self.degrees is not None:
            d["degrees"] = list(self.degrees)
        d.update(order=self.order, samples=self.samples, eps_sup=self.eps_sup,
                 fd_step=self.fd_step, seed=self.seed)
        d["source"] = copy.deepcopy(self.source)
        d["target"] = copy.deepcopy(self.target)
        d["map"] = copy.deepcopy(self.map)
        d["forms"] = copy.deepcopy(self.forms)
        return d


def _err(msg, key=None):
    return ConfigError(msg, field=key)


def _int(raw, key, default, minimum=1):
    v = raw.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise _err(f"{key} must be an integer >= {minimum}, got {v!r}", key)
    return v


def _float(raw, key, default, positive=True):
    v = raw.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (positive and not v > 0):
        raise _err(f"{key} must be a positive number, got {v!r}", key)
    return float(v)


def _chart(raw, key):
    if not isinstance(raw, dict):
        raise _err(f"[{key}] must be a table", key)
    unknown = set(raw) - _CHART_KEYS
    if unknown:
        raise _err(f"[{key}] has unknown fields {sorted(unknown)}", key)
    try:
        lower = [float(v) for v in raw["lower"]]
        upper = [float(v) for v in raw["upper"]]
    except KeyError as exc:
        raise _err(f"[{key}] is missing {exc.args[0]!r}", f"{key}.{exc.args[0]}") from None
    except (TypeError, ValueError):
        raise _err(f"[{key}] bounds must be lists of numbers", key) from None
    n = len(lower)
    if n == 0 or len(upper) != n:
        raise _err(f"[{key}] lower and upper must be nonempty and of equal length", key)
    if n > 8:
        raise _err(f"[{key}] dimension {n} exceeds the supported maximum of 8", key)
    if not all(lo < hi for lo, hi in zip(lower, upper)):
        raise _err(f"[{key}] needs lower < upper on every axis", key)
    periodic = raw.get("periodic", [False] * n)
    if len(periodic) != n or not all(isinstance(p, bool) for p in periodic):
        raise _err(f"[{key}] periodic must be {n} booleans", f"{key}.periodic")
    metric = raw.get("metric", {"kind": "identity"})
    if isinstance(metric, str):
        metric = {"kind": metric}
    if not isinstance(metric, dict) or "kind" not in metric:
        raise _err(f"[{key}] metric must be a table with a 'kind'", f"{key}.metric")
    return {"lower": lower, "upper": upper, "periodic": list(periodic), "metric": dict(metric)}


def _degrees_of(form, n):
    deg = form.get("degree")
    if deg == "all":
        return list(range(n + 1))
    if isinstance(deg, int) and not isinstance(deg, bool):
        return [deg]
    if isinstance(deg, list) and all(isinstance(d, int) and not isinstance(d, bool) for d in deg):
        return list(deg)
    raise _err(f"form degree must be an integer, a list or 'all', got {deg!r}", "forms.degree")


def _form(raw, n, i):
    key = f"forms[{i}]"
    if not isinstance(raw, dict):
        raise _err(f"{key} must be a table", key)
    unknown = set(raw) - _FORM_KEYS
    if unknown:
        raise _err(f"{key} has unknown fields {sorted(unknown)}", key)
    form = dict(raw)
    degrees = _degrees_of(form, n)
    for k in degrees:
        if not 0 <= k <= n:
            raise _err(f"{key} degree {k} out of range 0..{n}", f"{key}.degree")
    kind = form.get("kind", "constant")
    if kind not in builtins.FORM_KINDS:
        raise _err(f"{key} kind {kind!r} not in {builtins.FORM_KINDS}", f"{key}.kind")
    form["kind"] = kind
    on = form.setdefault("on", "both")
    if on not in ("both", "source", "target"):
        raise _err(f"{key} 'on' must be both, source or target", f"{key}.on")
    single = len(degrees) == 1
    if "values" in form:
        if not single:
            raise _err(f"{key} 'values' needs a single degree; use 'pattern'", f"{key}.values")
        if len(form["values"]) != comb(n, degrees[0]):
            raise _err(
                f"{key} 'values' needs {comb(n, degrees[0])} entries for degree {degrees[0]}",
                f"{key}.values",
            )
    if "components" in form:
        if not single or kind != "expression":
            raise _err(f"{key} 'components' needs kind='expression' and a single degree", f"{key}.components")
        builtins.components_table(n, degrees[0], form["components"])
    elif kind == "expression" and "scale" not in form:
        raise _err(f"{key} expression forms need 'components' or 'scale'", key)
    if "pattern" in form and form["pattern"] not in builtins.PATTERNS:
        raise _err(f"{key} pattern must be one of {builtins.PATTERNS}", f"{key}.pattern")
    if kind == "bump":
        if "center" not in form or "radius" not in form:
            raise _err(f"{key} bump forms need 'center' and 'radius'", key)
        if len(form["center"]) != n or not float(form["radius"]) > 0:
            raise _err(f"{key} bump center needs {n} entries and radius > 0", key)
        form.setdefault("power", 8)
    return form


def parse_scenario(raw: dict) -> ScenarioConfig:
    """Validate a decoded scenario document (no map checks)."""
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise _err(f"unknown top-level fields {sorted(unknown)}")
    name = raw.get("name")
    if not isinstance(name, str) or not name:
        raise _err("scenario needs a nonempty 'name'", "name")
    source = _chart(raw.get("source"), "source")
    target = _chart(raw.get("target", source), "target")
    n = len(source["lower"])
    if len(target["lower"]) != n:
        raise _err("source and target dimensions differ", "target")
    mapping = raw.get("map")
    if not isinstance(mapping, dict) or "kind" not in mapping:
        raise _err("[map] must be a table with a 'kind'", "map")
    if mapping["kind"] not in builtins.MAP_KINDS:
        raise _err(f"unknown map kind {mapping['kind']!r}; expected one of {builtins.MAP_KINDS}", "map.kind")
    forms_raw = raw.get("forms", [])
    if not isinstance(forms_raw, list) or not forms_raw:
        raise _err("scenario needs at least one [[forms]] entry", "forms")
    forms = [_form(f, n, i) for i, f in enumerate(forms_raw)]
    try:
        exponents = [parse_exponent(p) for p in raw.get("exponents", DEFAULT_EXPONENTS)]
    except LpFormsError as exc:
        raise _err(str(exc), "exponents") from None
    degrees = raw.get("degrees")
    if degrees is not None:
        if not isinstance(degrees, list) or not all(
            isinstance(d, int) and not isinstance(d, bool) and 0 <= d <= n for d in degrees
        ):
            raise _err(f"degrees must be integers in 0..{n}", "degrees")
    expect = raw.get("expect", "pass")
    if expect not in ("pass", "error"):
        raise _err("expect must be 'pass' or 'error'", "expect")
    return ScenarioConfig(
        name=name,
        description=str(raw.get("description", "")),
        source=source,
        target=target,
        map=dict(mapping),
        forms=forms,
        exponents=exponents,
        degrees=degrees,
        order=_int(raw, "order", 16),
        samples=_int(raw, "samples", 4096),
        eps_sup=_float(raw, "eps_sup", DEFAULT_EPS_SUP),
        fd_step=_float(raw, "fd_step", 1e-5),
        seed=_int(raw, "seed", 0, minimum=0),
        expect=expect,
    )


def loads_scenario(text: str) -> ScenarioConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        col = getattr(exc, "colno", None)
        raise ConfigError(f"parse error: {exc}", line=line, column=col) from None
    config = parse_scenario(raw)
    validate_scenario(config)
    return config


def load_scenario(path) -> ScenarioConfig:
    """Read, validate and orientation-check a scenario file.

    ``path`` may also be ``catalog:<name>`` for a bundled scenario.
    """
    path = str(path)
    if path.startswith("catalog:"):
        from .catalog import catalog_path

        path = str(catalog_path(path.split(":", 1)[1]))
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"scenario file not found: {path}")
    return loads_scenario(p.read_text(encoding="utf-8"))


def dump_scenario(config: ScenarioConfig) -> str:
    return tomli_w.dumps(config.to_dict())


def _make_chart(spec: dict, label: str) -> ChartDomain:
    metric = builtins.make_metric(spec["metric"], spec["lower"], spec["upper"])
    return ChartDomain(spec["lower"], spec["upper"], tuple(spec["periodic"]), metric, name=label)


def _form_fields(spec: dict, chart: ChartDomain, label: str) -> list[tuple[int, FormField]]:
    n = chart.n
    kind = spec["kind"]
    scale = builtins.compile_expression(str(spec["scale"]), n) if "scale" in spec else None
    profile = mask = None
    if kind == "bump":
        profile, mask = builtins.bump_profile(chart, spec["center"], float(spec["radius"]), float(spec["power"]))
    degrees = _degrees_of(spec, n)
    base = spec.get("name") or f"{kind}-{spec.get('pattern', 'values')}"
    out = []
    for k in degrees:
        name = base if len(degrees) == 1 else f"{base}/k{k}"
        if kind == "expression" and "components" in spec:
            fns = [
                builtins.compile_expression(str(e), n) if e is not None else None
                for e in builtins.components_table(n, k, spec["components"])
            ]

            def coeffs(x, fns=fns):
                x = np.atleast_2d(x)
                return np.stack([f(x) if f is not None else np.zeros(x.shape[0]) for f in fns], axis=1)
        else:
            if "values" in spec:
                values = np.asarray(spec["values"], dtype=float)
            else:
                values = builtins.pattern_values(spec.get("pattern", "ramp"), n, k)

            def coeffs(x, values=values):
                x = np.atleast_2d(x)
                amp = np.ones(x.shape[0])
                if scale is not None:
                    amp = amp * scale(x)
                if profile is not None:
                    amp = amp * profile(x)
                return amp[:, None] * values[None, :]
        out.append((k, FormField(chart, k, coeffs, mask, f"{name}@{label}")))
    return out


def build_scenario(config: ScenarioConfig) -> Scenario:
    """Instantiate charts, the map and the forms of a validated config."""
    source = _make_chart(config.source, "source")
    target = _make_chart(config.target, "target")
    phi = builtins.make_map(config.map, source, target, fd_step=config.fd_step)
    src_forms: dict[int, list[FormField]] = {}
    dst_forms: dict[int, list[FormField]] = {}
    for spec in config.forms:
        if spec["on"] in ("both", "source"):
            for k, f in _form_fields(spec, source, "source"):
                src_forms.setdefault(k, []).append(f)
        if spec["on"] in ("both", "target"):
            for k, f in _form_fields(spec, target, "target"):
                dst_forms.setdefault(k, []).append(f)
    return Scenario(
        name=config.name,
        phi=phi,
        source_forms=src_forms,
        target_forms=dst_forms,
        order=config.order,
        samples=config.samples,
        eps_sup=config.eps_sup,
        seed=config.seed,
    )


def validate_scenario(config: ScenarioConfig) -> None:
    """Instantiate everything and check orientation by dense sampling.

    Raises :class:`ConfigError`; an orientation failure names a witness
    point in ``witness``.
    """
    try:
        scenario = build_scenario(config)
    except ConfigError:
        raise
    except LpFormsError as exc:
        raise ConfigError(f"invalid scenario {config.name!r}: {exc}") from None
    phi = scenario.phi
    src = phi.source
    pts = np.concatenate([sample_points(src, ORIENTATION_SAMPLES), quadrature_nodes(src, 8).nodes])
    J = jacobian_matrix(phi, pts, check=False)
    det = np.linalg.det(J)
    if np.any(~(det > 0)):
        bad = int(np.argmin(np.where(np.isfinite(det), det, -np.inf)))
        raise ConfigError(
            f"orientation violation in {config.name!r}: det D phi = {det[bad]:.6g} at "
            f"x = {pts[bad].tolist()}",
            field="map",
            witness=pts[bad],
        )
    try:
        src.metric_cholesky(pts)
        phi.target.metric_cholesky(sample_points(phi.target, ORIENTATION_SAMPLES))
    except LpFormsError as exc:
        raise ConfigError(f"invalid metric in {config.name!r}: {exc}", field="metric") from None
    for forms in list(scenario.source_forms.values()) + list(scenario.target_forms.values()):
        for f in forms:
            probe = sample_points(f.chart, 1024)
            if f.support_violation(probe) > 1e-14:
                raise ConfigError(f"form {f.name} is nonzero outside its support mask", field="forms")
