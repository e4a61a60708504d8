"""Batch certification: run reports, pointwise CSV export and the ``certify`` command.

Usage::

    certify run <scenario-file> [--direction push|pull|both] [--order N]
                [--samples N] [--out PATH] [--csv PATH] [--seed N] [--jobs N]
    certify catalog list
    certify catalog show <name>

``<scenario-file>`` may be ``catalog:<name>`` for a bundled scenario.  When
``--out`` is omitted the report goes to ``$LPFORMS_OUTPUT_DIR`` (or the
current directory) as ``<name>.report.json``.

Exit status: 0 when every certificate passes, 1 when any certificate fails
or errors, 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .catalog import catalog_names, catalog_path
from .certify import PULL, PUSH, Scenario, certify, factor_integrands
from .diffeo import inverse_spectrum, jacobian_determinant, singular_spectrum
from .errors import ArgumentError, ConfigError, LpFormsError, OutputError
from .fields import pointwise_norm
from .geometry import quadrature_nodes
from .scenario import ScenarioConfig, build_scenario, load_scenario

__all__ = [
    "RunReport",
    "run",
    "emit_pointwise_csv",
    "write_atomic",
    "main",
    "OUTPUT_DIR_ENV",
    "CSV_FIELDS",
]

OUTPUT_DIR_ENV = "LPFORMS_OUTPUT_DIR"
CSV_FIELDS = ("alpha_i", "beta_i", "jacobian", "pointwise_norm", "factor_integrands")
REPORT_FORMAT = 1

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _json_safe(obj):
    """Replace non-finite floats by strings so the report stays strict JSON."""
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_atomic(path, text: str) -> Path:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}", path=str(path)) from None
    return path


@dataclass
class RunReport:
    """Outcome of one batch run.

    ``records`` holds one entry per requested (direction, form, k, p) tuple,
    in request order.  Each record carries ``status`` ``"pass"``, ``"fail"``
    or ``"error"``.
    """

    scenario: str
    expect: str
    records: list[dict]
    metadata: dict
    path: Path | None = field(default=None, compare=False)

    @property
    def summary(self) -> dict:
        counts = {"pass": 0, "fail": 0, "error": 0}
        for r in self.records:
            counts[r["status"]] += 1
        outcome = "pass" if counts["fail"] == counts["error"] == 0 else (
            "error" if counts["fail"] == 0 else "fail"
        )
        return {
            "total": len(self.records),
            **counts,
            "outcome": outcome,
            "expected": self.expect,
            "expectation_met": outcome == self.expect
            or (self.expect == "error" and counts["error"] == len(self.records)),
        }

    @property
    def all_passed(self) -> bool:
        return bool(self.records) and all(r["status"] == "pass" for r in self.records)

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.all_passed else EXIT_FAIL

    def to_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "scenario": self.scenario,
            "environment": self.metadata,
            "summary": self.summary,
            "records": self.records,
        }

    def to_json(self) -> str:
        return json.dumps(_json_safe(self.to_dict()), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _directions(direction: str) -> list[str]:
    if direction == "both":
        return [PUSH, PULL]
    if direction in (PUSH, PULL):
        return [direction]
    raise ArgumentError(f"direction must be push, pull or both, got {direction!r}")


def _override(config: ScenarioConfig, order, samples, seed) -> ScenarioConfig:
    changes = {}
    for key, value in (("order", order), ("samples", samples), ("seed", seed)):
        if value is not None:
            if int(value) != value or value < (0 if key == "seed" else 1):
                raise ArgumentError(f"invalid {key}: {value!r}")
            changes[key] = int(value)
    return dataclasses.replace(config, **changes) if changes else config


def _fmt_p(p: float):
    return "inf" if math.isinf(p) else p


def _one(scenario: Scenario, direction: str, form: str, k: int, p: float) -> dict:
    base = {"direction": direction, "form": form, "k": k, "p": _fmt_p(p), "scenario": scenario.name}
    try:
        cert = certify(scenario, direction, k, p, form=form)
    except LpFormsError as exc:
        rec = dict(base, status="error", error={"type": type(exc).__name__, "message": str(exc)})
        loc = getattr(exc, "location", None)
        if loc is not None:
            rec["error"]["location"] = np.asarray(loc, dtype=float).tolist()
        return rec
    rec = cert.as_dict()
    rec["status"] = rec["verdict"]
    return rec


def run(
    config: ScenarioConfig,
    direction: str = "both",
    out=None,
    *,
    order: int | None = None,
    samples: int | None = None,
    seed: int | None = None,
    jobs: int = 1,
) -> RunReport:
    """Certify every requested tuple of ``config`` and write the report.

    Tuples are all forms of each degree in ``config.degree_list`` for every
    exponent and selected direction.  A failing tuple is recorded with its
    error and never stops the others.  The report is written to ``out``
    (skipped when ``None``) before it is returned.
    """
    config = _override(config, order, samples, seed)
    dirs = _directions(direction)
    scenario = build_scenario(config)

    tasks = []
    for d in dirs:
        for k in config.degree_list:
            for form in scenario.forms(d, k):
                for p in config.exponents:
                    tasks.append((d, form.name, k, p))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=int(jobs)) as pool:
            records = list(pool.map(lambda t: _one(scenario, *t), tasks))
    else:
        records = [_one(scenario, *t) for t in tasks]

    metadata = {
        "version": __version__,
        "directions": dirs,
        "orders": [config.order, 2 * config.order],
        "samples": config.samples,
        "seed": config.seed,
        "eps_sup": config.eps_sup,
        "fd_step": config.fd_step,
        "exponents": [_fmt_p(p) for p in config.exponents],
        "degrees": config.degree_list,
        "dimension": config.n,
    }
    report = RunReport(config.name, config.expect, records, metadata)
    if out is not None:
        report.path = write_atomic(out, report.to_json())
    return report


def _label(p: float) -> str:
    return "inf" if math.isinf(p) else format(p, "g")


def emit_pointwise_csv(
    scenario: Scenario,
    fields: Sequence[str],
    grid: np.ndarray,
    path,
    *,
    exponents: Sequence[float] = (1.0, 1.5, 2.0, 3.0, math.inf),
) -> Path:
    """Export pointwise data at source-chart ``grid`` points as CSV.

    Columns are ``x1..xn`` followed, in the order requested, by

    * ``alpha_i``: ``alpha_1..alpha_n`` of the map at ``x``;
    * ``beta_i``: ``beta_1..beta_n`` of the inverse at ``phi(x)``;
    * ``jacobian``: ``J(x)``;
    * ``pointwise_norm``: ``norm[<form>]`` for every source form;
    * ``factor_integrands``: ``lower_k<k>_p<p>`` and ``upper_k<k>_p<p>`` from
      :func:`lpforms.certify.factor_integrands`.

    Numbers use 17 significant digits.
    """
    unknown = [f for f in fields if f not in CSV_FIELDS]
    if unknown or not fields:
        raise ArgumentError(f"csv fields must be among {CSV_FIELDS}, got {list(fields)}")
    phi = scenario.phi
    n = phi.n
    x = np.atleast_2d(np.asarray(grid, dtype=float))
    header = [f"x{i + 1}" for i in range(n)]
    cols: list[np.ndarray] = [x[:, i] for i in range(n)]
    alphas = None
    for name in fields:
        if name == "alpha_i":
            alphas = singular_spectrum(phi, x).alphas if alphas is None else alphas
            header += [f"alpha_{i + 1}" for i in range(n)]
            cols += [alphas[:, i] for i in range(n)]
        elif name == "beta_i":
            betas = inverse_spectrum(phi, phi.apply(x)).alphas
            header += [f"beta_{i + 1}" for i in range(n)]
            cols += [betas[:, i] for i in range(n)]
        elif name == "jacobian":
            header.append("jacobian")
            cols.append(np.asarray(jacobian_determinant(phi, x)))
        elif name == "pointwise_norm":
            for k in sorted(scenario.source_forms):
                for form in scenario.source_forms[k]:
                    header.append(f"norm[{form.name}]")
                    cols.append(np.asarray(pointwise_norm(form, x, seed=scenario.seed)))
        elif name == "factor_integrands":
            alphas = singular_spectrum(phi, x).alphas if alphas is None else alphas
            for k in range(n + 1):
                for p in exponents:
                    low, up = factor_integrands(alphas, k, p)
                    header += [f"lower_k{k}_p{_label(p)}", f"upper_k{k}_p{_label(p)}"]
                    cols += [low, up]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    table = np.column_stack(cols)
    for row in table:
        writer.writerow([format(float(v), ".17g") for v in row])
    return write_atomic(path, buf.getvalue())


def _default_out(name: str) -> Path:
    base = os.environ.get(OUTPUT_DIR_ENV) or "."
    return Path(base) / f"{name}.report.json"


def _describe_config_error(exc: ConfigError) -> str:
    parts = [f"config error: {exc}"]
    if exc.line is not None:
        parts.append(f"  at line {exc.line}, column {exc.column}")
    if exc.field is not None:
        parts.append(f"  field: {exc.field}")
    if exc.witness is not None:
        parts.append(f"  witness point: {np.asarray(exc.witness).tolist()}")
    return "\n".join(parts)


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonnegative(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="certify", description="Certify L^p transport bounds for differential forms.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="certify every tuple of a scenario file")
    r.add_argument("scenario", help="scenario TOML file, or catalog:<name>")
    r.add_argument("--direction", choices=("push", "pull", "both"), default="both")
    r.add_argument("--order", type=_positive, help="quadrature points per axis (refined run uses twice this)")
    r.add_argument("--samples", type=_positive, help="low-discrepancy samples for suprema")
    r.add_argument("--seed", type=_nonnegative, help="seed for comass restarts")
    r.add_argument("--out", help=f"report path (default ${OUTPUT_DIR_ENV}/<name>.report.json)")
    r.add_argument("--csv", help="also write pointwise data at the source quadrature nodes")
    r.add_argument("--csv-fields", default=",".join(CSV_FIELDS), help="comma-separated CSV field groups")
    r.add_argument("--jobs", type=_positive, default=1, help="worker threads")
    r.add_argument("--quiet", action="store_true", help="only print the summary line")

    c = sub.add_parser("catalog", help="list or print bundled scenarios")
    csub = c.add_subparsers(dest="action", required=True)
    csub.add_parser("list")
    show = csub.add_parser("show")
    show.add_argument("name")
    return parser


def _print_records(report: RunReport, stream) -> None:
    for r in report.records:
        head = f"{r['status']:5s} {r['direction']:4s} k={r['k']} p={r['p']!s:<4} {r['form']}"
        if r["status"] == "error":
            print(f"{head}  {r['error']['type']}: {r['error']['message']}", file=stream)
        else:
            print(f"{head}  r_low={r['r_low']:.9g} r_up={r['r_up']:.9g} eps={r['eps']:.3g}", file=stream)


def _cmd_run(args) -> int:
    try:
        config = load_scenario(args.scenario)
        config = _override(config, args.order, args.samples, args.seed)
    except ConfigError as exc:
        print(_describe_config_error(exc), file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out) if args.out else _default_out(config.name)
    try:
        report = run(config, args.direction, out, jobs=args.jobs)
        if args.csv:
            fields = [f.strip() for f in args.csv_fields.split(",") if f.strip()]
            scenario = build_scenario(config)
            grid = quadrature_nodes(scenario.phi.source, config.order).nodes
            emit_pointwise_csv(scenario, fields, grid, args.csv, exponents=config.exponents)
    except OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not args.quiet:
        _print_records(report, sys.stdout)
    s = report.summary
    print(
        f"{config.name}: {s['pass']} pass, {s['fail']} fail, {s['error']} error "
        f"of {s['total']} (expected {s['expected']}); report: {report.path}"
    )
    return report.exit_code


def _cmd_catalog(args) -> int:
    if args.action == "list":
        for name in catalog_names():
            config = load_scenario(catalog_path(name))
            print(f"{name:24s} n={config.n}  {config.description}")
        return EXIT_OK
    try:
        print(catalog_path(args.name).read_text(encoding="utf-8"), end="")
    except ConfigError as exc:
        print(_describe_config_error(exc), file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_catalog(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
