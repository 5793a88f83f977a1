"""Command-line frontend: ``weblin analyze`` and ``weblin verify``.

Exit codes: 0 when the run completed (whatever the verdict), 2 for input
errors, 3 for a degenerate web.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .candidates import (CLUSTER_RADIUS, TOL_BASE, TOL_COMPAT, base_residuals, check_closed_form,
                         find_constant_bases, solve_frobenius)
from .expr import ParseError, parse
from .linsys.qsystem import DegenerateMinor, QSystem
from .residuals import ResidualTable
from .verify import build_L, full_verdict, grid_deformation
from .webgeom import DEFAULT_BOX, DegenerateWeb, NoRegularSamples, WebFunction, is_parallelizable, parse_box

SCHEMA = 1
EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE = 0, 2, 3
SIG_DIGITS = 12


class InputError(ValueError):
    """Bad command-line or candidate-file input (exit code 2)."""


@dataclass
class Config:
    f: str
    params: dict[str, Fraction] = field(default_factory=dict)
    box: tuple[float, float, float, float] = DEFAULT_BOX
    samples: int = 20
    seed: int = 0
    tol_base: float = TOL_BASE
    tol_compat: float = TOL_COMPAT
    radius: float = CLUSTER_RADIUS
    mode: str = "auto"
    json_path: str | None = None
    timing: bool = False

    def validate(self) -> None:
        if self.samples < 10:
            raise InputError("--samples must be at least 10")
        if not (self.box[0] < self.box[1] and self.box[2] < self.box[3]):
            raise InputError("box must be nondegenerate")
        for name in ("tol_base", "tol_compat", "radius"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise InputError(f"{name} must be positive")


# -- JSON helpers ----------------------------------------------------------------------


def _clean(obj):
    """Round floats to 12 significant digits; NaN/inf become null."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return None
        return float(f"{obj:.{SIG_DIGITS}g}")
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return str(obj)


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"


def _table(t: ResidualTable) -> dict:
    out = t.summary()
    if t.symbolic_zero:
        out["symbolic_zero"] = dict(t.symbolic_zero)
    return out


def _param(text: str) -> tuple[str, Fraction]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"parameter must be name=value, got {text!r}")
    k, v = text.split("=", 1)
    try:
        return k.strip(), Fraction(v.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"bad value for parameter {k!r}: {v!r}") from None


def _box(text: str):
    try:
        return parse_box(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _web_summary(w: WebFunction) -> dict:
    ch = w.chern
    return {"f": str(w.f), "c": str(ch.c), "Gamma1": str(ch.G1), "Gamma2": str(ch.G2), "r": str(ch.r),
            "box": list(w.box), "params": {k: str(v) for k, v in sorted(w.bindings.items())}}


def _make_web(cfg: Config) -> WebFunction:
    try:
        return WebFunction(cfg.f, box=cfg.box, bindings=cfg.params)
    except ParseError as exc:
        raise InputError(f"cannot parse f: {exc}") from None


# -- commands ----------------------------------------------------------------------------


def cmd_analyze(cfg: Config) -> dict:
    cfg.validate()
    clock = {}
    t0 = time.perf_counter()
    w = _make_web(cfg)
    samples = w.samples(cfg.samples, cfg.seed)
    report = {"schema": SCHEMA, "command": "analyze", "web": _web_summary(w),
              "config": {"samples": cfg.samples, "seed": cfg.seed, "mode": cfg.mode,
                         "tol_base": cfg.tol_base, "tol_compat": cfg.tol_compat, "radius": cfg.radius}}
    pv = is_parallelizable(w, samples)
    report["parallelizable"] = {"value": pv.parallelizable, "criterion": pv.criterion,
                                "max_abs_r": pv.max_abs_r}
    clock["webgeom"] = time.perf_counter() - t0
    if pv:
        report.update(verdict="PARALLELIZABLE", bases=[], candidates=[], q_tables=[])
        return _finish(report, cfg, clock)

    t0 = time.perf_counter()
    qs = QSystem(w, cfg.mode)
    rejected: list = []
    try:
        bases = find_constant_bases(w, samples, qs, cfg.radius, cfg.tol_base, rejected)
    except DegenerateMinor as exc:
        bases = []
        report["note"] = str(exc)
    clock["qsystem"] = time.perf_counter() - t0
    report["q_mode"] = qs.mode
    if qs.fallback_reason:
        report["q_fallback"] = qs.fallback_reason
    pqs = [qs.at(p) for p in samples if (p.x1, p.x2) in qs._cache]
    if pqs:
        report["q_degrees"] = pqs[0].degrees()
    report["q_tables"] = [
        dict(_table(b.residuals), base=b.label(), status=b.status) for b in bases + rejected
    ]

    t0 = time.perf_counter()
    candidates = []
    for b in bases:
        sol = solve_frobenius(w, b, tol_compat=cfg.tol_compat)
        entry = {"base": b.label(), "frobenius": {
            "compatible": sol.compatible, "compat_t": sol.compat_t, "compat_z": sol.compat_z,
            "path_difference": sol.path_difference, "substeps": sol.substeps,
            "valid_fraction": sol.valid_fraction, "init": list(sol.init)}}
        verdict = full_verdict(w, grid_deformation(w, b.expr(), sol), samples)
        entry["verdict"] = verdict.summary()
        entry["passed"] = bool(sol.compatible and verdict.linearization)
        candidates.append(entry)
    clock["verify"] = time.perf_counter() - t0
    report["candidates"] = candidates
    report["bases"] = [c["base"] for c in candidates if c["passed"]]
    report["verdict"] = "LINEARIZABLE" if report["bases"] else "NO-CONSTANT-BASE"
    report["scope"] = "only constant bases s are searched"
    return _finish(report, cfg, clock)


def load_candidate(path: str, cli_params: dict[str, Fraction]) -> tuple[dict, dict[str, Fraction]]:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read candidate file: {exc}") from None
    if not isinstance(data, dict):
        raise InputError("candidate file must hold a JSON object")
    for key in ("s", "t", "z"):
        if key not in data:
            raise InputError(f"candidate file is missing field {key!r}")
        if not isinstance(data[key], (int, float, str)) or isinstance(data[key], bool):
            raise InputError(f"field {key!r} must be a number or an expression string")
    raw = data.get("params", {}) or {}
    if not isinstance(raw, dict):
        raise InputError("field 'params' must be an object")
    params = {}
    for k, v in raw.items():
        try:
            params[str(k)] = Fraction(str(v))
        except (ValueError, ZeroDivisionError):
            raise InputError(f"bad value for parameter {k!r}") from None
    params.update(cli_params)
    return data, params


def cmd_verify(cfg: Config, candidate_path: str) -> dict:
    cfg.validate()
    data, params = load_candidate(candidate_path, cfg.params)
    cfg.params = params
    t0 = time.perf_counter()
    w = _make_web(cfg)
    names = tuple(sorted(params))
    exprs = {}
    for key in ("s", "t", "z"):
        try:
            e = parse(str(data[key]), names)
        except ParseError as exc:
            raise InputError(f"cannot parse {key}: {exc}") from None
        e = e.substitute(w.bindings) if w.bindings else e
        unbound = e.free_symbols - {"x1", "x2"}
        if unbound:
            raise InputError(f"unbound parameters in {key}: {', '.join(sorted(unbound))}")
        exprs[key] = e
    L = build_L(w, exprs["s"], exprs["t"], exprs["z"])
    extra = [*exprs.values(), *(f.expr for f in L.components())]
    try:
        samples = w.samples(cfg.samples, cfg.seed, extra)
    except NoRegularSamples:
        raise InputError("candidate is singular on the whole box (check parameter domains)") from None
    frob = check_closed_form(w, exprs["s"], exprs["t"], exprs["z"], samples)
    verdict = full_verdict(w, L, samples)
    clock = {"verify": time.perf_counter() - t0}
    ok = frob.verified and verdict.linearization
    report = {"schema": SCHEMA, "command": "verify", "web": _web_summary(w),
              "candidate": {k: str(v) for k, v in exprs.items()},
              "params": {k: str(v) for k, v in sorted(params.items())},
              "frobenius": _table(frob), "verdict_detail": verdict.summary(),
              "verdict": "LINEARIZATION" if ok else "REJECTED"}
    if not frob.verified:
        report["failed_at"] = "frobenius"
    elif not verdict.linearization:
        report["failed_at"] = verdict.failed_at
    return _finish(report, cfg, clock)


def _finish(report: dict, cfg: Config, clock: dict) -> dict:
    if cfg.timing:
        report["timing"] = clock
    return report


# -- text output --------------------------------------------------------------------------


def render_text(report: dict) -> str:
    web = report["web"]
    lines = [f"f      = {web['f']}", f"c      = {web['c']}", f"Gamma1 = {web['Gamma1']}",
             f"Gamma2 = {web['Gamma2']}", f"r      = {web['r']}"]
    if report["command"] == "analyze":
        if "q_degrees" in report:
            lines.append(f"deg Q  = {report['q_degrees']} ({report.get('q_mode')})")
        for t in report.get("q_tables", []):
            lines.append(f"base {t['base']}: {t['status']}, max |Q| = {t['max_residual']:.3g}")
        for cand in report.get("candidates", []):
            fr = cand["frobenius"]
            lines.append(f"candidate s = {cand['base']}: compat {max(fr['compat_t'], fr['compat_z']):.3g}, "
                         f"paths {fr['path_difference']:.3g}, "
                         f"{'passed' if cand['passed'] else 'failed'}")
        verdict = report["verdict"]
        if report.get("bases"):
            verdict += " bases=[" + ", ".join(report["bases"]) + "]"
    else:
        lines.append(f"frobenius max residual = {report['frobenius']['max_residual']:.3g}")
        d = report["verdict_detail"]
        for key in ("pde", "flat", "geodesic"):
            lines.append(f"{key:9s} max residual = {d[key]['max_residual']:.3g}")
        lines.append(f"torsion free: {d['torsion_free']}")
        verdict = report["verdict"]
        if "failed_at" in report:
            verdict += f" (failed at {report['failed_at']})"
    if "timing" in report:
        lines.append("timing: " + ", ".join(f"{k} {v:.2f}s" for k, v in report["timing"].items()))
    lines.append(f"verdict: {verdict}")
    return "\n".join(lines) + "\n"


# -- entry point ----------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="weblin", description="Linearizability of planar 3-webs.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _Parser(add_help=False)
    common.add_argument("--f", required=True, help="web function, e.g. '(x1+x2)*exp(-x1)'")
    common.add_argument("--box", type=_box, default=DEFAULT_BOX, help="x1min,x1max,x2min,x2max")
    common.add_argument("--param", type=_param, action="append", default=[], help="name=value")
    common.add_argument("--samples", type=int, default=20)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--json", dest="json_path", help="write the JSON report here ('-' for stdout)")
    common.add_argument("--timing", action="store_true", help="include wall-clock timings in the report")
    an = sub.add_parser("analyze", parents=[common], help="search constant bases and verify them")
    an.add_argument("--mode", choices=("auto", "symbolic", "numeric"), default="auto")
    an.add_argument("--tol-base", type=float, default=TOL_BASE)
    an.add_argument("--tol-compat", type=float, default=TOL_COMPAT)
    an.add_argument("--radius", type=float, default=CLUSTER_RADIUS)
    ve = sub.add_parser("verify", parents=[common], help="verify a closed-form candidate")
    ve.add_argument("--candidate", required=True, help="JSON file with s, t, z and params")
    return ap


def _config(ns) -> Config:
    return Config(f=ns.f, params=dict(ns.param), box=ns.box, samples=ns.samples, seed=ns.seed,
                  tol_base=getattr(ns, "tol_base", TOL_BASE), tol_compat=getattr(ns, "tol_compat", TOL_COMPAT),
                  radius=getattr(ns, "radius", CLUSTER_RADIUS), mode=getattr(ns, "mode", "auto"),
                  json_path=ns.json_path, timing=ns.timing)


def _emit(report: dict, cfg: Config, out) -> None:
    if cfg.json_path == "-":
        out.write(dumps(report))
        return
    if cfg.json_path:
        with open(cfg.json_path, "w", encoding="utf-8") as fh:
            fh.write(dumps(report))
    out.write(render_text(report))


def main(argv: Sequence[str] | None = None) -> int:
    try:
        ns = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors this way
        return int(exc.code or 0)
    cfg = _config(ns)
    out, err = sys.stdout, sys.stderr
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            if ns.command == "analyze":
                report = cmd_analyze(cfg)
            else:
                report = cmd_verify(cfg, ns.candidate)
    except DegenerateWeb as exc:
        report = {"schema": SCHEMA, "command": ns.command, "verdict": "DEGENERATE", "reason": str(exc)}
        if cfg.json_path:
            _write_raw(report, cfg.json_path, out)
        err.write(f"degenerate web: {exc}\n")
        return EXIT_DEGENERATE
    except (InputError, ParseError, NoRegularSamples, ValueError) as exc:
        err.write(f"input error: {exc}\n")
        return EXIT_INPUT
    _emit(report, cfg, out)
    return EXIT_OK


def _write_raw(report: dict, path: str, out) -> None:
    if path == "-":
        out.write(dumps(report))
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(dumps(report))


if __name__ == "__main__":
    sys.exit(main())
