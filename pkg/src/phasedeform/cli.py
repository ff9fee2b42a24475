"""Command line entry point: ``phasedeform <subcommand> [options]``.

Exit codes: 0 success, 1 a verification check failed, 2 usage or input error.
Errors go to stderr as ``{"error": {"code": ..., "message": ...}}``.
"""

from __future__ import annotations

import argparse
import importlib.resources
import json
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from . import cohomology as coh
from .deformation import NotRealRepresentable, classify_complex, classify_real, normal_form_map
from .exact import fraction_str
from .grassmann import (
    BivectorCoords,
    NotDecomposableError,
    OrientedPlane,
    OutsideChartError,
    plane_to_orbit_point,
    plucker,
    plucker_residuals,
    point_to_plane,
)
from .lie_core import DeformationParams, ParameterError, StructureError, build_deformed, build_standard, g_labels
from .orbit_mech import (
    ChartDomainError,
    ChartPoint,
    OrbitSpec,
    Tolerances,
    casimir_comparison,
    chart_to_point,
    derived_casimir,
    free_hamiltonian,
    hamiltonian_flow,
    homogeneous_collinearity,
    affine_collinearity,
    momentum_maps,
    orbit_residuals,
    poisson_rank,
    quadratic_casimirs,
    run_manifest,
)
from .verify import run_suite, SUITES

OUTPUT_DIR_ENV = "PHASEDEFORM_OUTPUT_DIR"

EXIT_OK, EXIT_VERIFY, EXIT_USAGE = 0, 1, 2


class CliError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


# ---------------------------------------------------------------------------
# value parsers (also applied to config-file values)
# ---------------------------------------------------------------------------


def rational(text: str) -> Fraction:
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError):
        raise CliError("E_RATIONAL", f"malformed rational {text!r}") from None


def rational_triple(text: str) -> tuple:
    parts = str(text).split(",")
    if len(parts) != 3:
        raise CliError("E_RATIONAL", f"eps needs three comma-separated rationals, got {text!r}")
    return tuple(rational(p) for p in parts)


def float_list(text: str) -> List[float]:
    out = []
    for part in str(text).split(","):
        try:
            out.append(float(Fraction(part.strip())))
        except (ValueError, ZeroDivisionError):
            raise CliError("E_NUMBER", f"malformed number {part!r} in {text!r}") from None
    return out


def number(text: str) -> float:
    values = float_list(text)
    if len(values) != 1:
        raise CliError("E_NUMBER", f"expected one number, got {text!r}")
    return values[0]


def integer(text: str) -> int:
    try:
        return int(str(text).strip())
    except ValueError:
        raise CliError("E_NUMBER", f"malformed integer {text!r}") from None


def boolean(text) -> bool:
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise CliError("E_CONFIG", f"malformed boolean {text!r}")


def choice(*allowed: str) -> Callable[[str], str]:
    def parse(text):
        v = str(text).strip()
        if v not in allowed:
            raise CliError("E_USAGE", f"expected one of {', '.join(allowed)}; got {v!r}")
        return v

    return parse


# ---------------------------------------------------------------------------
# option table
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Opt:
    name: str
    parse: Callable[[Any], Any]
    default: Any = None
    help: str = ""
    flag: bool = False  # store_true style

    @property
    def dest(self) -> str:
        return self.name.replace("-", "_")


ALGEBRAS = {
    "g": "g_n",
    "e": "euclidean",
    "o": "orthogonal",
    "h": "heisenberg",
    "ee": "double_euclidean",
}

COMMON = [
    Opt("config", str, None, "flat key=value file; flags override it"),
    Opt("format", choice("json", "csv", "table"), None, "output format"),
    Opt("output", str, None, "write the primary output here instead of stdout"),
    Opt("output-dir", str, None, f"directory for artifacts (default ${OUTPUT_DIR_ENV})"),
    Opt("seed", integer, 0, "seed for randomized checks"),
    Opt("tol-residual", number, Tolerances.residual, "residual tolerance"),
    Opt("tol-drift", number, Tolerances.drift, "drift tolerance"),
    Opt("tol-rank", number, Tolerances.rank, "relative rank threshold"),
]

CHART = [
    Opt("n", integer, 3, "number of angular dimensions"),
    Opt("eps", rational_triple, (Fraction(0), Fraction(1), Fraction(0)), "eps1,eps2,eps3 (chart needs eps1 = eps3 = 0)"),
    Opt("q", float_list, None, "chart position q (comma separated)"),
    Opt("p", float_list, None, "momentum p (comma separated)"),
    Opt("branch", choice("+1", "-1", "1"), "+1", "I-branch"),
    Opt("level", number, 1.0, "Casimir level r (K = r^2)"),
]

COMMANDS: Dict[str, List[Opt]] = {
    "cohomology": [
        Opt("algebra", choice(*ALGEBRAS, "deformed"), "g", "g, e, o, h, ee or deformed"),
        Opt("n", integer, 3),
        Opt("degree", integer, 2),
        Opt("eps", rational_triple, (Fraction(0),) * 3, "for --algebra deformed"),
        Opt("invariant", boolean, False, "degree-2 cocycles on h_n invariant under o(n) (algebra g only)", flag=True),
        Opt("reps", boolean, False, "include representative cocycles", flag=True),
    ],
    "classify": [
        Opt("n", integer, 3),
        Opt("eps", rational_triple, None),
        Opt("field", choice("real", "complex"), "real"),
        Opt("normal-form", boolean, False, "include the explicit normal-form map", flag=True),
    ],
    "casimir": [
        Opt("n", integer, 3),
        Opt("eps", rational_triple, None),
    ],
    "orbit": CHART,
    "simulate": CHART
    + [
        Opt("T", number, 10.0, "final time"),
        Opt("dt", number, 1e-3, "RK4 step"),
        Opt("every", integer, 1, "write every k-th state"),
    ],
    "grassmann": [
        Opt("u", float_list, None, "first spanning vector (length n+2)"),
        Opt("v", float_list, None, "second spanning vector"),
        Opt("bivector", float_list, None, "bivector coordinates in basis order, instead of u, v"),
        Opt("normalize", boolean, False, "rescale so I = ±1", flag=True),
        Opt("eps", rational_triple, None, "also report the orbit point of g_n(eps)"),
        Opt("level", number, 1.0),
    ],
    "verify": [
        Opt("suite", choice(*SUITES), "all"),
    ],
}

DEFAULT_FORMAT = {"simulate": "csv", "verify": "table"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        if "invalid choice" in message and "command" in message:
            raise CliError("E_UNKNOWN_SUBCOMMAND", message)
        raise CliError("E_USAGE", message)


def _as_str(text):
    return text


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="phasedeform", description="Deformations of angular-momentum-symmetric phase space.")
    parser.add_argument("--version", action="version", version=f"phasedeform {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    for name, opts in COMMANDS.items():
        sp = sub.add_parser(name, argument_default=argparse.SUPPRESS)
        for opt in COMMON + opts:
            if opt.flag:
                sp.add_argument(f"--{opt.name}", dest=opt.dest, action="store_const", const="true", help=opt.help)
            else:
                # raw strings here; conversion happens after merging with the config file
                sp.add_argument(f"--{opt.name}", dest=opt.dest, type=_as_str, help=opt.help)
    return parser


def read_config(path: str) -> Dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError("E_CONFIG", f"cannot read config {path!r}: {exc.strerror}") from None
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError("E_CONFIG", f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def resolve(command: str, given: Dict[str, Any]) -> Dict[str, Any]:
    """Merge flags > config file > defaults and convert every value."""
    opts = {o.dest: o for o in COMMON + COMMANDS[command]}
    cfg = read_config(given["config"]) if given.get("config") else {}
    unknown = sorted(set(cfg) - set(opts))
    if unknown:
        raise CliError("E_CONFIG", f"unknown config keys for {command}: {', '.join(unknown)}")
    out = {}
    for dest, opt in opts.items():
        if dest in given:
            out[dest] = opt.parse(given[dest])
        elif dest in cfg:
            out[dest] = opt.parse(cfg[dest])
        else:
            out[dest] = opt.default
    if out["format"] is None:
        out["format"] = DEFAULT_FORMAT.get(command, "json")
    if out["output_dir"] is None:
        out["output_dir"] = os.environ.get(OUTPUT_DIR_ENV) or None
    return out


def config_record(command: str, cfg: Dict[str, Any]) -> Dict[str, Any]:
    """JSON view of a resolved configuration (checked against config.schema.json)."""
    out: Dict[str, Any] = {"command": command}
    for key, value in sorted(cfg.items()):
        if value is None:
            continue
        if key == "eps":
            value = [fraction_str(e) for e in value]
        out[key] = value
    return out


SCHEMA_NAMES = ("casimir", "classify", "cohomology", "config", "error", "grassmann", "manifest", "orbit", "simulate", "verify")


def load_schema(name: str) -> dict:
    if name not in SCHEMA_NAMES:
        raise KeyError(name)
    res = importlib.resources.files("phasedeform") / "schemas" / f"{name}.schema.json"
    return json.loads(res.read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def dumps(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, ensure_ascii=False, indent=2, allow_nan=False) + "\n"


def _require(cfg, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if cfg.get(n) is None]
    if missing:
        raise CliError("E_USAGE", f"missing required option(s): {', '.join(missing)}")


def _params(cfg) -> DeformationParams:
    _require(cfg, "eps")
    if cfg["n"] < 1:
        raise CliError("E_PARAM", "n must be positive")
    return DeformationParams(cfg["n"], *cfg["eps"])


def _tolerances(cfg) -> Tolerances:
    return Tolerances(residual=cfg["tol_residual"], drift=cfg["tol_drift"], rank=cfg["tol_rank"])


def _chart_start(cfg):
    params = _params(cfg)
    e1, e2, e3 = params.eps
    if e1 != 0 or e3 != 0:
        raise CliError(
            "E_CHART_DOMAIN",
            "the chart is defined on the family (0, eps2, 0); map other eps there with classify --normal-form",
        )
    n = params.n
    q = cfg["q"] if cfg["q"] is not None else [0.0] * n
    _require(cfg, "p")
    p = cfg["p"]
    if len(q) != n or len(p) != n:
        raise CliError("E_USAGE", f"--q and --p need {n} components each")
    branch = -1 if cfg["branch"] == "-1" else 1
    point = chart_to_point(e2, ChartPoint(tuple(q), tuple(p)), branch=branch, level=cfg["level"])
    return params, point


def _labelled(params: DeformationParams, coords) -> Dict[str, float]:
    return {str(lab): float(v) for lab, v in zip(g_labels(params.n), coords)}


# ---------------------------------------------------------------------------
# subcommands; each returns (exit code, primary text, extra artifacts)
# ---------------------------------------------------------------------------


def cmd_cohomology(cfg):
    n, k, alg = cfg["n"], cfg["degree"], cfg["algebra"]
    if n < 1 or k < 0:
        raise CliError("E_PARAM", "need n >= 1 and degree >= 0")
    doc = {"algebra": alg, "n": n, "degree": k}
    if alg == "deformed":
        params = _params(cfg)
        g = build_deformed(params)
        doc["eps"] = [fraction_str(e) for e in params.eps]
    else:
        g = build_standard(ALGEBRAS[alg], n)
    if cfg["invariant"]:
        if alg != "g" or k != 2:
            raise CliError("E_USAGE", "--invariant applies to --algebra g --degree 2")
        res = coh.invariant_cocycles(g, coh.heisenberg_ideal(n), coh.orthogonal_part(n))
        doc["space"] = "H2(h_n, g_n)^o(n)"
        doc["span_equals_deformation_cocycles"] = coh.class_span_equal(
            g, coh.heisenberg_ideal(n), res.representatives, coh.deformation_cocycles(n)
        )
    else:
        res = coh.cohomology_dim(g, k, with_reps=cfg["reps"])
        doc["space"] = f"H{k}(g, g)"
    doc["dimension"] = res.dimension
    doc["cochain_dim"] = res.cochain_dim
    doc["rank_in"] = res.rank_in
    doc["rank_out"] = res.rank_out
    if cfg["reps"]:
        doc["representatives"] = res.to_json()["representatives"]
    return EXIT_OK, dumps(doc), {}


def cmd_classify(cfg):
    params = _params(cfg)
    try:
        if cfg["field"] == "complex":
            doc = classify_complex(params).to_json()
            if cfg["normal_form"]:
                doc["normal_form"] = normal_form_map(params, field="complex").summary()
        else:
            doc = classify_real(params, with_normal_form=cfg["normal_form"]).to_json()
    except NotRealRepresentable as exc:
        raise CliError("E_NOT_REAL", f"{exc}; rerun with --field complex") from None
    return EXIT_OK, dumps(doc), {}


def cmd_casimir(cfg):
    params = _params(cfg)
    A = build_deformed(params)
    cs = quadratic_casimirs(params, A)
    doc = {
        "n": params.n,
        "eps": [fraction_str(e) for e in params.eps],
        "dimension": len(cs),
        "casimirs": [c.to_json() for c in cs],
        "derived": derived_casimir(params).to_json(),
        "comparison": casimir_comparison(params),
    }
    return EXIT_OK, dumps(doc), {}


def cmd_orbit(cfg):
    params, point = _chart_start(cfg)
    res = orbit_residuals(OrbitSpec(params, level=cfg["level"]), point)
    mom = momentum_maps(params, point)
    doc = {
        "n": params.n,
        "eps": [fraction_str(e) for e in params.eps],
        "branch": -1 if point.I < 0 else 1,
        "point": _labelled(params, point.coords),
        "residuals": {"casimir": res.casimir, "angular": res.angular, "plucker_aux": res.plucker_aux},
        "within_tolerance": res.max() <= _tolerances(cfg).residual,
        "poisson_rank": poisson_rank(params, point, rel_tol=cfg["tol_rank"]),
        "H0": free_hamiltonian(params, point),
        "mu0_norm_sq": mom.norm_sq,
    }
    return EXIT_OK, dumps(doc), {}


def cmd_simulate(cfg):
    params, point = _chart_start(cfg)
    if not (cfg["T"] > 0 and cfg["dt"] > 0) or cfg["every"] < 1:
        raise CliError("E_PARAM", "T and dt must be positive and every >= 1")
    traj = hamiltonian_flow(params, None, point, cfg["T"], cfg["dt"])
    tol = _tolerances(cfg)
    drift_max = max(v for k, v in traj.drift.items())
    summary = {
        "manifest": run_manifest(params, point, cfg["T"], cfg["dt"], tolerances=tol, seed=cfg["seed"]),
        "drift": dict(sorted(traj.drift.items())),
        "residual_growth": dict(sorted(traj.residual_growth.items())),
        "homogeneous_collinearity": homogeneous_collinearity(traj),
        "affine_collinearity": affine_collinearity(traj),
        "within_tolerance": drift_max <= tol.drift,
    }
    csv_text = traj.to_csv(every=cfg["every"])
    artifacts = {"trajectory.csv": csv_text, "summary.json": dumps(summary)}
    if cfg["format"] == "csv":
        return EXIT_OK, csv_text, artifacts, dumps({"drift_summary": summary})
    return EXIT_OK, dumps(summary), artifacts


def cmd_grassmann(cfg):
    if cfg["bivector"] is not None:
        vals = np.array(cfg["bivector"])
        m = (1 + int(round((1 + 8 * vals.size) ** 0.5))) // 2
        if m * (m - 1) // 2 != vals.size or m < 3:
            raise CliError("E_USAGE", "bivector length must be (n+2)(n+1)/2")
        b = BivectorCoords(m - 2, vals)
        plane = point_to_plane(b, tol=cfg["tol_residual"])
        doc = {"n": b.n, "u": list(plane.u), "v": list(plane.v), "plucker_residual": plucker_residuals(b)}
        return EXIT_OK, dumps(doc), {}
    _require(cfg, "u", "v")
    plane = OrientedPlane(tuple(cfg["u"]), tuple(cfg["v"]))
    b = plucker(plane, normalize=cfg["normalize"])
    doc = {
        "n": plane.n,
        "coordinates": {str(lab): float(v) for lab, v in zip(g_labels(plane.n), b.values)},
        "I": b.I,
        "plucker_residual": plucker_residuals(b),
    }
    if abs(b.I) > 0:
        back = plucker(point_to_plane(b, tol=cfg["tol_residual"]), normalize=cfg["normalize"])
        doc["roundtrip_error"] = float(np.max(np.abs(back.values - b.values)))
    if cfg["eps"] is not None:
        params = DeformationParams(plane.n, *cfg["eps"])
        pt = plane_to_orbit_point(plane, params, level=cfg["level"])
        doc["orbit_point"] = {"eps": [fraction_str(e) for e in params.eps], "coords": _labelled(params, pt.coords)}
    return EXIT_OK, dumps(doc), {}


def verify_table(results) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  status"]
    lines += [f"{r.name:<{width}}  {r.status}" for r in results]
    counts = {s: sum(r.status == s for r in results) for s in ("PASS", "WARN", "FAIL")}
    lines.append(f"summary: {counts['PASS']} PASS, {counts['WARN']} WARN, {counts['FAIL']} FAIL")
    return "\n".join(lines) + "\n"


def cmd_verify(cfg):
    results = run_suite(cfg["suite"], seed=cfg["seed"])
    failed = any(r.status == "FAIL" for r in results)
    doc = {"suite": cfg["suite"], "seed": cfg["seed"], "checks": [r.to_json() for r in results], "failed": failed}
    text = verify_table(results) if cfg["format"] == "table" else dumps(doc)
    return (EXIT_VERIFY if failed else EXIT_OK), text, {"verify.json": dumps(doc)}


HANDLERS = {
    "cohomology": cmd_cohomology,
    "classify": cmd_classify,
    "casimir": cmd_casimir,
    "orbit": cmd_orbit,
    "simulate": cmd_simulate,
    "grassmann": cmd_grassmann,
    "verify": cmd_verify,
}

ERROR_CODES = (
    (ChartDomainError, "E_CHART_DOMAIN"),
    (OutsideChartError, "E_CHART_DOMAIN"),
    (NotDecomposableError, "E_NOT_DECOMPOSABLE"),
    (NotRealRepresentable, "E_NOT_REAL"),
    (ParameterError, "E_PARAM"),
    (StructureError, "E_STRUCTURE"),
)


def _error(code: str, message: str, stream) -> int:
    stream.write(json.dumps({"error": {"code": code, "message": message}}, sort_keys=True) + "\n")
    return EXIT_USAGE


def run(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout if stdout is not None else sys.stdout
    stderr = stderr if stderr is not None else sys.stderr
    try:
        ns = build_parser().parse_args(argv)
        if ns.command is None:
            raise CliError("E_USAGE", "a subcommand is required: " + ", ".join(HANDLERS))
        given = {k: v for k, v in vars(ns).items() if k != "command"}
        cfg = resolve(ns.command, given)
        if ns.command == "simulate" and cfg["format"] not in ("csv", "json"):
            raise CliError("E_USAGE", "simulate supports --format csv or json")
        if ns.command not in ("simulate", "verify") and cfg["format"] != "json":
            raise CliError("E_USAGE", f"{ns.command} supports --format json only")
        out = HANDLERS[ns.command](cfg)
    except CliError as exc:
        return _error(exc.code, exc.message, stderr)
    except tuple(cls for cls, _ in ERROR_CODES) as exc:
        code = next(c for cls, c in ERROR_CODES if isinstance(exc, cls))
        return _error(code, str(exc), stderr)
    except (ValueError, TypeError) as exc:
        return _error("E_INPUT", str(exc), stderr)

    code, text, artifacts = out[:3]
    if len(out) > 3:
        stderr.write(out[3])
    if cfg["output"]:
        Path(cfg["output"]).write_text(text, encoding="utf-8")
    else:
        stdout.write(text)
    if cfg["output_dir"]:
        d = Path(cfg["output_dir"])
        d.mkdir(parents=True, exist_ok=True)
        primary = f"{ns.command}.{'csv' if cfg['format'] == 'csv' else 'txt' if cfg['format'] == 'table' else 'json'}"
        files = dict(artifacts) or {primary: text}
        for name, content in sorted(files.items()):
            (d / name).write_text(content, encoding="utf-8")
    return code


def main() -> None:  # pragma: no cover - console script shim
    sys.exit(run())


if __name__ == "__main__":  # pragma: no cover
    main()
