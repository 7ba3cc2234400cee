"""Command-line front end: classification, inversion, and analysis runs.

Subcommands: ``locus``, ``invert``, ``coverage``, ``gauss-limit``,
``closure``, ``banded``.  Options come from flags, optionally backed by a
``key=value`` config file (flags win).  All artifacts are deterministic:
CSV floats print with 17 significant digits, JSON keys are sorted, row
order is fixed, so identical inputs give byte-identical outputs.

Exit codes: 0 success; 1 I/O, parse, or configuration problem; 2 geometry
precondition unmet (non-convex locus, exterior target); 3 quality floor
unmet (coverage below the configured floor, band resolution exhausted).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .analysis import closure_report, coverage_map, gaussian_convergence
from .errors import (
    BoundaryTargetError,
    ChromaLocusError,
    DegenerateLocusError,
    ExteriorTargetError,
    NoConvergenceError,
    NotConvexError,
    ResolutionExceededError,
    SensorDataError,
)
from .fixtures import FIXTURE_NAMES, fixture_path
from .geometry import (
    LocusClass,
    TorusParam,
    classify_convexity,
    glue_segments,
    sample_locus,
)
from .inversion import InversionTarget, Inverter, banded_from_matrix, invert_log_linear
from .models import FAMILIES, GaussianParams, params_to_dict
from .scene import Scene
from .sensor import Color, Density, load_density, load_sensor

EXIT_OK = 0
EXIT_IO = 1
EXIT_GEOMETRY = 2
EXIT_QUALITY = 3

_PEAK_MODELS = ("von-mises", "step")
_ALL_MODELS = ("von-mises", "step", "gaussian", "log-linear")


class CliError(Exception):
    """Carries the intended process exit code alongside the message."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _cell(x) -> str:
    return "" if x is None else _fmt(x)


def _json_dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

_DEFAULTS = {
    "sensor": None,
    "reference": "uniform",
    "model": "von-mises",
    "glue": "auto",
    "tol": 1e-8,
    "res": 64,
    "a_max": 500.0,
    "threads": 1,
    "out": ".",
    "targets": None,
    "matrix": None,
    "eps": 0.01,
    "widths": "4,8,16,32",
    "D": 1.0,
    "domain": "0:1",
    "floor": 1.0,
    "families": "banded,von_mises,linear3",
    "trials": 100,
}

_COERCE = {
    "tol": float,
    "a_max": float,
    "eps": float,
    "D": float,
    "floor": float,
    "res": int,
    "threads": int,
    "trials": int,
}


def _load_config_file(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read config file {path}: {exc}")
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(EXIT_IO, f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _DEFAULTS:
            raise CliError(EXIT_IO, f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = value.strip()
    return values


def _resolve_config(args: argparse.Namespace) -> dict:
    """Merge flag values over config-file values over defaults."""
    from_file = _load_config_file(args.config) if args.config else {}
    cfg = {}
    flags = vars(args)
    for key, default in _DEFAULTS.items():
        flag = flags.get(key)
        if flag is not None:
            cfg[key] = flag
        elif key in from_file:
            coerce = _COERCE.get(key, str)
            try:
                cfg[key] = coerce(from_file[key])
            except ValueError:
                raise CliError(
                    EXIT_IO, f"config key {key}={from_file[key]!r} is not a valid {coerce.__name__}"
                )
        else:
            cfg[key] = default
    return cfg


def _require_positive(cfg: dict, *keys: str) -> None:
    for key in keys:
        if not cfg[key] > 0:
            raise CliError(EXIT_IO, f"{key} must be positive, got {cfg[key]}")


# ---------------------------------------------------------------------------
# Input resolution
# ---------------------------------------------------------------------------

def _resolve_sensor(cfg: dict):
    spec = cfg["sensor"]
    if not spec:
        raise CliError(EXIT_IO, "no sensor given (use --sensor PATH or a fixture name)")
    p = Path(spec)
    if not p.is_file():
        # bare fixture names (with or without .csv) resolve to bundled data
        stem = p.name[:-4] if p.name.endswith(".csv") else p.name
        if p.parent == Path(".") and stem in FIXTURE_NAMES:
            p = fixture_path(stem)
        else:
            raise CliError(EXIT_IO, f"sensor file not found: {spec}")
    try:
        return load_sensor(p)
    except (SensorDataError, OSError) as exc:
        raise CliError(EXIT_IO, f"cannot load sensor {p}: {exc}")


def _resolve_reference(cfg: dict, sensor) -> Density:
    spec = cfg["reference"]
    if spec == "uniform":
        return Density.uniform(sensor.grid)
    p = Path(spec)
    if not p.is_file():
        raise CliError(EXIT_IO, f"reference density file not found: {spec}")
    try:
        return load_density(p, sensor.grid)
    except (SensorDataError, OSError) as exc:
        raise CliError(EXIT_IO, f"cannot load reference {p}: {exc}")


def _resolve_gluing(cfg: dict, sensor) -> tuple[TorusParam | None, str]:
    """Returns (torus or None, locus class name); exit-2 on hopeless loci."""
    spec = cfg["glue"]
    locus = sample_locus(sensor, sensor.grid.n)
    report = classify_convexity(locus)
    cls = report.locus_class
    if spec in ("auto", "off") and cls == LocusClass.NON_CONVEX:
        raise CliError(
            EXIT_GEOMETRY,
            "locus is NonConvex: no gluing of hull arcs can restore coverage",
        )
    if spec == "off":
        return None, cls.value
    if spec == "auto":
        if cls == LocusClass.PIECEWISE_CONVEX:
            return glue_segments(locus, report), cls.value
        return None, cls.value
    try:
        segs = []
        for part in spec.split(","):
            lo, hi = part.split(":")
            segs.append((float(lo), float(hi)))
        return TorusParam.from_segments(segs), cls.value
    except (ValueError, DegenerateLocusError) as exc:
        raise CliError(EXIT_IO, f"bad gluing spec {spec!r} (want e.g. 400:431,487:700): {exc}")


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot create output directory {out}: {exc}")
    return out


def _read_triple_rows(path_spec: str, what: str) -> list[tuple[int, list[str]]]:
    """Raw CSV rows (1-based line numbers), header skipped if non-numeric."""
    p = Path(path_spec)
    if not p.is_file():
        raise CliError(EXIT_IO, f"{what} file not found: {path_spec}")
    with open(p, newline="", encoding="utf-8") as fh:
        rows = [(i, row) for i, row in enumerate(csv.reader(fh), start=1) if row]
    if rows:
        try:
            [float(c) for c in rows[0][1]]
        except ValueError:
            rows = rows[1:]
    if not rows:
        raise CliError(EXIT_IO, f"{what} file {path_spec} has no data rows")
    return rows


def _parse_chroma(fields: list[str]) -> tuple[np.ndarray | None, str | None]:
    """A row of three floats summing to 1 within 1e-6 (then renormalized)."""
    if len(fields) != 3:
        return None, f"expected 3 columns, got {len(fields)}"
    try:
        vals = np.array([float(c) for c in fields])
    except ValueError:
        return None, "non-numeric value"
    if not np.all(np.isfinite(vals)):
        return None, "non-finite value"
    total = float(vals.sum())
    if abs(total - 1.0) > 1e-6:
        return None, f"components sum to {total:.9g}, not 1"
    return vals / total, None


# ---------------------------------------------------------------------------
# locus
# ---------------------------------------------------------------------------

def cmd_locus(cfg: dict) -> int:
    sensor = _resolve_sensor(cfg)
    locus = sample_locus(sensor, sensor.grid.n)
    report = classify_convexity(locus)
    suggested = None
    if report.locus_class == LocusClass.PIECEWISE_CONVEX:
        suggested = glue_segments(locus, report).to_json_dict()

    out = _out_dir(cfg)
    with open(out / "locus.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["wavelength", "c1", "c2", "c3"])
        for lam, pt in zip(locus.lambdas, locus.points):
            w.writerow([_fmt(lam), _fmt(pt[0]), _fmt(pt[1]), _fmt(pt[2])])
    payload = report.to_json_dict()
    payload["suggested_gluing"] = suggested
    _json_dump(payload, out / "convexity.json")
    print(f"locus class: {report.locus_class.value}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# invert
# ---------------------------------------------------------------------------

def _log_linear_setup(cfg: dict, sensor, reference, model: str):
    """Basis rows on normalized wavelength u in [0, 1], plus a color map."""
    scene = Scene.build(sensor, reference)
    lams = scene.lams
    lo = float(lams[0])
    L = float(lams[-1] - lams[0])
    u = (lams - lo) / L
    if model == "gaussian":
        basis = [np.ones_like(u), u, u * u]
    else:
        basis = [np.ones_like(u), np.cos(2 * np.pi * u), np.sin(2 * np.pi * u)]

    def color_of(coeffs: np.ndarray) -> np.ndarray:
        dens = np.exp(coeffs @ np.vstack(basis))
        return (dens * scene.mass * scene.raw_total) @ scene.eta

    def to_params_dict(coeffs: np.ndarray) -> dict:
        if model == "gaussian":
            # translate u-coefficients back to raw wavelength units
            p1, p2, p3 = (float(c) for c in coeffs)
            return params_to_dict(
                GaussianParams(
                    alpha=p3 / L**2,
                    beta=p2 / L - 2 * p3 * lo / L**2,
                    gamma=p1 - p2 * lo / L + p3 * (lo / L) ** 2,
                )
            )
        return {
            "type": "log_linear",
            "coeffs": [float(c) for c in coeffs],
            "basis": "1, cos(2*pi*u), sin(2*pi*u)",
            "u": f"(wavelength - {_fmt(lo)}) / {_fmt(L)}",
        }

    return basis, color_of, to_params_dict


def cmd_invert(cfg: dict) -> int:
    model = cfg["model"]
    if model not in _ALL_MODELS:
        raise CliError(EXIT_IO, f"unknown model {model!r} (choose from {', '.join(_ALL_MODELS)})")
    if not cfg["targets"]:
        raise CliError(EXIT_IO, "no targets CSV given (use --targets PATH)")
    _require_positive(cfg, "tol", "a_max")
    sensor = _resolve_sensor(cfg)
    reference = _resolve_reference(cfg, sensor)
    rows = _read_triple_rows(cfg["targets"], "targets")

    peaked = model in _PEAK_MODELS
    if peaked:
        gluing, _ = _resolve_gluing(cfg, sensor)
        inverter = Inverter(sensor, reference, gluing, a_max=cfg["a_max"])
        solve = inverter.invert_von_mises if model == "von-mises" else inverter.invert_step
    else:
        basis, color_of, to_params_dict = _log_linear_setup(cfg, sensor, reference, model)

    results = []
    for lineno, fields in rows:
        chroma, problem = _parse_chroma(fields)
        raw = (fields + ["", "", ""])[:3]
        if problem is not None:
            results.append((raw, "malformed", None, None, None, f"line {lineno}: {problem}"))
            continue
        target_cells = [_fmt(v) for v in chroma]
        try:
            if peaked:
                res = solve(InversionTarget(chroma, tolerance=cfg["tol"]))
                params = params_to_dict(res.params)
                results.append(
                    (target_cells, "ok", params, res.residual, res.iterations, "")
                )
            else:
                ll = invert_log_linear(
                    sensor, reference, basis, Color(chroma), tolerance=cfg["tol"]
                )
                residual = float(np.abs(color_of(ll.coeffs) - chroma).sum())
                results.append(
                    (target_cells, "ok", to_params_dict(ll.coeffs), residual, None, "")
                )
        except ExteriorTargetError as exc:
            results.append((target_cells, "exterior", None, None, None, str(exc)))
        except BoundaryTargetError as exc:
            results.append((target_cells, "boundary", None, None, None, str(exc)))
        except NoConvergenceError as exc:
            results.append((target_cells, "no_convergence", None, None, None, str(exc)))
        except SensorDataError as exc:
            results.append((target_cells, "error", None, None, None, str(exc)))

    out = _out_dir(cfg)
    n_ok = 0
    with open(out / "inversions.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["c1", "c2", "c3", "status", "params", "residual", "iterations", "detail"])
        for cells, status, params, residual, iters, detail in results:
            n_ok += status == "ok"
            w.writerow(
                cells
                + [
                    status,
                    "" if params is None else json.dumps(params, sort_keys=True, separators=(",", ":")),
                    _cell(residual),
                    "" if iters is None else str(iters),
                    detail,
                ]
            )
    print(f"inverted {n_ok}/{len(results)} targets ({model})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# coverage
# ---------------------------------------------------------------------------

def cmd_coverage(cfg: dict) -> int:
    model = cfg["model"]
    if model not in _PEAK_MODELS:
        raise CliError(
            EXIT_IO, f"coverage supports models {', '.join(_PEAK_MODELS)}, got {model!r}"
        )
    _require_positive(cfg, "tol", "a_max", "threads")
    if not 0.0 <= cfg["floor"] <= 1.0:
        raise CliError(EXIT_IO, f"floor must lie in [0, 1], got {cfg['floor']}")
    if cfg["res"] < 16:
        raise CliError(EXIT_IO, f"coverage needs res >= 16, got {cfg['res']}")
    sensor = _resolve_sensor(cfg)
    reference = _resolve_reference(cfg, sensor)
    gluing, locus_class = _resolve_gluing(cfg, sensor)

    report = coverage_map(
        sensor,
        reference,
        model,
        cfg["res"],
        gluing=gluing,
        a_max=cfg["a_max"],
        tolerance=cfg["tol"],
        threads=cfg["threads"],
    )

    out = _out_dir(cfg)
    payload = report.to_json_dict()
    payload["locus_class"] = locus_class
    payload["gluing"] = gluing.to_json_dict() if gluing is not None else None
    payload["floor"] = cfg["floor"]
    payload["tolerance"] = cfg["tol"]
    _json_dump(payload, out / "coverage.json")
    with open(out / "coverage_heatmap.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "col", "solved", "s", "a", "residual"])
        for row, col, solved, s, a, residual in report.heatmap_rows():
            w.writerow([row, col, solved, _cell(s), _cell(a), _cell(residual)])

    print(
        f"coverage: {report.n_solved}/{report.n_targets} solved "
        f"({report.solved_fraction:.4f}), max residual {report.max_residual:.3g}"
    )
    if report.solved_fraction < cfg["floor"]:
        print(f"solved fraction below floor {cfg['floor']}", file=sys.stderr)
        return EXIT_QUALITY
    return EXIT_OK


# ---------------------------------------------------------------------------
# gauss-limit
# ---------------------------------------------------------------------------

def cmd_gauss_limit(cfg: dict) -> int:
    try:
        widths = [float(w) for w in str(cfg["widths"]).split(",") if w.strip()]
    except ValueError:
        raise CliError(EXIT_IO, f"bad widths list {cfg['widths']!r}")
    try:
        lo, hi = (float(v) for v in str(cfg["domain"]).split(":"))
    except ValueError:
        raise CliError(EXIT_IO, f"bad domain {cfg['domain']!r} (want LO:HI)")
    if cfg["D"] < 0:
        raise CliError(EXIT_IO, f"D must be nonnegative, got {cfg['D']}")
    try:
        table = gaussian_convergence(cfg["D"], widths, (lo, hi))
    except SensorDataError as exc:
        raise CliError(EXIT_IO, str(exc))

    out = _out_dir(cfg)
    with open(out / "gauss_limit.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["width", "sup_gap", "ratio"])
        for width, gap, ratio in table.csv_rows():
            w.writerow([_fmt(width), _fmt(gap), _cell(ratio)])
    _json_dump(table.to_json_dict(), out / "gauss_limit.json")
    print(f"gauss-limit: {len(table.rows)} rows, final gap {table.rows[-1].sup_gap:.3g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# closure
# ---------------------------------------------------------------------------

def cmd_closure(cfg: dict) -> int:
    names = [f.strip() for f in str(cfg["families"]).split(",") if f.strip()]
    unknown = [f for f in names if f not in FAMILIES]
    if unknown:
        raise CliError(
            EXIT_IO,
            f"unknown families {', '.join(unknown)} (choose from {', '.join(sorted(FAMILIES))})",
        )
    if cfg["trials"] < 1:
        raise CliError(EXIT_IO, f"trials must be at least 1, got {cfg['trials']}")
    report = closure_report(names, cfg["trials"])
    out = _out_dir(cfg)
    _json_dump(report.to_json_dict(), out / "closure.json")
    for r in report.rows:
        print(f"{r.family:<12} {r.operation:<8} {r.verdict}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# banded
# ---------------------------------------------------------------------------

def cmd_banded(cfg: dict) -> int:
    if not cfg["matrix"]:
        raise CliError(EXIT_IO, "no matrix CSV given (use --matrix PATH)")
    _require_positive(cfg, "eps")
    sensor = _resolve_sensor(cfg)
    reference = _resolve_reference(cfg, sensor)
    rows = _read_triple_rows(cfg["matrix"], "matrix")
    columns = []
    for lineno, fields in rows:
        chroma, problem = _parse_chroma(fields)
        if problem is not None:
            raise CliError(EXIT_IO, f"matrix row at line {lineno}: {problem}")
        columns.append(chroma)
    matrix = np.column_stack(columns)

    assignment = banded_from_matrix(sensor, reference, matrix, cfg["eps"])

    out = _out_dir(cfg)
    payload = {
        "eps": cfg["eps"],
        "n_superblocks": assignment.n_superblocks,
        "mass_scale": assignment.mass_scale,
        "columns": [
            {
                "target": [float(v) for v in matrix[:, i]],
                "error": float(assignment.errors[i]),
                "sets": [[float(a), float(b)] for a, b in assignment.sets[i]],
            }
            for i in range(matrix.shape[1])
        ],
    }
    _json_dump(payload, out / "banded.json")
    print(
        f"banded: {matrix.shape[1]} columns, {assignment.n_superblocks} superblocks, "
        f"max error {float(np.max(assignment.errors)):.3g} (eps {cfg['eps']})"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "locus": cmd_locus,
    "invert": cmd_invert,
    "coverage": cmd_coverage,
    "gauss-limit": cmd_gauss_limit,
    "closure": cmd_closure,
    "banded": cmd_banded,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chromalocus",
        description="Spectral color models: locus classification, inversion, coverage.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str, *flags: str) -> None:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key=value config file; flags override it")
        p.add_argument("--out", help="output directory (default .)")
        if "sensor" in flags:
            p.add_argument("--sensor", help="sensor CSV path or fixture name (cie1931, d90)")
        if "reference" in flags:
            p.add_argument("--reference", help="reference density: uniform or CSV path")
        if "model" in flags:
            p.add_argument("--model", help="model kind: " + ", ".join(_ALL_MODELS))
        if "glue" in flags:
            p.add_argument("--glue", help="auto, off, or explicit segments LO:HI,LO:HI,...")
        if "tol" in flags:
            p.add_argument("--tol", type=float, help="inversion tolerance (l1 on chromaticity)")
        if "res" in flags:
            p.add_argument("--res", type=int, help="coverage grid resolution per axis (>= 16)")
        if "a_max" in flags:
            p.add_argument("--a-max", dest="a_max", type=float, help="amplitude cap for peak models")
        if "threads" in flags:
            p.add_argument("--threads", type=int, help="worker threads for grid solves")
        if "floor" in flags:
            p.add_argument("--floor", type=float, help="minimum solved fraction (exit 3 below it)")
        if "targets" in flags:
            p.add_argument("--targets", help="CSV of chromaticity targets, one triple per row")
        if "matrix" in flags:
            p.add_argument("--matrix", help="CSV of target chromaticities, one column per row")
        if "eps" in flags:
            p.add_argument("--eps", type=float, help="centroid error budget per column")
        if "widths" in flags:
            p.add_argument("--widths", help="comma-separated circular widths")
        if "D" in flags:
            p.add_argument("--D", dest="D", type=float, help="amplitude/offset bound")
        if "domain" in flags:
            p.add_argument("--domain", help="evaluation interval LO:HI")
        if "families" in flags:
            p.add_argument("--families", help="comma-separated family names")
        if "trials" in flags:
            p.add_argument("--trials", type=int, help="random pairs per family")

    add("locus", "classify a sensor's spectral locus", "sensor")
    add("invert", "invert chromaticity targets to model parameters",
        "sensor", "reference", "model", "glue", "tol", "a_max", "targets")
    add("coverage", "grid-invert the interior of the color triangle",
        "sensor", "reference", "model", "glue", "tol", "res", "a_max", "threads", "floor")
    add("gauss-limit", "wide-window limit study", "widths", "D", "domain")
    add("closure", "closure residual summary for sampled families", "families", "trials")
    add("banded", "build disjoint banded densities matching a chromaticity matrix",
        "sensor", "reference", "matrix", "eps")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        return _COMMANDS[args.command](cfg)
    except CliError as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return exc.code
    except (NotConvexError, DegenerateLocusError, ExteriorTargetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except ResolutionExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_QUALITY
    except (ChromaLocusError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
