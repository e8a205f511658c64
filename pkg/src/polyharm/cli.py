"""``polyharm`` command line: bounds, family scans, minimisation and invariants.

Exit codes: 0 ok, 2 bad configuration or inadmissible class, 3 ambiguous
class or class escape during minimisation, 4 numerical failure or
unreadable input.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .conformal import ConformalMapSpec, f0, f1
from .errors import (ClassAmbiguousError, InvalidInputError, NumericalFailure,
                     PolyharmError, ResolutionError)
from .geometry.partition import tangent_partition
from .geometry.polyhedron import Polyhedron, build_convex, build_prism

EXIT_OK, EXIT_CONFIG, EXIT_TOPOLOGY, EXIT_NUMERICAL = 0, 2, 3, 4

log = logging.getLogger("polyharm")


# --------------------------------------------------------------------------- output

def dumps(obj, indent: int = 2) -> str:
    """JSON with every float written to 17 significant digits."""

    def enc(x, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if isinstance(x, dict):
            if not x:
                return "{}"
            items = [f"{pad}{json.dumps(str(k))}: {enc(v, level + 1)}" for k, v in x.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(x, (list, tuple)):
            if not x:
                return "[]"
            if all(not isinstance(v, (dict, list, tuple)) for v in x):
                return "[" + ", ".join(enc(v, level + 1) for v in x) + "]"
            return "[\n" + ",\n".join(pad + enc(v, level + 1) for v in x) + "\n" + end + "]"
        if isinstance(x, np.ndarray):
            return enc(x.tolist(), level)
        if isinstance(x, (bool, np.bool_)):
            return "true" if x else "false"
        if isinstance(x, (int, np.integer)):
            return str(int(x))
        if isinstance(x, (float, np.floating)):
            v = float(x)
            if not math.isfinite(v):
                return "null"
            return format(v, ".17g")
        if x is None:
            return "null"
        return json.dumps(x)

    return enc(obj, 0)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


# --------------------------------------------------------------------------- configuration

@dataclass
class ExperimentConfig:
    dims: Optional[tuple] = None
    vertices: Optional[list] = None
    octant_wrapping: Optional[tuple] = None
    wrapping: Optional[np.ndarray] = None
    chi: int = 0
    spec: Optional[ConformalMapSpec] = None
    class_name: Optional[str] = None
    grid: int = 16
    s_values: list = field(default_factory=list)
    out: Optional[str] = None
    seed: int = 0
    fmt: str = "json"
    max_iter: int = 200_000
    tol: float = 1e-9
    freeze_edges: bool = False
    richardson: bool = False

    def polyhedron(self) -> Polyhedron:
        if self.vertices is not None:
            return build_convex(np.asarray(self.vertices, dtype=float))
        if self.dims is None:
            raise InvalidInputError("no geometry given (use --prism or --vertices)")
        return build_prism(*self.dims)

    @property
    def is_prism(self) -> bool:
        return self.vertices is None


NAMED_CLASSES = {
    "zero": ((0,) * 8, lambda: None),
    "h0": ((0, 0, 0, 0, 0, 0, 0, -1), f0),
    "h1": ((0, -1, 0, -1, 0, 0, 0, -1), lambda: f1(0.5)),
}


def parse_dims(text: str) -> tuple:
    try:
        dims = tuple(float(x) for x in text.split(","))
    except ValueError as exc:
        raise InvalidInputError(f"bad --prism value {text!r}") from exc
    if len(dims) != 3:
        raise InvalidInputError("--prism needs three comma-separated lengths")
    return dims


def parse_s_range(text: Optional[str]) -> list:
    """``a:b:step`` (inclusive) or a comma list; an empty string gives no values."""
    if text is None or not text.strip():
        return []
    try:
        if ":" in text:
            a, b, step = (float(x) for x in text.split(":"))
            if step <= 0:
                raise InvalidInputError("--s step must be positive")
            n = int(math.floor((b - a) / step + 1e-9)) + 1
            vals = [round(a + i * step, 12) for i in range(max(n, 0))]
        else:
            vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise InvalidInputError(f"bad --s value {text!r}") from exc
    for s in vals:
        if not 0 < s < 1:
            raise InvalidInputError(f"s must lie in (0, 1), got {s}")
    return vals


def load_class(text: Optional[str], cfg: ExperimentConfig) -> None:
    """``--class`` is a named class (zero, h0, h1) or a JSON file."""
    if text is None:
        text = "h0"
    if text in NAMED_CLASSES:
        w, mk = NAMED_CLASSES[text]
        cfg.octant_wrapping, cfg.spec, cfg.class_name = w, mk(), text
        return
    try:
        data = json.loads(Path(text).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"cannot read class file {text}: {exc}") from exc
    if "octant_wrapping" in data:
        cfg.octant_wrapping = tuple(int(x) for x in data["octant_wrapping"])
    elif "wrapping" in data:
        cfg.wrapping = np.asarray(data["wrapping"], dtype=int)
    elif "name" in data and data["name"] in NAMED_CLASSES:
        load_class(data["name"], cfg)
    else:
        raise InvalidInputError("class file needs 'octant_wrapping', 'wrapping' or 'name'")
    if "chi" in data:
        cfg.chi = int(data["chi"])
    if "spec" in data:
        cfg.spec = ConformalMapSpec.from_json(json.dumps(data["spec"]))
    cfg.class_name = data.get("name", cfg.class_name)


def config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig(seed=args.seed, out=args.out, fmt=args.format)
    if getattr(args, "vertices", None):
        try:
            cfg.vertices = json.loads(Path(args.vertices).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInputError(f"cannot read vertex file: {exc}") from exc
    else:
        cfg.dims = parse_dims(args.prism)
    if getattr(args, "grid", None) is not None:
        cfg.grid = int(args.grid)
        if cfg.grid < 1:
            raise InvalidInputError("--grid must be positive")
    if hasattr(args, "cls"):
        load_class(args.cls, cfg)
    if getattr(args, "chi", None) is not None:
        if args.chi not in (0, 1):
            raise InvalidInputError("--chi must be 0 or 1")
        cfg.chi = args.chi
    for key in ("max_iter", "tol", "freeze_edges", "richardson"):
        if hasattr(args, key):
            setattr(cfg, key, getattr(args, key))
    return cfg


# --------------------------------------------------------------------------- commands

def _refl_class(cfg):
    from .topology import ReflSymClass

    if cfg.octant_wrapping is None or not cfg.is_prism:
        return None
    return ReflSymClass(cfg.octant_wrapping, cfg.chi, cfg.dims)


def _full_class(cfg, P, part):
    from .topology import HomotopyClass, expand_reflection, validate_class

    rs = _refl_class(cfg)
    h = expand_reflection(rs, part) if rs is not None else HomotopyClass(cfg.wrapping)
    violations = validate_class(h, P.n_vertices, part.n_sectors)
    return h, rs, violations


def cmd_bounds(cfg: ExperimentConfig) -> tuple:
    from .connection import polyhedron_lower_bound
    from .energy import appell_upper_bound, energy_quadrature, theorem3_bound
    from .reflection import H0, improved_lower_bound
    from .trial import build_trial_field, constant_field

    P = cfg.polyhedron()
    part = tangent_partition(P)
    h, rs, violations = _full_class(cfg, P, part)
    if violations:
        return {"error": "inadmissible class", "violations": violations}, EXIT_CONFIG
    lower = polyhedron_lower_bound(P, h, part)
    report = {"geometry": list(cfg.dims) if cfg.is_prism else "vertices",
              "class": cfg.class_name or "custom",
              "wrapping": h.wrapping.tolist(),
              "lower": lower}
    if rs is not None:
        report["improved"] = improved_lower_bound(rs)
        report["theorem3"] = theorem3_bound(rs)
        if tuple(rs.octant_wrapping) == H0:
            report["appell"] = appell_upper_bound(*cfg.dims)
        if h.is_zero:
            report["trial"] = energy_quadrature(constant_field(P), 4).extrapolated
        elif cfg.spec is not None:
            field = build_trial_field(P, cfg.spec)
            report["trial"] = energy_quadrature(field, cfg.grid).extrapolated
    # ordering checks: every upper bound must sit above every lower bound
    lows = {k: report[k] for k in ("lower", "improved") if k in report}
    ups = {k: report[k] for k in ("theorem3", "appell", "trial") if k in report}
    problems = [f"{lk}={lv:.17g} exceeds {uk}={uv:.17g}"
                for lk, lv in lows.items() for uk, uv in ups.items()
                if lv > uv * (1 + 1e-9) + 1e-12]
    report["ordering_violations"] = problems
    return report, (EXIT_NUMERICAL if problems else EXIT_OK)


def cmd_scan(cfg: ExperimentConfig) -> tuple:
    from .trial import family_scan

    P = cfg.polyhedron()
    rows = family_scan(P, cfg.s_values) if cfg.s_values else []
    if cfg.fmt == "json":
        return [{"s": s, "E": E, "eps": e} for s, E, e in rows], EXIT_OK
    lines = ["s,E,eps"] + [f"{_fmt(s)},{_fmt(E)},{_fmt(e)}" for s, E, e in rows]
    return "\n".join(lines) + "\n", EXIT_OK


def _minimize_once(cfg, P, N):
    from .grid import DescentParams, descend, init_from_field
    from .trial import build_trial_field

    field = build_trial_field(P, cfg.spec)
    g0 = init_from_field(field, N)
    params = DescentParams(max_iter=cfg.max_iter, tol=cfg.tol, seed=cfg.seed,
                           freeze_edges=cfg.freeze_edges)
    return descend(g0, params)


def cmd_minimize(cfg: ExperimentConfig) -> tuple:
    from .grid import extract_class, save_checkpoint

    if not cfg.is_prism:
        raise InvalidInputError("minimisation runs on rectangular prisms")
    if cfg.spec is None:
        raise InvalidInputError("minimisation needs a class with a corner map (h0, h1 or a 'spec' entry)")
    P = cfg.polyhedron()
    part = tangent_partition(P)
    h_req, rs, violations = _full_class(cfg, P, part)
    if violations:
        return {"error": "inadmissible class", "violations": violations}, EXIT_CONFIG
    g, trace = _minimize_once(cfg, P, cfg.grid)
    result = {"geometry": list(cfg.dims), "class": cfg.class_name or "custom", "grid": cfg.grid,
              "energy": trace.final, "iterations": g.iteration, "converged": trace.converged,
              "euler_lagrange_residual": g.euler_lagrange_residual(),
              "max_bond_jump": g.max_bond_jump()}
    if cfg.richardson:
        if cfg.grid % 2:
            raise InvalidInputError("--richardson needs an even grid")
        _, coarse = _minimize_once(cfg, P, cfg.grid // 2)
        result["coarse_energy"] = coarse.final
        result["extrapolated"] = 2 * trace.final - coarse.final
    try:
        h, residuals = extract_class(g, part)
        result["wrapping"] = h.wrapping.tolist()
        result["max_residual"] = float(residuals.max())
        preserved = bool(np.array_equal(h.wrapping, h_req.wrapping))
    except ClassAmbiguousError as exc:
        result["wrapping"] = None
        result["residuals"] = np.asarray(exc.residuals).tolist()
        preserved = False
    result["class_preserved"] = preserved
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        save_checkpoint(g, out / "checkpoint.bin", trace.final)
        (out / "trace.csv").write_text(trace.to_csv())
        (out / "result.json").write_text(dumps(result) + "\n")
    return result, (EXIT_OK if preserved else EXIT_TOPOLOGY)


def cmd_invariants(path: str, dims=None, N=None) -> tuple:
    from .grid import extract_class, grid_from_csv, load_checkpoint

    p = Path(path)
    try:
        if p.suffix.lower() == ".csv":
            if dims is None or N is None:
                raise InvalidInputError("CSV fields need --prism and --grid")
            g = grid_from_csv(p.read_text(), dims, N)
        else:
            g = load_checkpoint(p)
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc
    try:
        h, residuals = extract_class(g)
    except ClassAmbiguousError as exc:
        return {"error": "ambiguous class", "residuals": np.asarray(exc.residuals).tolist()}, EXIT_TOPOLOGY
    return {"wrapping": h.wrapping.tolist(), "residuals": residuals.tolist(),
            "max_residual": float(residuals.max())}, EXIT_OK


# --------------------------------------------------------------------------- argparse

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polyharm", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, grid_default=16, fmt="json"):
        p.add_argument("--prism", default="1,1,1", help="Lx,Ly,Lz with Lx >= Ly >= Lz")
        p.add_argument("--out", help="output file (directory for minimize)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--format", choices=("json", "csv"), default=fmt)
        p.add_argument("--grid", type=int, default=grid_default)

    b = sub.add_parser("bounds", help="lower/upper bound report for a class")
    common(b)
    b.add_argument("--vertices", help="JSON list of points (convex hull) instead of a prism")
    b.add_argument("--class", dest="cls", help="zero | h0 | h1 | class JSON file")
    b.add_argument("--chi", type=int, choices=(0, 1))

    s = sub.add_parser("scan", help="energies of the f1(s) trial family")
    common(s, fmt="csv")
    s.add_argument("--s", dest="s_range", default="0.1:0.9:0.1", help="a:b:step or comma list")

    m = sub.add_parser("minimize", help="gradient descent from a trial field")
    common(m, grid_default=24)
    m.add_argument("--class", dest="cls", help="h0 | h1 | class JSON file with a 'spec'")
    m.add_argument("--chi", type=int, choices=(0, 1))
    m.add_argument("--max-iter", type=int, default=200_000)
    m.add_argument("--tol", type=float, default=1e-9)
    m.add_argument("--freeze-edges", action="store_true")
    m.add_argument("--richardson", action="store_true", help="also run at half resolution and extrapolate")

    i = sub.add_parser("invariants", help="wrapping matrix of a stored grid field")
    i.add_argument("field", help="checkpoint file, or CSV with --prism/--grid")
    i.add_argument("--prism")
    i.add_argument("--grid", type=int)
    i.add_argument("--out")
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--format", choices=("json",), default="json")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    np.random.seed(args.seed)
    try:
        if args.command == "invariants":
            dims = parse_dims(args.prism) if args.prism else None
            result, code = cmd_invariants(args.field, dims, args.grid)
            _emit(dumps(result), args.out)
            return code
        cfg = config_from_args(args)
        if args.command == "bounds":
            result, code = cmd_bounds(cfg)
        elif args.command == "scan":
            cfg.s_values = parse_s_range(args.s_range)
            result, code = cmd_scan(cfg)
        else:
            result, code = cmd_minimize(cfg)
        # minimize writes its files into the --out directory and reports on stdout
        target = None if args.command == "minimize" else cfg.out
        _emit(result if isinstance(result, str) else dumps(result), target)
        return code
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ClassAmbiguousError, ResolutionError) as exc:
        print(f"class ambiguous: {exc}", file=sys.stderr)
        return EXIT_TOPOLOGY
    except InvalidInputError as exc:
        # unreadable field files are input failures of the invariants command
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL if args.command == "invariants" else EXIT_CONFIG
    except PolyharmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
