"""Command-line driver: ``frontfill {fill,quality,bench,solve}``.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from . import bench as _bench
from . import io as _io
from . import quality as _quality
from . import solver as _solver
from .fill import FillConfig, FillError, default_threads, fill_parallel, fill_sequential
from .geometry import (
    Box,
    Domain,
    DomainError,
    Polygon2D,
    StarPolar2D,
    StarSpherical3D,
    clover2d,
    clover3d,
    interior_point,
    load_mesh,
    load_polygon_csv,
)
from .spacing import PRESET_DIMS, PRESETS, SpacingError, SpacingFn, spacing_from_config

log = logging.getLogger("frontfill")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class ConfigError(ValueError):
    pass


_POINT = {"type": "array", "items": {"type": "number"}, "minItems": 1, "maxItems": 3}

CONFIG_SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["dim", "domain", "spacing"],
    "properties": {
        "dim": {"type": "integer", "enum": [1, 2, 3]},
        "domain": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["clover2d", "clover3d", "box", "polygon", "star2d", "star3d", "mesh"]},
                "lo": _POINT,
                "hi": _POINT,
                "vertices": {"type": "array", "items": {**_POINT, "minItems": 2, "maxItems": 2}, "minItems": 3},
                "path": {"type": "string"},
                "radius": {"type": "string"},
            },
            "additionalProperties": False,
        },
        "spacing": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["constant", "preset", "expr"]},
                "h_s": {"type": "number", "exclusiveMinimum": 0},
                "name": {"enum": list(PRESETS)},
                "src": {"type": "string"},
            },
            "additionalProperties": False,
        },
        "seeds": {"oneOf": [{"const": "auto"}, {"type": "array", "items": _POINT, "minItems": 1}]},
        "n_c": {"type": "integer", "minimum": 3},
        "threads": {"type": "integer", "minimum": 1},
        "n_s": {"type": ["integer", "null"], "minimum": 1},
        "target_np": {"type": ["integer", "null"], "minimum": 1},
        "rng_seed": {"type": "integer", "minimum": 0},
        "max_points": {"type": ["integer", "null"], "minimum": 1},
        "bootstrap": {"type": "boolean"},
        "output": {
            "type": "object",
            "properties": {"points": {"type": "string"}, "stats": {"type": "string"}},
            "additionalProperties": False,
        },
    },
}

_DOMAIN_REQUIRES = {"box": ("lo", "hi"), "star2d": ("radius",), "star3d": ("radius",), "mesh": ("path",)}


@dataclass
class RunConfig:
    dim: int
    domain: Domain
    spacing: SpacingFn
    seeds: np.ndarray
    n_c: int = 12
    threads: int | None = None
    n_s: int | None = None
    target_np: int | None = None
    rng_seed: int = 0
    max_points: int | None = None
    bootstrap: bool = True
    output: dict = field(default_factory=dict)
    base_dir: Path = Path(".")


def _path_str(path) -> str:
    parts = [str(p) for p in path]
    return ".".join(parts) if parts else "<root>"


def _build_domain(spec: dict, base: Path) -> Domain:
    kind = spec["kind"]
    for key in _DOMAIN_REQUIRES.get(kind, ()):
        if key not in spec:
            raise ConfigError(f"domain.{key}: required for domain kind {kind!r}")
    if kind == "clover2d":
        return clover2d()
    if kind == "clover3d":
        return clover3d()
    if kind == "box":
        return Box(tuple(spec["lo"]), tuple(spec["hi"]))
    if kind == "polygon":
        if "vertices" in spec:
            return Polygon2D(np.array(spec["vertices"], dtype=np.float64))
        if "path" in spec:
            return load_polygon_csv(base / spec["path"])
        raise ConfigError("domain.vertices: polygon needs 'vertices' or 'path'")
    if kind == "star2d":
        return StarPolar2D(spec["radius"])
    if kind == "star3d":
        return StarSpherical3D(spec["radius"])
    return load_mesh(base / spec["path"])


def parse_config(raw: Any, base_dir: Path = Path(".")) -> RunConfig:
    """Validate a decoded JSON config and build the run objects."""
    errors = sorted(jsonschema.Draft202012Validator(CONFIG_SCHEMA).iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(f"{_path_str(e.absolute_path)}: {e.message}")
    dim = raw["dim"]
    sp_cfg = raw["spacing"]
    if sp_cfg["kind"] == "constant" and "h_s" not in sp_cfg:
        raise ConfigError("spacing.h_s: required for constant spacing")
    if sp_cfg["kind"] == "preset" and "name" not in sp_cfg:
        raise ConfigError("spacing.name: required for preset spacing")
    if sp_cfg["kind"] == "expr" and "src" not in sp_cfg:
        raise ConfigError("spacing.src: required for expression spacing")
    try:
        domain = _build_domain(raw["domain"], base_dir)
    except (DomainError, ValueError, OSError) as exc:
        raise ConfigError(f"domain: {exc}") from None
    if domain.dim != dim:
        raise ConfigError(f"domain: {raw['domain']['kind']} is {domain.dim}-D but dim is {dim}")
    try:
        spacing = spacing_from_config(sp_cfg)
        spacing.check_dim(dim)
    except ValueError as exc:
        raise ConfigError(f"spacing: {exc}") from None
    if sp_cfg["kind"] == "preset" and PRESET_DIMS.get(sp_cfg["name"]) not in (None, dim):
        raise ConfigError(f"spacing.name: preset {sp_cfg['name']!r} is not {dim}-D")
    seeds_raw = raw.get("seeds", "auto")
    if seeds_raw == "auto":
        seeds = interior_point(domain, raw.get("rng_seed", 0))[None, :]
    else:
        for i, s in enumerate(seeds_raw):
            if len(s) != dim:
                raise ConfigError(f"seeds.{i}: expected {dim} coordinates, got {len(s)}")
        seeds = np.array(seeds_raw, dtype=np.float64)
    return RunConfig(
        dim=dim,
        domain=domain,
        spacing=spacing,
        seeds=seeds,
        n_c=raw.get("n_c", 12),
        threads=raw.get("threads"),
        n_s=raw.get("n_s"),
        target_np=raw.get("target_np"),
        rng_seed=raw.get("rng_seed", 0),
        max_points=raw.get("max_points"),
        bootstrap=raw.get("bootstrap", True),
        output=raw.get("output", {}),
        base_dir=base_dir,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_config(raw, path.parent)


# ------------------------------------------------------------ commands


def _list_of_ints(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError(f"values must be positive, got {text!r}")
    return vals


def _apply_overrides(cfg: RunConfig, args) -> None:
    if getattr(args, "seed", None) is not None:
        cfg.rng_seed = args.seed
    if getattr(args, "nc", None) is not None:
        cfg.n_c = args.nc
    if getattr(args, "ns", None) is not None:
        cfg.n_s = args.ns
    if getattr(args, "target_np", None) is not None:
        cfg.target_np = args.target_np


def _threads(cfg: RunConfig, args) -> int:
    if getattr(args, "threads", None) is not None:
        return args.threads
    if cfg.threads is not None:
        return cfg.threads
    try:
        return default_threads()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _fill_config(cfg: RunConfig, threads: int) -> FillConfig:
    try:
        return FillConfig(
            n_c=cfg.n_c, threads=threads, n_s=cfg.n_s, target_np=cfg.target_np,
            rng_seed=cfg.rng_seed, max_points=cfg.max_points, bootstrap=cfg.bootstrap,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_fill(args) -> int:
    cfg = load_config(args.config)
    _apply_overrides(cfg, args)
    threads = _threads(cfg, args)
    out = Path(args.out or cfg.output.get("points") or "points.csv")
    stats_path = Path(args.stats or cfg.output.get("stats") or out.with_name(out.name.split(".")[0] + ".stats.json"))
    if args.sequential:
        if threads != 1:
            raise ConfigError("--sequential requires a single thread")
        ps = fill_sequential(cfg.domain, cfg.spacing, cfg.seeds, cfg.n_c, cfg.rng_seed, cfg.max_points)
        mode = "sequential"
    else:
        ps = fill_parallel(cfg.domain, cfg.spacing, cfg.seeds, _fill_config(cfg, threads))
        mode = "parallel"
    _io.write_points(ps, out)
    stats = {
        "mode": mode,
        "threads": threads,
        "n_points": len(ps),
        "n_seeds": int(len(ps.seeds)),
        "per_thread_counts": ps.per_thread_counts,
        "per_thread": [
            {"placed": t.placed, "expansions": t.expansions, "rejected": t.rejected, "wall_s": t.wall_s}
            for t in ps.threads
        ],
        "wall_s": ps.wall_s,
        "rng_seed": cfg.rng_seed,
        "spacing": cfg.spacing.describe(),
    }
    _io.write_json(stats, stats_path)
    log.info("wrote %d points to %s", len(ps), out)
    return EXIT_OK


def cmd_quality(args) -> int:
    cfg = load_config(args.config)
    ps = _io.read_points(args.points)
    if ps.dim != cfg.dim:
        raise ConfigError(f"points are {ps.dim}-D but the config is {cfg.dim}-D")
    out = Path(args.out or "quality.json")
    hist = Path(args.hist or out.with_name(out.stem + "_hist.csv"))
    try:
        rep = _quality.quality_report(ps.points, cfg.domain, cfg.spacing, k=args.k, probe_density=args.probes, bins=args.bins)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rep.to_json(out)
    rep.write_histogram_csv(hist)
    print(f"mean_dbar={rep.mean_dbar:.4f} std_dbar={rep.std_dbar:.4f} spread={rep.mean_spread:.4f} gamma={rep.gamma:.4f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    _apply_overrides(cfg, args)
    if not args.threads:
        raise ConfigError("--threads: empty thread list")
    targets = args.np or ([cfg.target_np] if cfg.target_np else None)
    if not targets:
        raise ConfigError("--np: no target point counts given")
    report = _bench.time_fill(
        cfg.domain, cfg.spacing, cfg.seeds, _fill_config(cfg, 1), threads=args.threads,
        targets=targets, repeats=args.repeats,
    )
    out = Path(args.out or "bench.csv")
    _bench.write_csv(report, out)
    json_path = Path(args.json or out.with_suffix(".json"))
    json_path.write_text(report.to_json() + "\n")
    sys.stdout.write(_bench.write_csv(report, include_baseline=True))
    return EXIT_OK


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    _apply_overrides(cfg, args)
    if cfg.dim != 2:
        raise ConfigError("solve: the validation problem needs a 2-D config")
    if args.stencil < 6:
        raise ConfigError(f"--stencil: need at least 6 nodes for degree-2 augmentation, got {args.stencil}")
    targets = args.np or [1000, 4000]
    threads = _threads(cfg, args)
    rows = []
    for n in targets:
        r = _solver.run_manufactured(
            n, args.stencil, cfg.domain, cfg.spacing, threads=threads,
            parallel=not args.sequential, rng_seed=cfg.rng_seed, n_c=cfg.n_c,
        )
        rows.append(r)
    out = Path(args.out or "errors.csv")
    with open(out, "w", encoding="ascii", newline="\n") as fh:
        fh.write("N,e1,e_inf\n")
        for r in rows:
            fh.write(f"{r.n_nodes},{r.e1:.6e},{r.e_inf:.6e}\n")
    for r in rows:
        print(f"N={r.n_nodes} e1={r.e1:.3e} e_inf={r.e_inf:.3e} exactness={r.max_exactness_residual:.1e}")
    if len(rows) >= 2:
        print(f"order(e_inf)={_solver.convergence_order([r.n_nodes for r in rows], [r.e_inf for r in rows]):.2f}")
    return EXIT_OK


# ------------------------------------------------------------ parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="frontfill", description="Advancing-front node generation for meshless methods.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, threads_list=False):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output path")
        p.add_argument("--seed", type=int, help="RNG seed")
        p.add_argument("--nc", type=int, help="candidates per expansion")
        p.add_argument("--ns", type=int, help="requested seed count")
        if threads_list:
            p.add_argument("--threads", type=_list_of_ints, required=True, help="comma-separated thread counts")
        else:
            p.add_argument("--threads", type=int, help="worker threads (default FRONTFILL_THREADS or 1)")

    p = sub.add_parser("fill", help="generate a node set")
    common(p)
    p.add_argument("--target-np", type=int, help="expected point count")
    p.add_argument("--sequential", action="store_true", help="use the sequential algorithm")
    p.add_argument("--stats", help="stats JSON path")
    p.set_defaults(func=cmd_fill)

    p = sub.add_parser("quality", help="regularity and quasi-uniformity of a node set")
    p.add_argument("--config", required=True)
    p.add_argument("--points", required=True)
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--hist", help="histogram CSV path")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--probes", type=int, default=20, help="probes per node")
    p.add_argument("--bins", type=int, default=50)
    p.set_defaults(func=cmd_quality)

    p = sub.add_parser("bench", help="timing and speedup table")
    common(p, threads_list=True)
    p.add_argument("--np", type=_list_of_ints, help="comma-separated target point counts")
    p.add_argument("--target-np", type=int, help=argparse.SUPPRESS)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--json", help="JSON report path")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("solve", help="manufactured Poisson problem on generated nodes")
    common(p)
    p.add_argument("--np", type=_list_of_ints, help="comma-separated node counts per refinement")
    p.add_argument("--stencil", type=int, default=_solver.DEFAULT_STENCIL)
    p.add_argument("--sequential", action="store_true", help="generate nodes sequentially")
    p.set_defaults(func=cmd_solve)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    if getattr(args, "repeats", 1) < 1:
        print("frontfill: error: --repeats must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"frontfill: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FillError, SpacingError, DomainError, _solver.SolverError, _io.PointsFormatError,
            ValueError, ArithmeticError, OSError, np.linalg.LinAlgError) as exc:
        print(f"frontfill: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
