"""Timing harness: per-point normalized times and speedups over threads."""
from __future__ import annotations

import csv
import io as _io
import json
import statistics
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .fill import FillConfig, fill_parallel, fill_sequential, scale_spacing_for_target
from .geometry import Domain
from .spacing import SpacingFn

__all__ = ["BenchRow", "BenchReport", "time_fill", "speedup_table", "write_csv", "CSV_HEADER"]

CSV_HEADER = ("threads", "target_np", "actual_np", "wall_s", "per_point_ns", "speedup")

# threads value used for the sequential baseline rows
SEQUENTIAL = 0


@dataclass
class BenchRow:
    threads: int
    target_np: int
    actual_np: float
    wall_s: float
    per_point_ns: float
    thread_busy_s: list = field(default_factory=list)
    wall_cv: float = 0.0
    speedup: float | None = None

    @property
    def is_baseline(self) -> bool:
        return self.threads == SEQUENTIAL


@dataclass
class BenchReport:
    rows: list[BenchRow]
    repeats: int

    @property
    def baseline(self) -> list[BenchRow]:
        return [r for r in self.rows if r.is_baseline]

    @property
    def parallel(self) -> list[BenchRow]:
        return [r for r in self.rows if not r.is_baseline]

    def to_json(self) -> str:
        return json.dumps({"repeats": self.repeats, "rows": [asdict(r) for r in self.rows]}, indent=2)


def _summarize(threads: int, target: int, runs: list[tuple[float, int, list]]) -> BenchRow:
    walls = [w for w, _, _ in runs]
    counts = [n for _, n, _ in runs]
    per_point = [w / n * 1e9 for w, n, _ in runs]
    busy = np.mean(np.array([b for _, _, b in runs], dtype=np.float64), axis=0).tolist()
    mean_wall = statistics.fmean(walls)
    cv = statistics.pstdev(walls) / mean_wall if len(walls) > 1 and mean_wall > 0 else 0.0
    return BenchRow(
        threads=threads,
        target_np=target,
        actual_np=statistics.fmean(counts),
        wall_s=mean_wall,
        per_point_ns=statistics.fmean(per_point),
        thread_busy_s=busy,
        wall_cv=cv,
    )


def time_fill(
    domain: Domain,
    h: SpacingFn,
    seeds,
    cfg: FillConfig | None = None,
    threads: Sequence[int] = (1,),
    targets: Sequence[int] | None = None,
    repeats: int = 1,
    scale_to_target: bool = True,
) -> BenchReport:
    """Time the sequential baseline and the parallel fill at each thread count.

    With ``scale_to_target`` the spacing is rescaled so each run aims at the
    requested point count; otherwise ``h`` is used as given and the target is
    only the estimate fed to the parallel fill.
    """
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    if not threads:
        raise ValueError("threads list is empty")
    if any(int(t) < 1 for t in threads):
        raise ValueError(f"thread counts must be >= 1, got {list(threads)}")
    cfg = cfg or FillConfig()
    if targets is None:
        if cfg.target_np is None:
            raise ValueError("no target point count given")
        targets = [cfg.target_np]
    if not targets:
        raise ValueError("target list is empty")

    rows: list[BenchRow] = []
    for target in targets:
        target = int(target)
        hh = scale_spacing_for_target(domain, h, target, n_c=cfg.n_c) if scale_to_target else h
        cap = cfg.max_points or 4 * target
        runs = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            ps = fill_sequential(domain, hh, seeds, n_c=cfg.n_c, rng_seed=cfg.rng_seed, max_points=cap)
            wall = time.perf_counter() - t0
            runs.append((wall, len(ps), [ps.threads[0].wall_s]))
        base = _summarize(SEQUENTIAL, target, runs)
        base.speedup = 1.0
        rows.append(base)
        for p in threads:
            pc = replace(cfg, threads=int(p), target_np=target, max_points=cap)
            runs = []
            for _ in range(repeats):
                t0 = time.perf_counter()
                ps = fill_parallel(domain, hh, seeds, pc)
                wall = time.perf_counter() - t0
                runs.append((wall, len(ps), [t.wall_s for t in ps.threads]))
            row = _summarize(int(p), target, runs)
            row.speedup = base.per_point_ns / row.per_point_ns
            rows.append(row)
    return BenchReport(rows, repeats)


def speedup_table(rows: Sequence[BenchRow]) -> list[tuple[int, int, float]]:
    """(threads, target_np, speedup) per row, relative to the sequential row
    with the same target; the baseline itself maps to 1.0."""
    base = {r.target_np: r for r in rows if r.is_baseline}
    out = []
    for r in rows:
        b = base.get(r.target_np)
        if b is None:
            raise ValueError(f"no sequential baseline row for target_np={r.target_np}")
        out.append((r.threads, r.target_np, b.per_point_ns / r.per_point_ns))
    return out


def write_csv(report: BenchReport, path=None, include_baseline: bool = False) -> str:
    """CSV with the fixed header; baseline rows (threads=0) only on request."""
    rows = report.rows if include_baseline else report.parallel
    table = speedup_table(report.baseline + [r for r in rows if not r.is_baseline])
    speed = {(t, n): s for t, n, s in table}
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([
            r.threads, r.target_np, f"{r.actual_np:.1f}", f"{r.wall_s:.6f}",
            f"{r.per_point_ns:.1f}", f"{speed[(r.threads, r.target_np)]:.4f}",
        ])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    return text
