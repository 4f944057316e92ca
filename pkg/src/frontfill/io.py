"""Point-set CSV files: ``x,y[,z],thread,cell,order`` with 17-digit floats.

Paths ending in ``.gz`` are read and written gzip-compressed.
"""
from __future__ import annotations

import gzip
import io as _io
import json
from pathlib import Path

import numpy as np

from .fill import PointSet

__all__ = ["PointsFormatError", "write_points", "read_points", "write_json", "points_header"]

_AXES = ("x", "y", "z")
_PROVENANCE = ("thread", "cell", "order")


class PointsFormatError(ValueError):
    def __init__(self, path, lineno: int, message: str):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


def points_header(dim: int) -> list[str]:
    if dim not in (1, 2, 3):
        raise ValueError(f"unsupported dimension {dim}")
    return [*_AXES[:dim], *_PROVENANCE]


def _open(path, mode: str):
    path = Path(path)
    if path.suffix == ".gz":
        # fixed mtime keeps compressed output byte-identical across runs
        raw = open(path, mode.replace("t", "") + "b")
        gz = gzip.GzipFile(filename="", mode=mode[0] + "b", fileobj=raw, mtime=0)
        return _io.TextIOWrapper(gz, encoding="ascii", newline="\n"), raw
    return open(path, mode, encoding="ascii", newline="\n"), None


def write_points(ps: PointSet, path) -> None:
    """Write rows sorted by insertion order."""
    order = np.argsort(ps.order, kind="stable")
    fh, raw = _open(path, "wt")
    try:
        fh.write(",".join(points_header(ps.dim)) + "\n")
        pts = ps.points[order]
        prov = np.stack([ps.thread[order], ps.cell[order], ps.order[order]], axis=1)
        for p, q in zip(pts.tolist(), prov.tolist()):
            fh.write(",".join(format(v, ".17g") for v in p))
            fh.write(",%d,%d,%d\n" % tuple(q))
    finally:
        fh.close()
        if raw is not None:
            raw.close()


def read_points(path) -> PointSet:
    fh, raw = _open(path, "rt")
    try:
        lines = fh.read().split("\n")
    finally:
        fh.close()
        if raw is not None:
            raw.close()
    if not lines or not lines[0].strip():
        raise PointsFormatError(path, 1, "missing header")
    header = lines[0].strip().split(",")
    dim = len(header) - 3
    if dim not in (1, 2, 3) or header != points_header(dim):
        raise PointsFormatError(path, 1, f"unexpected header {lines[0].strip()!r}")
    ncol = dim + 3
    coords = []
    prov = []
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != ncol:
            raise PointsFormatError(path, lineno, f"expected {ncol} columns, got {len(cells)}")
        try:
            coords.append([float(c) for c in cells[:dim]])
            prov.append([int(c) for c in cells[dim:]])
        except ValueError as exc:
            raise PointsFormatError(path, lineno, str(exc)) from None
    pts = np.array(coords, dtype=np.float64).reshape(-1, dim)
    pv = np.array(prov, dtype=np.int64).reshape(-1, 3)
    return PointSet(
        points=pts,
        thread=pv[:, 0].copy(),
        cell=pv[:, 1].copy(),
        order=pv[:, 2].copy(),
        seeds=np.zeros((0, dim)),
    )


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
