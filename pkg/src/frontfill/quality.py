"""Local regularity and quasi-uniformity of node sets."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ._native import metrics as _m
from .geometry import Domain
from .index import StaticIndex

__all__ = [
    "QualityReport",
    "neighbor_distances",
    "neighbor_distance_stats",
    "histogram",
    "quasi_uniformity",
    "verify_min_spacing",
    "quality_report",
]

BRUTE_FORCE_LIMIT = 20_000
_SPACING_SLACK = 1.0 - 1e-9


def _spacings(points: np.ndarray, h) -> np.ndarray:
    if callable(h):
        hv = np.asarray(h(points), dtype=np.float64).reshape(-1)
    else:
        hv = np.broadcast_to(np.asarray(h, dtype=np.float64), (len(points),)).copy()
    if hv.shape[0] != len(points):
        raise ValueError("spacing values do not match the number of points")
    if not np.all((hv > 0) & np.isfinite(hv)):
        raise ValueError("spacing must be positive and finite at every point")
    return hv


def _as_points(points) -> np.ndarray:
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    return pts


@dataclass
class QualityReport:
    k: int
    n: int
    mean_dbar: float
    std_dbar: float
    mean_spread: float
    hist_edges: list = field(default_factory=list)
    hist_counts: list = field(default_factory=list)
    h_fill_norm: float | None = None
    s_sep_norm: float | None = None
    gamma: float | None = None

    def to_json(self, path=None) -> str:
        text = json.dumps(asdict(self), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    def write_histogram_csv(self, path) -> None:
        """Two columns: bin centre and count."""
        edges = np.asarray(self.hist_edges)
        centres = 0.5 * (edges[:-1] + edges[1:])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_center", "count"])
            for c, n in zip(centres, self.hist_counts):
                w.writerow([repr(float(c)), int(n)])


def neighbor_distances(points, h, k: int = 5) -> np.ndarray:
    """(N, k) distances to the k nearest other points, divided by h(p_i)."""
    pts = _as_points(points)
    n = len(pts)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k >= n:
        raise ValueError(f"k={k} needs more than {n} points")
    hv = _spacings(pts, h)
    idx, dist = StaticIndex(pts).knn_many(pts, k + 1)
    # drop the query point itself; with duplicates it may not come first
    own = idx == np.arange(n)[:, None]
    drop = np.where(own.any(axis=1), own.argmax(axis=1), k)
    keep = np.ones_like(own)
    keep[np.arange(n), drop] = False
    return dist[keep].reshape(n, k) / hv[:, None]


def neighbor_distance_stats(points, h, k: int = 5) -> QualityReport:
    dn = neighbor_distances(points, h, k)
    dbar = dn.mean(axis=1)
    spread = dn.max(axis=1) - dn.min(axis=1)
    return QualityReport(
        k=k,
        n=len(dn),
        mean_dbar=float(dbar.mean()),
        std_dbar=float(dbar.std()),
        mean_spread=float(spread.mean()),
    )


def histogram(points, h, k: int = 5, bins: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Equal-width histogram of all N*k normalised neighbour distances."""
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    dn = neighbor_distances(points, h, k).ravel()
    counts, edges = np.histogram(dn, bins=bins)
    return edges, counts


def _probes(domain: Domain, count: int, rng_seed: int) -> np.ndarray:
    """First ``count`` in-domain points of a fixed uniform stream, so that
    smaller probe sets are prefixes of larger ones."""
    box = domain.bbox
    rng = np.random.default_rng(rng_seed)
    chunks = []
    have = 0
    drawn = 0
    batch = 65_536
    while have < count:
        pts = rng.uniform(box.lo, box.hi, size=(batch, domain.dim))
        pts = pts[domain.contains_many(pts)]
        chunks.append(pts)
        have += len(pts)
        drawn += batch
        if have == 0 and drawn >= 100 * batch:
            raise ValueError("no probe fell inside the domain")
    return np.concatenate(chunks)[:count]


def quasi_uniformity(
    points, domain: Domain, h, probe_density: int = 20, rng_seed: int = 0
) -> tuple[float, float, float]:
    """(h_fill_norm, s_sep_norm, gamma).

    Separation is the exact nearest-neighbour distance. The fill distance at
    a node is twice the largest distance from the node to a probe whose
    nearest node it is; both are divided by h at the node.
    """
    pts = _as_points(points)
    n = len(pts)
    if n < 2:
        raise ValueError("quasi-uniformity needs at least two points")
    if probe_density < 10:
        raise ValueError(f"probe_density must be >= 10, got {probe_density}")
    hv = _spacings(pts, h)
    index = StaticIndex(pts)
    _, nn = index.knn_many(pts, 2)
    s_norm = nn[:, 1] / hv
    probes = _probes(domain, probe_density * n, rng_seed)
    owner, dist = index.nearest_many(probes)
    far, hit = _m.farthest_probe(owner, dist, n)
    fill_norm = 2.0 * far[hit] / hv[hit]
    h_fill = float(fill_norm.max())
    s_sep = float(s_norm.min())
    if s_sep == 0.0:
        return h_fill, s_sep, math.inf
    return h_fill, s_sep, h_fill / s_sep


def verify_min_spacing(points, h) -> list[tuple[int, int]]:
    """Pairs (i, j), i < j, closer than min(h_i, h_j) up to 1e-9 relative."""
    pts = _as_points(points)
    n = len(pts)
    if n < 2:
        return []
    hv = _spacings(pts, h)
    if n <= BRUTE_FORCE_LIMIT:
        found = []
        block = max(1, 4_000_000 // n)
        for a in range(0, n, block):
            b = min(n, a + block)
            diff = pts[a:b, None, :] - pts[None, :, :]
            d2 = np.einsum("ijk,ijk->ij", diff, diff)
            lim = np.minimum(hv[a:b, None], hv[None, :]) * _SPACING_SLACK
            bad = d2 < lim * lim
            ii, jj = np.nonzero(bad)
            ii = ii + a
            sel = jj > ii
            found.extend(zip(ii[sel].tolist(), jj[sel].tolist()))
        return sorted(found)
    pairs = _m.spacing_violations(StaticIndex(pts).tree, pts, hv, _SPACING_SLACK)
    return sorted(map(tuple, pairs.tolist()))


def quality_report(
    points, domain: Domain, h, k: int = 5, probe_density: int = 20, bins: int = 50, rng_seed: int = 0
) -> QualityReport:
    rep = neighbor_distance_stats(points, h, k)
    edges, counts = histogram(points, h, k, bins)
    rep.hist_edges = edges.tolist()
    rep.hist_counts = counts.tolist()
    rep.h_fill_norm, rep.s_sep_norm, rep.gamma = quasi_uniformity(points, domain, h, probe_density, rng_seed)
    return rep
