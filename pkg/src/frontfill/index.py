"""Spatial indexes: static k-d tree, insertable k-d tree, and the two-level
concurrent index used by the parallel fill."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._native import atomics as _at
from ._native import fillcore as _fc
from ._native import kdtree as _kd

__all__ = [
    "StaticIndex",
    "DynamicIndex",
    "TwoLevelIndex",
    "Accepted",
    "Rejected",
    "build_static",
    "nearest",
    "knn",
    "involved_cells",
    "guarded_try_place",
    "flatten",
]


def _points(points, name="points") -> np.ndarray:
    arr = np.ascontiguousarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty (n, d) array")
    return arr


def _query(q, dim: int) -> np.ndarray:
    q = np.ascontiguousarray(q, dtype=np.float64).reshape(-1)
    if q.shape[0] != dim:
        raise ValueError(f"query has dimension {q.shape[0]}, index has {dim}")
    return q


class StaticIndex:
    """Balanced k-d tree built once; ties resolve to the lower input index."""

    def __init__(self, points):
        self.points = _points(points)
        self.tree = _kd.build_static(self.points)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def nearest(self, q) -> tuple[int, float]:
        i, d2 = _kd.static_nearest(self.tree, _query(q, self.dim))
        return int(i), math.sqrt(d2)

    def knn(self, q, k: int) -> list[tuple[int, float]]:
        idx, dist = self.knn_many(_query(q, self.dim)[None, :], k)
        return [(int(i), float(d)) for i, d in zip(idx[0], dist[0])]

    def nearest_many(self, qs) -> tuple[np.ndarray, np.ndarray]:
        qs = np.ascontiguousarray(qs, dtype=np.float64).reshape(-1, self.dim)
        idx = np.empty(len(qs), dtype=np.int64)
        d2 = np.empty(len(qs))
        _kd.static_nearest_many(self.tree, qs, idx, d2)
        return idx, np.sqrt(d2)

    def knn_many(self, qs, k: int) -> tuple[np.ndarray, np.ndarray]:
        """(n, k) neighbour indices and distances, ascending per row."""
        if not 1 <= k <= len(self):
            raise ValueError(f"k must be in [1, {len(self)}], got {k}")
        qs = np.ascontiguousarray(qs, dtype=np.float64).reshape(-1, self.dim)
        idx = np.empty((len(qs), k), dtype=np.int64)
        d2 = np.empty((len(qs), k))
        _kd.static_knn_many(self.tree, qs, k, idx, d2)
        return idx, np.sqrt(d2)

    def radius(self, q, r: float) -> np.ndarray:
        """Indices within distance r (inclusive), ascending."""
        q = _query(q, self.dim)
        out = np.empty(len(self), dtype=np.int64)
        m = _kd.static_radius(self.tree, q, r * r, out)
        return np.sort(out[:m])


class DynamicIndex:
    """Insert-only k-d tree. ``box`` should enclose the points to come; it
    only affects tree shape, never results. Default box is [-1, 1]^d."""

    def __init__(self, dim: int, box=None, capacity: int = 1024):
        self.dim = dim
        self._box = None if box is None else np.asarray(box, dtype=np.float64).reshape(2, dim)
        self._n = 0
        self._store = _kd.new_store(capacity, dim, 1, self._box)

    def __len__(self) -> int:
        return self._n

    @property
    def points(self) -> np.ndarray:
        return self._store.coords[: self._n].copy()

    def _grow(self):
        old = self._store
        self._store = _kd.new_store(2 * old.coords.shape[0], self.dim, 1, self._box)
        self._store.coords[: self._n] = old.coords[: self._n]
        if _kd.dyn_insert_many(self._store, 0, 0, self._n) != self._n:
            raise RuntimeError("dynamic index node pool exhausted")

    def insert(self, p) -> int:
        p = _query(p, self.dim)
        if self._n == self._store.coords.shape[0]:
            self._grow()
        self._store.coords[self._n] = p
        if not _kd.dyn_insert(self._store, 0, self._n):
            raise RuntimeError("cannot insert point: tree depth limit reached (too many identical points?)")
        self._n += 1
        return self._n - 1

    def nearest(self, q) -> tuple[int, float]:
        if self._n == 0:
            raise ValueError("nearest() on an empty index")
        i, d2 = _kd.dyn_nearest_one(self._store, 0, _query(q, self.dim))
        return int(i), math.sqrt(d2)


@dataclass(frozen=True)
class Accepted:
    cell: int
    slot: int


@dataclass(frozen=True)
class Rejected:
    distance: float


class TwoLevelIndex:
    """Read-only seed index over per-cell insertable trees, one lock per cell.

    Seeds occupy slots ``[0, n_s)``; optional fixed points follow and are
    linked into the cell of their nearest seed. Every later slot is taken by
    an accepted placement, so slot numbers give the global insertion order.
    """

    def __init__(self, seeds, capacity: int, box=None, fixed=None):
        seeds = _points(seeds, "seeds")
        self.n_seeds, self.dim = seeds.shape
        fixed = np.zeros((0, self.dim)) if fixed is None else np.asarray(fixed, dtype=np.float64).reshape(-1, self.dim)
        self.n_fixed = len(fixed)
        self.top = _kd.build_static(seeds)
        base = self.n_seeds + self.n_fixed
        self.capacity = base + int(capacity)
        if box is None:
            allp = np.vstack([seeds, fixed])
            lo, hi = allp.min(axis=0), allp.max(axis=0)
            ext = np.maximum(hi - lo, 1.0)
            box = np.array([lo - ext, hi + ext])
        self.store = _kd.new_store(self.capacity, self.dim, self.n_seeds, box)
        self.store.coords[: self.n_seeds] = seeds
        self.store.coords[self.n_seeds : base] = fixed
        self.sync = _fc.Sync(
            _at.new_lock_array(self.n_seeds),
            np.zeros(self.n_seeds, dtype=np.int64),
            np.array([base], dtype=np.int64),
            np.zeros(4, dtype=np.int64),
        )
        if not _fc.setup_cells(self.top, self.store, self.n_seeds, self.n_fixed):
            raise RuntimeError("could not index fixed points (duplicates?)")

    @property
    def seeds(self) -> np.ndarray:
        return self.store.coords[: self.n_seeds]

    @property
    def size(self) -> int:
        """Number of used slots (seeds, fixed points and placements)."""
        return int(min(self.sync.counter[0], self.capacity))

    @property
    def lock_order_violations(self) -> int:
        return int(self.sync.diag[0])

    @property
    def contention(self) -> np.ndarray:
        """Per-cell count of lock acquisitions that found the lock taken."""
        return self.sync.contention.copy()

    def involved_cells(self, c, r: float) -> list[int]:
        c = _query(c, self.dim)
        out = np.empty(self.n_seeds, dtype=np.int64)
        m, _, _ = _fc.involved_cells(self.top, c, float(r), out)
        return [int(j) for j in out[:m]]

    def place_many(self, cands, radii, tid: int = 0):
        """Try each candidate in turn; returns (codes, cells, distances) where
        a non-negative code is the slot of an accepted candidate."""
        cands = np.ascontiguousarray(cands, dtype=np.float64).reshape(-1, self.dim)
        radii = np.ascontiguousarray(np.broadcast_to(radii, (len(cands),)), dtype=np.float64)
        codes = np.empty(len(cands), dtype=np.int64)
        cells = np.empty(len(cands), dtype=np.int64)
        d2 = np.empty(len(cands))
        _fc.place_many(self.top, self.store, self.sync, self.capacity, cands, radii, tid, codes, cells, d2)
        if np.any(codes == _fc.FULL):
            raise RuntimeError(f"index capacity of {self.capacity} slots exhausted")
        return codes, cells, np.sqrt(d2)

    def guarded_try_place(self, c, r: float, tid: int = 0) -> Accepted | Rejected:
        if not r > 0:
            raise ValueError(f"radius must be positive, got {r}")
        codes, cells, dist = self.place_many(_query(c, self.dim)[None, :], [r], tid)
        if codes[0] >= 0:
            return Accepted(int(cells[0]), int(codes[0]))
        return Rejected(float(dist[0]))

    def slots(self) -> np.ndarray:
        """Slots of seeds and stored points in insertion order."""
        n = self.size
        out = np.empty(n, dtype=np.int64)
        out[: self.n_seeds] = np.arange(self.n_seeds)
        end = self.n_seeds
        for j in range(self.n_seeds):
            end = _kd.dyn_collect(self.store, j, out, end)
        return np.sort(out[:end])

    def cell_points(self, j: int) -> np.ndarray:
        out = np.empty(self.size, dtype=np.int64)
        end = _kd.dyn_collect(self.store, j, out, 0)
        return self.store.coords[np.sort(out[:end])]

    def flatten(self) -> StaticIndex:
        """Static index over seeds and all cell contents (requires quiescence)."""
        return StaticIndex(self.store.coords[self.slots()])


def build_static(points) -> StaticIndex:
    return StaticIndex(points)


def nearest(index, q) -> tuple[int, float]:
    return index.nearest(q)


def knn(index: StaticIndex, q, k: int) -> list[tuple[int, float]]:
    return index.knn(q, k)


def involved_cells(tl: TwoLevelIndex, c, r: float) -> list[int]:
    return tl.involved_cells(c, r)


def guarded_try_place(tl: TwoLevelIndex, c, r: float, tid: int = 0) -> Accepted | Rejected:
    return tl.guarded_try_place(c, r, tid)


def flatten(tl: TwoLevelIndex) -> StaticIndex:
    return tl.flatten()
