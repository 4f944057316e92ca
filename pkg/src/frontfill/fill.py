"""Advancing-front fills: sequential, bootstrapped seeds, and cell-parallel."""
from __future__ import annotations

import math
import os
import threading
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._native import fillcore as _fc
from ._native import kdtree as _kd
from ._native import rng as _rng
from .candidates import unit_sphere_pattern
from .geometry import Box, Domain
from .index import StaticIndex, TwoLevelIndex
from .spacing import Constant, SpacingError, SpacingFn

__all__ = [
    "FillConfig",
    "FillError",
    "PointSet",
    "ThreadStats",
    "fill_sequential",
    "fill_parallel",
    "bootstrap_seeds",
    "estimate_point_count",
    "scale_spacing_for_target",
    "packing_constant",
]

_BOOTSTRAP_FACTOR = 10.0
_MAX_HALVINGS = 32
_PILOT_SPACING = {1: 1e-4, 2: 0.02, 3: 0.08}


class FillError(RuntimeError):
    """Fill could not run or was aborted."""


@dataclass
class ThreadStats:
    expansions: int = 0
    placed: int = 0
    outside: int = 0
    too_close: int = 0
    wall_s: float = 0.0

    @property
    def rejected(self) -> int:
        return self.outside + self.too_close


@dataclass
class PointSet:
    """Generated points in insertion order with their provenance."""

    points: np.ndarray
    thread: np.ndarray
    cell: np.ndarray
    order: np.ndarray
    seeds: np.ndarray
    threads: list = field(default_factory=list)
    wall_s: float = 0.0

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def per_thread_counts(self) -> list[int]:
        n = max(len(self.threads), int(self.thread.max()) + 1 if len(self) else 0)
        return np.bincount(self.thread, minlength=n).tolist()


@dataclass
class FillConfig:
    """Parameters of a parallel fill.

    ``n_s`` defaults to ``threads``; ``target_np`` defaults to a Monte Carlo
    estimate; ``max_points`` to four times the estimate.
    """

    n_c: int = 12
    threads: int = 1
    n_s: int | None = None
    target_np: int | None = None
    rng_seed: int = 0
    max_points: int | None = None
    bootstrap: bool = True
    mc_samples: int = 20_000

    def __post_init__(self):
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")
        if self.n_c < 3:
            raise ValueError(f"n_c must be >= 3, got {self.n_c}")
        if self.n_s is not None and self.n_s < 1:
            raise ValueError(f"n_s must be >= 1, got {self.n_s}")
        if self.target_np is not None and self.target_np < 1:
            raise ValueError(f"target_np must be >= 1, got {self.target_np}")

    @property
    def seeds_requested(self) -> int:
        return self.n_s if self.n_s is not None else self.threads


def _seeds_array(domain: Domain, seeds) -> np.ndarray:
    arr = np.asarray(seeds, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.shape[0] == 0:
        raise FillError("at least one seed is required")
    if arr.shape[1] != domain.dim:
        raise FillError(f"seeds are {arr.shape[1]}-D but the domain is {domain.dim}-D")
    inside = domain.contains_many(arr)
    if not inside.all():
        bad = arr[np.argmin(inside)]
        raise FillError(f"seed {tuple(bad)} lies outside the domain")
    return np.ascontiguousarray(arr)


def _fixed_array(domain: Domain, fixed) -> np.ndarray:
    if fixed is None:
        return np.zeros((0, domain.dim))
    arr = np.asarray(fixed, dtype=np.float64).reshape(-1, domain.dim)
    if not np.all(np.isfinite(arr)):
        raise FillError("fixed points must be finite")
    return np.ascontiguousarray(arr)


def _tree_box(domain: Domain, *extra) -> np.ndarray:
    b = domain.bbox.as_array()
    for e in extra:
        if len(e):
            b[0] = np.minimum(b[0], e.min(axis=0))
            b[1] = np.maximum(b[1], e.max(axis=0))
    ext = np.maximum(b[1] - b[0], 1e-12)
    return np.array([b[0] - 1e-3 * ext, b[1] + 1e-3 * ext])


def _check_spacing(domain: Domain, h: SpacingFn, pts: np.ndarray) -> None:
    h.check_dim(domain.dim)
    vals = h(pts)
    bad = ~((vals > 0) & np.isfinite(vals))
    if bad.any():
        i = int(np.argmax(bad))
        raise SpacingError(float(vals[i]), pts[i])


def _status_error(status: int, errpt: np.ndarray, h: SpacingFn, cap: int) -> None:
    if status == _fc.BAD_SPACING:
        raise SpacingError(h.value(errpt), errpt)
    if status == _fc.CAPACITY:
        raise FillError(
            f"more than max_points={cap} points generated; spacing too small or estimate too low"
        )


def _default_cap(domain: Domain, h: SpacingFn, n_c: int) -> int:
    return 4 * estimate_point_count(domain, h, 20_000, rng_seed=0, n_c=n_c)


def fill_sequential(
    domain: Domain,
    h: SpacingFn,
    seeds,
    n_c: int = 12,
    rng_seed: int = 0,
    max_points: int | None = None,
    fixed=None,
) -> PointSet:
    """Single-front fill from ``seeds``.

    ``fixed`` points (for instance boundary nodes) take part in the
    proximity checks and are expanded like seeds, but are not returned.
    """
    seeds = _seeds_array(domain, seeds)
    fixed = _fixed_array(domain, fixed)
    _check_spacing(domain, h, seeds)
    if len(fixed):
        _check_spacing(domain, h, fixed)
    pattern = unit_sphere_pattern(domain.dim, n_c)
    cap = max_points if max_points is not None else _default_cap(domain, h, n_c)
    n_init = len(seeds) + len(fixed)
    total = max(cap, len(seeds)) + len(fixed)
    store = _kd.new_store(total, domain.dim, 1, _tree_box(domain, seeds, fixed))
    store.coords[: len(seeds)] = seeds
    store.coords[len(seeds) : n_init] = fixed
    stats = np.zeros(4, dtype=np.int64)
    errpt = np.zeros(domain.dim)
    t0 = time.perf_counter()
    count, status = _fc.fill_sequential(
        domain.packed, h.packed, pattern.dirs, store, n_init,
        _rng.new_state(rng_seed), total, stats, errpt,
    )
    wall = time.perf_counter() - t0
    _status_error(status, errpt, h, cap)
    keep = np.r_[np.arange(len(seeds)), np.arange(n_init, count)]
    n = len(keep)
    ts = ThreadStats(*(int(v) for v in stats), wall_s=wall)
    return PointSet(
        points=store.coords[keep].copy(),
        thread=np.zeros(n, dtype=np.int64),
        cell=np.zeros(n, dtype=np.int64),
        order=np.arange(n, dtype=np.int64),
        seeds=seeds.copy(),
        threads=[ts],
        wall_s=wall,
    )


@lru_cache(maxsize=None)
def packing_constant(dim: int, n_c: int = 12) -> float:
    """Points per unit of integrated h^-d, from a pilot fill of the unit box."""
    hp = _PILOT_SPACING[dim]
    box = Box((0.0,) * dim, (1.0,) * dim)
    ps = fill_sequential(box, Constant(hp), [(0.5,) * dim], n_c=n_c, rng_seed=12345, max_points=10**7)
    return len(ps) * hp**dim


def _estimate(domain: Domain, h: SpacingFn, mc_samples: int, rng_seed: int, n_c: int) -> float:
    if mc_samples < 1000:
        raise ValueError(f"mc_samples must be >= 1000, got {mc_samples}")
    box = domain.bbox
    if box.volume <= 0.0:
        raise FillError("domain bounding box has zero volume")
    rng = np.random.default_rng(rng_seed)
    pts = rng.uniform(box.lo, box.hi, size=(mc_samples, domain.dim))
    inside = pts[domain.contains_many(pts)]
    if len(inside) == 0:
        raise FillError("no Monte Carlo sample fell inside the domain")
    _check_spacing(domain, h, inside)
    integral = box.volume / mc_samples * float(np.sum(h(inside) ** (-domain.dim)))
    return packing_constant(domain.dim, n_c) * integral


def estimate_point_count(
    domain: Domain, h: SpacingFn, mc_samples: int = 20_000, rng_seed: int = 0, n_c: int = 12
) -> int:
    """Monte Carlo estimate ``c_d * integral of h^-d over the domain``."""
    return max(1, int(round(_estimate(domain, h, mc_samples, rng_seed, n_c))))


def scale_spacing_for_target(
    domain: Domain, h: SpacingFn, target: int, mc_samples: int = 20_000, n_c: int = 12
) -> SpacingFn:
    """Rescale ``h`` so that the estimated point count is about ``target``."""
    est = _estimate(domain, h, mc_samples, 0, n_c)
    return h.scaled((est / target) ** (1.0 / domain.dim))


def bootstrap_seeds(
    domain: Domain,
    h: SpacingFn,
    user_seeds,
    n_s: int,
    n_p_estimate: int,
    n_c: int = 12,
    rng_seed: int = 0,
) -> np.ndarray:
    """Seeds from coarse fills with spacing ``a*h``, halving a until at least
    ``n_s`` points appear; a starts at ``10 * (n_p / n_s)^(1/d)``."""
    if n_s < 1:
        raise ValueError(f"n_s must be >= 1, got {n_s}")
    user_seeds = _seeds_array(domain, user_seeds)
    if len(user_seeds) >= n_s:
        return user_seeds
    a = _BOOTSTRAP_FACTOR * (n_p_estimate / n_s) ** (1.0 / domain.dim)
    for _ in range(_MAX_HALVINGS + 1):
        ps = fill_sequential(
            domain, h.scaled(a), user_seeds, n_c=n_c, rng_seed=rng_seed,
            max_points=max(4 * n_s, 4 * n_p_estimate),
        )
        if len(ps) >= n_s:
            return ps.points
        a *= 0.5
    raise FillError(f"bootstrapping produced fewer than {n_s} seeds after {_MAX_HALVINGS} halvings")


def _drop_conflicting(seeds: np.ndarray, fixed: np.ndarray, h: SpacingFn) -> np.ndarray:
    """Remove seeds that would violate the spacing rule against fixed points."""
    if len(fixed) == 0:
        return seeds
    idx = StaticIndex(fixed)
    j, d = idx.nearest_many(seeds)
    ok = d >= np.minimum(h(seeds), h(fixed[j]))
    return seeds[ok]


def fill_parallel(
    domain: Domain,
    h: SpacingFn,
    user_seeds,
    cfg: FillConfig | None = None,
    fixed=None,
) -> PointSet:
    """Cell-parallel fill: bootstrap seeds, then one front per thread.

    Seeds are dealt to threads round-robin; each thread expands its own
    FIFO queue and places candidates through the locked two-level index.
    """
    cfg = cfg or FillConfig()
    user_seeds = _seeds_array(domain, user_seeds)
    fixed = _fixed_array(domain, fixed)
    _check_spacing(domain, h, user_seeds)
    est = None
    if cfg.target_np is None or cfg.max_points is None:
        est = estimate_point_count(domain, h, cfg.mc_samples, cfg.rng_seed, cfg.n_c)
    n_p = cfg.target_np if cfg.target_np is not None else est
    cap = cfg.max_points if cfg.max_points is not None else 4 * max(n_p, est)
    if cfg.bootstrap:
        seeds = bootstrap_seeds(domain, h, user_seeds, cfg.seeds_requested, n_p, cfg.n_c, cfg.rng_seed)
    else:
        seeds = user_seeds
    seeds = _drop_conflicting(seeds, fixed, h)
    if len(seeds) == 0:
        raise FillError("every seed conflicts with the fixed points")
    if len(fixed):
        _check_spacing(domain, h, fixed)

    p = cfg.threads
    tl = TwoLevelIndex(seeds, cap, _tree_box(domain, seeds, fixed), fixed)
    n_s, n_f = len(seeds), len(fixed)
    owner = np.arange(n_s) % p
    fixed_owner = owner[tl.store.cell[n_s : n_s + n_f]]
    queues = [
        np.concatenate([np.nonzero(owner == t)[0], n_s + np.nonzero(fixed_owner == t)[0]]).astype(np.int64)
        for t in range(p)
    ]
    pattern = unit_sphere_pattern(domain.dim, cfg.n_c)
    dirs = pattern.dirs
    abort = np.zeros(1, dtype=np.int64)
    stats = np.zeros((p, 4), dtype=np.int64)
    errpts = np.zeros((p, domain.dim))
    status = np.zeros(p, dtype=np.int64)
    walls = np.zeros(p)
    crashes: list = []

    def work(t: int) -> None:
        try:
            t0 = time.perf_counter()
            status[t] = _fc.parallel_worker(
                domain.packed, h.packed, dirs, tl.top, tl.store, tl.sync, tl.capacity,
                queues[t], t, _rng.new_state(cfg.rng_seed ^ t), abort, stats[t], errpts[t],
            )
            walls[t] = time.perf_counter() - t0
        except BaseException as exc:  # surfaced after join
            abort[0] = 1
            crashes.append(exc)

    t0 = time.perf_counter()
    if p == 1:
        work(0)
    else:
        workers = [threading.Thread(target=work, args=(t,), name=f"fill-{t}") for t in range(p)]
        for w in workers:
            w.start()
        for w in workers:
            w.join()
    wall = time.perf_counter() - t0
    if crashes:
        raise FillError(f"worker thread failed: {crashes[0]!r}") from crashes[0]
    for t in range(p):
        _status_error(int(status[t]), errpts[t], h, cap)

    count = tl.size
    keep = np.r_[np.arange(n_s), np.arange(n_s + n_f, count)]
    cells = tl.store.cell[keep].copy()
    threads = tl.store.thread[keep].copy()
    threads[:n_s] = owner
    return PointSet(
        points=tl.store.coords[keep].copy(),
        thread=threads,
        cell=cells,
        order=np.arange(len(keep), dtype=np.int64),
        seeds=seeds.copy(),
        threads=[ThreadStats(*(int(v) for v in stats[t]), wall_s=float(walls[t])) for t in range(p)],
        wall_s=wall,
    )


def default_threads() -> int:
    """Thread count from FRONTFILL_THREADS, else 1."""
    raw = os.environ.get("FRONTFILL_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"FRONTFILL_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"FRONTFILL_THREADS must be a positive integer, got {raw!r}")
    return n
