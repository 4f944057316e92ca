from __future__ import annotations

import math

import numpy as np
import pytest

from frontfill import fill as fill_mod
from frontfill.fill import (
    FillConfig,
    FillError,
    bootstrap_seeds,
    estimate_point_count,
    fill_parallel,
    fill_sequential,
    scale_spacing_for_target,
)
from frontfill.geometry import Box, Polygon2D, boundary_sample_2d, clover2d, clover3d
from frontfill.index import StaticIndex
from frontfill.quality import verify_min_spacing
from frontfill.spacing import Constant, Expr, Preset, SpacingError


@pytest.fixture(scope="module")
def clover_h():
    return scale_spacing_for_target(clover2d(), Preset("clover2d"), 4000)


def check_invariants(ps, dom, h):
    assert dom.contains_many(ps.points).all()
    assert verify_min_spacing(ps.points, h) == []


def test_huge_spacing_gives_tiny_set():
    ps = fill_sequential(clover2d(), Constant(10.0), [(0.0, 0.0)])
    assert 1 <= len(ps) <= 3
    assert clover2d().contains_many(ps.points).all()


def test_sequential_invariants(clover_h):
    ps = fill_sequential(clover2d(), clover_h, [(0.0, 0.0)])
    assert 3000 < len(ps) < 5000
    check_invariants(ps, clover2d(), clover_h)
    assert np.array_equal(ps.order, np.arange(len(ps)))
    assert np.array_equal(ps.points[0], [0.0, 0.0])
    t = ps.threads[0]
    assert t.placed == len(ps) - 1
    assert t.expansions == len(ps)


def test_seed_outside_domain():
    with pytest.raises(FillError, match="outside"):
        fill_sequential(clover2d(), Constant(0.1), [(100.0, 100.0)])
    with pytest.raises(FillError):
        fill_sequential(clover2d(), Constant(0.1), np.zeros((0, 2)))
    with pytest.raises(FillError, match="3-D"):
        fill_sequential(clover2d(), Constant(0.1), [(0.0, 0.0, 0.0)])


def test_cap_exceeded():
    with pytest.raises(FillError, match="max_points"):
        fill_sequential(clover2d(), Constant(0.01), [(0.0, 0.0)], max_points=100)


def test_bad_spacing():
    with pytest.raises(SpacingError):
        fill_sequential(Box((-1.0, -1.0), (1.0, 1.0)), Expr("x"), [(0.5, 0.0)])


def test_sequential_is_deterministic(clover_h):
    a = fill_sequential(clover2d(), clover_h, [(0.0, 0.0)], rng_seed=7)
    b = fill_sequential(clover2d(), clover_h, [(0.0, 0.0)], rng_seed=7)
    c = fill_sequential(clover2d(), clover_h, [(0.0, 0.0)], rng_seed=8)
    assert np.array_equal(a.points, b.points)
    assert not np.array_equal(a.points[:50], c.points[:50])


def test_single_thread_parallel_matches_sequential(clover_h):
    cfg = FillConfig(threads=1, target_np=4000, bootstrap=False, rng_seed=3)
    a = fill_parallel(clover2d(), clover_h, [(0.0, 0.0)], cfg)
    b = fill_parallel(clover2d(), clover_h, [(0.0, 0.0)], cfg)
    s = fill_sequential(clover2d(), clover_h, [(0.0, 0.0)], rng_seed=3)
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.points, s.points)
    assert a.threads[0].too_close == s.threads[0].too_close
    assert a.threads[0].outside == s.threads[0].outside


def test_single_thread_with_bootstrap_is_repeatable(clover_h):
    cfg = FillConfig(threads=1, n_s=8, target_np=4000)
    a = fill_parallel(clover2d(), clover_h, [(0.0, 0.0)], cfg)
    b = fill_parallel(clover2d(), clover_h, [(0.0, 0.0)], cfg)
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.cell, b.cell)


@pytest.mark.parametrize("p", [2, 4, 8])
def test_parallel_invariants(clover_h, p):
    ps = fill_parallel(clover2d(), clover_h, [(0.0, 0.0)], FillConfig(threads=p, target_np=4000))
    check_invariants(ps, clover2d(), clover_h)
    assert len(ps.seeds) >= p
    assert np.array_equal(ps.points[: len(ps.seeds)], ps.seeds)
    assert sum(ps.per_thread_counts) == len(ps)
    assert len(ps.threads) == p
    # every point belongs to the cell of its nearest seed
    own, _ = StaticIndex(ps.seeds).nearest_many(ps.points)
    assert np.array_equal(own, ps.cell)
    assert 3000 < len(ps) < 5000


def test_parallel_3d():
    h = scale_spacing_for_target(clover3d(), Preset("clover3d"), 3000)
    ps = fill_parallel(clover3d(), h, [(0.0, 0.0, 0.0)], FillConfig(threads=4, target_np=3000))
    check_invariants(ps, clover3d(), h)


def test_coverage(clover_h):
    dom = clover2d()
    ps = fill_sequential(dom, clover_h, [(0.0, 0.0)])
    g = np.linspace(-2.5, 2.5, 150)
    probes = np.array([(x, y) for x in g for y in g])
    probes = probes[dom.contains_many(probes)]
    _, dist = StaticIndex(ps.points).nearest_many(probes)
    assert np.all(dist <= 2.5 * clover_h(probes))


def test_fixed_points():
    sq = Polygon2D(np.array([(0, 0), (1, 0), (1, 1), (0, 1)], float))
    h = Constant(0.05)
    bnd = boundary_sample_2d(sq, h)
    for ps in (
        fill_sequential(sq, h, [(0.5, 0.5)], fixed=bnd),
        fill_parallel(sq, h, [(0.5, 0.5)], FillConfig(threads=2, target_np=400), fixed=bnd),
    ):
        allp = np.vstack([ps.points, bnd])
        assert verify_min_spacing(allp, 0.05) == []
        # fixed points are not part of the output
        _, d = StaticIndex(bnd).nearest_many(ps.points)
        assert d.min() >= 0.05 * (1 - 1e-9)
        assert sq.contains_many(ps.points).all()


# -------------------------------------------------------------- estimate


def test_estimate_unit_box():
    box = Box((0.0, 0.0), (1.0, 1.0))
    h = Constant(0.015)
    est = estimate_point_count(box, h)
    actual = len(fill_sequential(box, h, [(0.5, 0.5)], max_points=10**6))
    assert abs(est - actual) <= 0.25 * actual


def test_estimate_scaling_law():
    dom = clover2d()
    a = estimate_point_count(dom, Preset("clover2d", 0.02))
    b = estimate_point_count(dom, Preset("clover2d", 0.04))
    assert abs(a / 4 - b) <= 1


def test_estimate_errors():
    with pytest.raises(ValueError):
        estimate_point_count(clover2d(), Constant(0.1), mc_samples=10)


def test_scale_for_target():
    h = scale_spacing_for_target(clover2d(), Preset("clover2d"), 2000)
    assert estimate_point_count(clover2d(), h) == pytest.approx(2000, rel=0.01)


# -------------------------------------------------------------- bootstrap


def test_bootstrap_start_factor(monkeypatch, clover_h):
    calls = []
    real = fill_mod.fill_sequential

    def spy(domain, h, seeds, **kw):
        calls.append(h.h_s)
        return real(domain, h, seeds, **kw)

    monkeypatch.setattr(fill_mod, "fill_sequential", spy)
    seeds = bootstrap_seeds(clover2d(), clover_h, [(0.0, 0.0)], 32, 4000)
    assert calls[0] / clover_h.h_s == pytest.approx(10 * math.sqrt(4000 / 32), rel=1e-12)
    assert calls[0] / clover_h.h_s == pytest.approx(111.80, abs=0.01)
    # each retry halves the factor
    for a, b in zip(calls, calls[1:]):
        assert b == pytest.approx(a / 2, rel=1e-12)
    assert 32 <= len(seeds) <= 128


def test_bootstrap_small_requests(clover_h):
    one = bootstrap_seeds(clover2d(), clover_h, [(0.0, 0.0)], 1, 4000)
    assert len(one) >= 1
    four = bootstrap_seeds(clover2d(), clover_h, [(0.0, 0.0)], 4, 4000)
    assert len(four) >= 4
    assert verify_min_spacing(four, clover_h) == []
    with pytest.raises(ValueError):
        bootstrap_seeds(clover2d(), clover_h, [(0.0, 0.0)], 0, 4000)


# -------------------------------------------------------------- config


@pytest.mark.parametrize(
    "kw", [dict(threads=0), dict(n_c=2), dict(n_s=0), dict(target_np=0)]
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        FillConfig(**kw)


def test_default_threads(monkeypatch):
    monkeypatch.delenv("FRONTFILL_THREADS", raising=False)
    assert fill_mod.default_threads() == 1
    monkeypatch.setenv("FRONTFILL_THREADS", "6")
    assert fill_mod.default_threads() == 6
    monkeypatch.setenv("FRONTFILL_THREADS", "zero")
    with pytest.raises(ValueError):
        fill_mod.default_threads()
