from __future__ import annotations

import json
import math

import numpy as np
import pytest

from frontfill.fill import fill_sequential, scale_spacing_for_target
from frontfill.geometry import Box, clover2d
from frontfill.quality import (
    BRUTE_FORCE_LIMIT,
    histogram,
    neighbor_distance_stats,
    neighbor_distances,
    quality_report,
    quasi_uniformity,
    verify_min_spacing,
)
from frontfill.spacing import Constant, Preset


def brute_pairs(pts, hv):
    d = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    lim = np.minimum(hv[:, None], hv[None]) * (1 - 1e-9)
    i, j = np.nonzero(d < lim)
    return sorted((a, b) for a, b in zip(i.tolist(), j.tolist()) if a < b)


def test_lattice_1d():
    pts = np.arange(20.0)[:, None] * 0.3
    rep = neighbor_distance_stats(pts, 0.3, k=2)
    # end points see a second neighbour at 2h
    inner = neighbor_distances(pts, 0.3, k=2)[1:-1]
    np.testing.assert_allclose(inner, 1.0, rtol=1e-12)
    assert rep.k == 2 and rep.n == 20


def test_lattice_1d_periodic_like():
    # three collinear points with k=2 from the middle point only
    dn = neighbor_distances(np.array([[0.0], [1.0], [2.0]]), 1.0, k=2)
    assert dn[1].tolist() == [1.0, 1.0]


def test_duplicate_points_keep_self_excluded():
    dn = neighbor_distances(np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]), 1.0, k=1)
    assert dn.ravel().tolist() == [0.0, 0.0, 1.0]


def test_k_must_be_below_n():
    with pytest.raises(ValueError):
        neighbor_distances(np.zeros((5, 2)), 1.0, k=5)
    with pytest.raises(ValueError):
        neighbor_distances(np.zeros((5, 2)), 1.0, k=0)


def test_stats_match_direct_computation():
    rng = np.random.default_rng(0)
    pts = rng.uniform(size=(300, 2))
    h = Preset("clover2d", 0.05)
    rep = neighbor_distance_stats(pts, h, k=4)
    d = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    np.fill_diagonal(d, np.inf)
    dn = np.sort(d, axis=1)[:, :4] / h(pts)[:, None]
    assert rep.mean_dbar == pytest.approx(dn.mean(axis=1).mean(), rel=1e-12)
    assert rep.std_dbar == pytest.approx(dn.mean(axis=1).std(), rel=1e-12)
    assert rep.mean_spread == pytest.approx((dn.max(axis=1) - dn.min(axis=1)).mean(), rel=1e-12)


def test_histogram_lattice_and_counts():
    g = np.arange(10.0)
    pts = np.array([(x, y) for x in g for y in g])
    edges, counts = histogram(pts[:, :1][::10], 1.0, k=1, bins=5)
    assert counts.sum() == 10
    assert counts.max() == 10
    hit = np.argmax(counts)
    assert edges[hit] <= 1.0 <= edges[hit + 1]
    rng = np.random.default_rng(1)
    edges, counts = histogram(rng.uniform(size=(200, 2)), 0.1, k=3, bins=7)
    assert counts.sum() == 600 and len(edges) == 8
    with pytest.raises(ValueError):
        histogram(pts, 1.0, bins=1)


def test_square_lattice_quasi_uniformity():
    hs = 0.05
    g = np.linspace(0.0, 1.0, 21)
    pts = np.array([(x, y) for x in g for y in g])
    fill, sep, gamma = quasi_uniformity(pts, Box((0.0, 0.0), (1.0, 1.0)), hs, probe_density=50)
    assert sep == pytest.approx(1.0, rel=1e-9)
    assert math.sqrt(2) * 0.97 <= fill <= math.sqrt(2) + 1e-12
    assert gamma == pytest.approx(fill / sep)


def test_fill_distance_monotone_in_probes():
    rng = np.random.default_rng(2)
    pts = rng.uniform(size=(200, 2))
    box = Box((0.0, 0.0), (1.0, 1.0))
    prev = 0.0
    for dens in (10, 20, 40, 80):
        fill, _, _ = quasi_uniformity(pts, box, 0.05, probe_density=dens)
        assert fill >= prev
        prev = fill


def test_quasi_uniformity_errors():
    box = Box((0.0, 0.0), (1.0, 1.0))
    with pytest.raises(ValueError):
        quasi_uniformity(np.array([[0.5, 0.5]]), box, 0.1)
    with pytest.raises(ValueError):
        quasi_uniformity(np.array([[0.5, 0.5], [0.1, 0.1]]), box, 0.1, probe_density=5)


def test_gamma_at_least_one_on_fill():
    dom = clover2d()
    h = scale_spacing_for_target(dom, Preset("clover2d"), 2000)
    ps = fill_sequential(dom, h, [(0.0, 0.0)])
    _, _, gamma = quasi_uniformity(ps.points, dom, h)
    assert gamma >= 1.0


def test_verify_examples():
    assert verify_min_spacing(np.array([(0.0, 0.0), (0.1, 0.0)]), 1.0) == [(0, 1)]
    assert verify_min_spacing(np.zeros((0, 2)), 1.0) == []
    assert verify_min_spacing(np.array([(0.0, 0.0), (1.0, 0.0)]), 1.0) == []


def test_verify_uses_smaller_radius():
    pts = np.array([(0.0, 0.0), (0.5, 0.0)])
    assert verify_min_spacing(pts, np.array([1.0, 0.4])) == []
    assert verify_min_spacing(pts, np.array([1.0, 0.6])) == [(0, 1)]


def test_verify_paths_agree():
    # brute-force path against the tree path on a set above the cutoff
    rng = np.random.default_rng(3)
    n = BRUTE_FORCE_LIMIT + 500
    pts = rng.uniform(size=(n, 2))
    hv = rng.uniform(0.001, 0.004, size=n)
    tree = verify_min_spacing(pts, hv)
    sub = verify_min_spacing(pts[:3000], hv[:3000])
    assert sub == brute_pairs(pts[:3000], hv[:3000])
    assert [p for p in tree if p[1] < 3000] == sub
    assert len(tree) > len(sub)


def test_verify_rejects_bad_spacing():
    with pytest.raises(ValueError):
        verify_min_spacing(np.zeros((3, 2)), 0.0)


def test_report_json_and_histogram_csv(tmp_path):
    rng = np.random.default_rng(4)
    pts = rng.uniform(size=(100, 2))
    rep = quality_report(pts, Box((0.0, 0.0), (1.0, 1.0)), Constant(0.1), bins=10)
    data = json.loads(rep.to_json(tmp_path / "q.json"))
    assert data["k"] == 5 and len(data["hist_counts"]) == 10
    assert sum(data["hist_counts"]) == 500
    assert rep.gamma == pytest.approx(rep.h_fill_norm / rep.s_sep_norm)
    rep.write_histogram_csv(tmp_path / "h.csv")
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "bin_center,count" and len(lines) == 11
