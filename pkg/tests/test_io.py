from __future__ import annotations

import json

import numpy as np
import pytest

from frontfill.fill import PointSet
from frontfill.io import PointsFormatError, points_header, read_points, write_json, write_points


def make_set(n, dim, rng):
    mant = rng.uniform(-1, 1, size=(n, dim))
    expo = rng.integers(-300, 300, size=(n, dim)).astype(float)
    pts = mant * 10.0**expo
    pts[0] = [5e-324] * dim  # subnormal
    pts[1] = [np.nextafter(1.0, 2.0)] * dim
    return PointSet(
        points=pts,
        thread=rng.integers(0, 16, n),
        cell=rng.integers(0, 1000, n),
        order=np.arange(n),
        seeds=pts[:1],
    )


def test_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    ps = make_set(100_000, 2, rng)
    write_points(ps, tmp_path / "p.csv")
    back = read_points(tmp_path / "p.csv")
    assert np.array_equal(back.points, ps.points)
    assert np.array_equal(back.thread, ps.thread)
    assert np.array_equal(back.cell, ps.cell)
    assert np.array_equal(back.order, ps.order)


def test_rows_follow_insertion_order(tmp_path):
    rng = np.random.default_rng(1)
    ps = make_set(50, 3, rng)
    perm = rng.permutation(50)
    shuffled = PointSet(ps.points[perm], ps.thread[perm], ps.cell[perm], ps.order[perm], ps.seeds)
    write_points(shuffled, tmp_path / "p.csv")
    back = read_points(tmp_path / "p.csv")
    assert np.array_equal(back.points, ps.points)
    assert np.array_equal(back.order, np.arange(50))


def test_gzip(tmp_path):
    rng = np.random.default_rng(2)
    ps = make_set(1000, 3, rng)
    write_points(ps, tmp_path / "a.csv.gz")
    write_points(ps, tmp_path / "b.csv.gz")
    assert (tmp_path / "a.csv.gz").read_bytes() == (tmp_path / "b.csv.gz").read_bytes()
    assert (tmp_path / "a.csv.gz").read_bytes()[:2] == b"\x1f\x8b"
    assert np.array_equal(read_points(tmp_path / "a.csv.gz").points, ps.points)


def test_headers(tmp_path):
    assert points_header(3) == ["x", "y", "z", "thread", "cell", "order"]
    assert points_header(1) == ["x", "thread", "cell", "order"]
    with pytest.raises(ValueError):
        points_header(4)
    rng = np.random.default_rng(3)
    write_points(make_set(3, 3, rng), tmp_path / "p.csv")
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "x,y,z,thread,cell,order"


def test_bad_column_reports_line(tmp_path):
    p = tmp_path / "p.csv"
    p.write_text("x,y,thread,cell,order\n0.5,1,0,0,0\n0.25,oops,0,0,1\n")
    with pytest.raises(PointsFormatError) as err:
        read_points(p)
    assert err.value.lineno == 3
    assert ":3:" in str(err.value)


def test_wrong_column_count(tmp_path):
    p = tmp_path / "p.csv"
    p.write_text("x,y,thread,cell,order\n0.5,1,0,0\n")
    with pytest.raises(PointsFormatError, match="columns"):
        read_points(p)


@pytest.mark.parametrize("head", ["", "a,b,c,d,e", "x,y,z,w,thread,cell,order"])
def test_bad_header(tmp_path, head):
    p = tmp_path / "p.csv"
    p.write_text(head + "\n")
    with pytest.raises(PointsFormatError) as err:
        read_points(p)
    assert err.value.lineno == 1


def test_empty_body(tmp_path):
    p = tmp_path / "p.csv"
    p.write_text("x,y,thread,cell,order\n")
    assert len(read_points(p)) == 0


def test_write_json(tmp_path):
    write_json({"b": 1, "a": [1.5]}, tmp_path / "s.json")
    text = (tmp_path / "s.json").read_text()
    assert json.loads(text) == {"a": [1.5], "b": 1}
    assert text.index('"a"') < text.index('"b"')
