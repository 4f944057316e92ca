from __future__ import annotations

import csv
import io
import json

import pytest

from frontfill.bench import (
    CSV_HEADER,
    SEQUENTIAL,
    BenchReport,
    BenchRow,
    speedup_table,
    time_fill,
    write_csv,
)
from frontfill.fill import FillConfig
from frontfill.geometry import clover2d
from frontfill.spacing import Preset


def row(threads, n, per_point):
    return BenchRow(threads, n, float(n), per_point * n * 1e-9, per_point)


def test_baseline_alone_is_one():
    assert speedup_table([row(SEQUENTIAL, 1000, 5000.0)]) == [(SEQUENTIAL, 1000, 1.0)]


def test_half_time_is_double_speed():
    table = speedup_table([row(SEQUENTIAL, 1000, 5000.0), row(2, 1000, 2500.0)])
    assert table[1] == (2, 1000, 2.0)


def test_missing_baseline():
    with pytest.raises(ValueError, match="baseline"):
        speedup_table([row(SEQUENTIAL, 1000, 1.0), row(4, 4000, 1.0)])


def test_csv_layout():
    rep = BenchReport([row(SEQUENTIAL, 1000, 4000.0), row(1, 1000, 4500.0), row(2, 1000, 2000.0)], repeats=1)
    text = write_csv(rep)
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == CSV_HEADER
    assert [r[0] for r in rows[1:]] == ["1", "2"]
    assert rows[2][-1] == "2.0000"
    full = list(csv.reader(io.StringIO(write_csv(rep, include_baseline=True))))
    assert full[1][0] == "0" and full[1][-1] == "1.0000"
    assert write_csv(rep) == write_csv(rep)


def test_time_fill_rows_and_normalisation(tmp_path):
    dom = clover2d()
    rep = time_fill(dom, Preset("clover2d"), [(0.0, 0.0)], FillConfig(), threads=[1, 2, 4], targets=[1000, 2000], repeats=2)
    assert len(rep.parallel) == 3 * 2
    assert len(rep.baseline) == 2
    for r in rep.rows:
        assert r.per_point_ns == pytest.approx(r.wall_s / r.actual_np * 1e9, rel=0.05)
        assert 0.7 * r.target_np < r.actual_np < 1.3 * r.target_np
        assert r.speedup > 0
    for b in rep.baseline:
        assert b.speedup == 1.0
    write_csv(rep, tmp_path / "b.csv")
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert len(lines) == 1 + 6
    data = json.loads(rep.to_json())
    assert data["repeats"] == 2 and len(data["rows"]) == 8
    assert all(len(r["thread_busy_s"]) == max(1, r["threads"]) for r in data["rows"])


@pytest.mark.parametrize(
    "kw, msg",
    [
        (dict(threads=[]), "empty"),
        (dict(threads=[0]), "thread"),
        (dict(repeats=0), "repeats"),
        (dict(targets=None), "target"),
    ],
)
def test_time_fill_errors(kw, msg):
    args = dict(threads=[1], targets=[500], repeats=1)
    args.update(kw)
    with pytest.raises(ValueError, match=msg):
        time_fill(clover2d(), Preset("clover2d"), [(0.0, 0.0)], FillConfig(), **args)
