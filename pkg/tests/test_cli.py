from __future__ import annotations

import json

import numpy as np
import pytest

from frontfill.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main, parse_config
from frontfill.cli import ConfigError
from frontfill.io import read_points
from frontfill.quality import verify_min_spacing


def write_config(tmp_path, **over):
    cfg = {
        "dim": 2,
        "domain": {"kind": "clover2d"},
        "spacing": {"kind": "preset", "name": "clover2d", "h_s": 0.05},
        "seeds": [[0.0, 0.0]],
        "rng_seed": 5,
    }
    cfg.update(over)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    return path


def test_fill_writes_points_and_stats(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "pts.csv"
    assert main(["fill", "--config", str(cfg), "--out", str(out), "--threads", "4"]) == EXIT_OK
    ps = read_points(out)
    stats = json.loads((tmp_path / "pts.stats.json").read_text())
    assert stats["n_points"] == len(ps)
    assert stats["threads"] == 4 and len(stats["per_thread_counts"]) == 4
    assert sum(stats["per_thread_counts"]) == len(ps)
    assert stats["n_seeds"] >= 4
    h = parse_config(json.loads(cfg.read_text()), tmp_path).spacing
    assert verify_min_spacing(ps.points, h) == []


@pytest.mark.parametrize("extra", [[], ["--sequential"]])
def test_single_thread_runs_are_byte_identical(tmp_path, extra):
    cfg = write_config(tmp_path)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert main(["fill", "--config", str(cfg), "--out", str(out), "--threads", "1", *extra]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_env_threads(tmp_path, monkeypatch):
    cfg = write_config(tmp_path)
    monkeypatch.setenv("FRONTFILL_THREADS", "2")
    assert main(["fill", "--config", str(cfg), "--out", str(tmp_path / "p.csv")]) == EXIT_OK
    assert json.loads((tmp_path / "p.stats.json").read_text())["threads"] == 2


def test_malformed_json(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"dim": 2,\n "domain": }')
    assert main(["fill", "--config", str(bad)]) == EXIT_CONFIG
    assert "line 2" in capsys.readouterr().err


def test_schema_error_names_field(tmp_path, capsys):
    cfg = write_config(tmp_path, spacing={"kind": "constant", "h_s": -1})
    assert main(["fill", "--config", str(cfg)]) == EXIT_CONFIG
    assert "spacing.h_s" in capsys.readouterr().err


def test_dimension_mismatch(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(
            {"dim": 2, "domain": {"kind": "clover3d"}, "spacing": {"kind": "constant", "h_s": 0.1}}, tmp_path
        )
    with pytest.raises(ConfigError):
        parse_config(
            {"dim": 2, "domain": {"kind": "clover2d"}, "spacing": {"kind": "constant", "h_s": 0.1}, "seeds": [[0, 0, 0]]},
            tmp_path,
        )


def test_usage_errors(tmp_path):
    cfg = write_config(tmp_path)
    with pytest.raises(SystemExit) as err:
        main(["fill"])
    assert err.value.code == EXIT_CONFIG
    assert main(["fill", "--config", str(cfg), "--threads", "2", "--sequential"]) == EXIT_CONFIG
    assert main(["fill", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG


def test_seed_outside_is_runtime_error(tmp_path):
    cfg = write_config(tmp_path, seeds=[[50.0, 50.0]])
    assert main(["fill", "--config", str(cfg), "--out", str(tmp_path / "p.csv")]) == EXIT_RUNTIME


def test_quality(tmp_path, capsys):
    cfg = write_config(tmp_path)
    pts = tmp_path / "p.csv"
    main(["fill", "--config", str(cfg), "--out", str(pts), "--threads", "1"])
    q = tmp_path / "q.json"
    assert main(["quality", "--config", str(cfg), "--points", str(pts), "--out", str(q), "--bins", "20"]) == EXIT_OK
    rep = json.loads(q.read_text())
    assert rep["gamma"] >= 1.0
    assert len(rep["hist_counts"]) == 20
    assert (tmp_path / "q_hist.csv").exists()
    assert "gamma=" in capsys.readouterr().out
    n = len(read_points(pts))
    assert main(["quality", "--config", str(cfg), "--points", str(pts), "--k", str(n)]) == EXIT_CONFIG


def test_bench(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "b.csv"
    code = main(["bench", "--config", str(cfg), "--threads", "1,2,4", "--np", "500,1000", "--repeats", "1", "--out", str(out)])
    assert code == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "threads,target_np,actual_np,wall_s,per_point_ns,speedup"
    assert len(lines) == 1 + 3 * 2
    printed = capsys.readouterr().out.splitlines()
    assert [l.split(",")[-1] for l in printed if l.startswith("0,")] == ["1.0000", "1.0000"]
    assert json.loads((tmp_path / "b.json").read_text())["repeats"] == 1
    assert main(["bench", "--config", str(cfg), "--threads", "", "--np", "500"]) == EXIT_CONFIG


def test_solve(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "e.csv"
    assert main(["solve", "--config", str(cfg), "--np", "500,2000", "--out", str(out)]) == EXIT_OK
    rows = [l.split(",") for l in out.read_text().splitlines()]
    assert rows[0] == ["N", "e1", "e_inf"]
    assert float(rows[2][2]) < float(rows[1][2])
    assert main(["solve", "--config", str(cfg), "--stencil", "5"]) == EXIT_CONFIG


def test_solve_needs_2d(tmp_path):
    cfg = write_config(
        tmp_path, dim=3, domain={"kind": "clover3d"}, spacing={"kind": "constant", "h_s": 0.2}, seeds="auto"
    )
    assert main(["solve", "--config", str(cfg)]) == EXIT_CONFIG


def test_gz_output(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "p.csv.gz"
    assert main(["fill", "--config", str(cfg), "--out", str(out), "--threads", "1"]) == EXIT_OK
    assert len(read_points(out)) > 100
    assert (tmp_path / "p.stats.json").exists()
    assert np.all(np.isfinite(read_points(out).points))
