import dataclasses
import json
import os

import pytest

from froglab import experiments
from froglab.experiments import (CSV_COLUMNS, ConfigError, PhasePointEstimate,
                                 boundary_monotonicity_report, classify, emit_results,
                                 load_results, partial_path, run_sweep, sweep_meta,
                                 validate_config)

SMALL = {"d": 2, "arena_radius": 30, "n_boxes": 8, "trials": 40, "budget": 2000,
         "root_seed": 11}


def small(tmp_path, **kw):
    raw = dict(SMALL, out_dir=str(tmp_path))
    raw.update(kw)
    return validate_config(raw)


def point(alpha, w, cls, verdict="inconclusive", d=2, error=""):
    return PhasePointEstimate(d, alpha, w, 0.5, 0.4, 0.6, 0.9, 0.8, 1.0, verdict, cls, 10, 0,
                              error)


def test_validate_rejects_out_of_range_grid():
    with pytest.raises(ConfigError) as exc:
        validate_config({"d": 2, "alphas": [0.5, 1.2], "ws": [0.5]})
    assert any(v.startswith("alphas") for v in exc.value.violations)


def test_validate_rejects_one_dimensional_lateral_weight():
    with pytest.raises(ConfigError) as exc:
        validate_config({"d": 1, "alphas": [0.5], "ws": [0.5]})
    assert any("w = 1" in v for v in exc.value.violations)


def test_validate_reports_every_violation():
    with pytest.raises(ConfigError) as exc:
        validate_config({"d": 2, "alphas": [2], "ws": [], "trials": 0, "bogus": 1})
    fields = {v.split(":")[0] for v in exc.value.violations}
    assert {"alphas", "ws", "trials", "bogus"} <= fields


def test_validate_minimal_canonical_echo():
    cfg = validate_config({"d": 2, "alphas": [0.5], "ws": [1]})
    c = cfg.canonical()
    assert c["alphas"] == [0.5] and c["ws"] == [1.0]
    assert validate_config(c) == cfg


def test_validate_arena_too_small():
    with pytest.raises(ConfigError):
        validate_config({"d": 2, "alphas": [0.5], "ws": [0.5], "arena_radius": 2})


def test_fingerprint_ignores_output_paths():
    a = validate_config(dict(SMALL, alphas=[0.5], ws=[0.5], out_dir="x"))
    b = validate_config(dict(SMALL, alphas=[0.5], ws=[0.5], out_dir="y", formats=["csv"]))
    c = validate_config(dict(SMALL, alphas=[0.5], ws=[0.5], root_seed=12))
    assert a.fingerprint() == b.fingerprint() != c.fingerprint()


def test_classify_rules():
    assert classify(0.2, "inconclusive", 0.05) == "recurrent-like"
    assert classify(0.01, "certified-evidence", 0.05) == "transient-like"
    assert classify(0.2, "certified-evidence", 0.05) == "conflict"
    assert classify(0.05, "inconclusive", 0.05) == "undetermined"


def test_single_point_recurrent(tmp_path):
    (p,) = run_sweep(small(tmp_path, alphas=[0.0], ws=[0.5]))
    assert p.classification == "recurrent-like"
    assert p.verdict == "inconclusive"


def test_single_point_transient(tmp_path):
    (p,) = run_sweep(small(tmp_path, alphas=[0.95], ws=[0.95]))
    assert p.classification == "transient-like"


def test_point_failure_recorded(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("no luck")

    monkeypatch.setattr(experiments, "certify_transience", boom)
    grid = run_sweep(small(tmp_path, alphas=[0.3, 0.6], ws=[0.5], trials=5))
    assert all("no luck" in p.error for p in grid)
    assert all(p.classification == "undetermined" for p in grid)


def test_emit_empty_grid_header_only(tmp_path):
    (path,) = emit_results([], tmp_path, ("csv",))
    assert path.read_text() == ",".join(CSV_COLUMNS + ("g_alpha",)) + "\n"


def test_emit_reference_column(tmp_path):
    (path,) = emit_results([point(1.0, 0.5, "undetermined")], tmp_path, ("csv",))
    header, row = path.read_text().splitlines()
    cols = dict(zip(header.split(","), row.split(",")))
    assert float(cols["g_alpha"]) == 0.5
    assert header.split(",")[:13] == list(CSV_COLUMNS)


def test_emit_json_round_trip(tmp_path):
    grid = [point(0.2, 0.3, "recurrent-like"),
            dataclasses.replace(point(0.9, 0.9, "transient-like"), mu_hat=None)]
    (path,) = emit_results(grid, tmp_path, ("json",), {"note": "x"})
    assert load_results(path) == grid


def test_emit_unwritable_leaves_nothing(tmp_path, monkeypatch):
    with pytest.raises(OSError):
        emit_results([], tmp_path / "missing", ("csv",))

    def fail(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(os, "replace", fail)
    with pytest.raises(OSError):
        emit_results([point(0.1, 0.1, "undetermined")], tmp_path, ("csv", "json"))
    assert list(tmp_path.iterdir()) == []


def test_sweep_deterministic_and_resumable(tmp_path):
    grid_kw = dict(alphas=[0.2, 0.9], ws=[0.3, 0.95], trials=10)
    a = small(tmp_path / "a", **grid_kw)
    b = small(tmp_path / "b", **grid_kw)
    ga = run_sweep(a)
    emit_results(ga, a.out_dir, meta=sweep_meta(a))
    # interrupt b after two points, leaving a torn line behind
    run_sweep(b)
    part = partial_path(b)
    lines = part.read_text().splitlines()
    part.write_text("\n".join(lines[:2]) + "\n" + lines[2][:17])
    gb = run_sweep(b)
    emit_results(gb, b.out_dir, meta=sweep_meta(b))
    for name in ("sweep.csv", "sweep.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_sweep_workers_do_not_change_results(tmp_path):
    kw = dict(alphas=[0.2, 0.9], ws=[0.3, 0.95], trials=5)
    g1 = run_sweep(small(tmp_path / "one", **kw))
    g2 = run_sweep(small(tmp_path / "two", **kw), workers=2)
    assert g1 == g2


def test_no_silent_double_classification(tmp_path):
    grid = run_sweep(small(tmp_path, alphas=[0.0, 0.95], ws=[0.3, 0.95], trials=20))
    for p in grid:
        rec = p.proxy_ci_low > 0.05
        tra = p.verdict == "certified-evidence"
        if rec and tra:
            assert p.classification == "conflict"


def test_boundary_all_transient():
    grid = [point(a, w, "transient-like", "certified-evidence")
            for a in (0.1, 0.5, 0.9) for w in (0.2, 0.6)]
    rep = boundary_monotonicity_report(grid)
    assert rep["boundary"] == {"0.1": 0.2, "0.5": 0.2, "0.9": 0.2}
    assert rep["nonincreasing"] and not rep["partial"]


def test_boundary_excludes_conflicts_and_compares_dimensions():
    g2 = [point(0.1, 0.5, "recurrent-like"), point(0.1, 0.9, "transient-like"),
          point(0.5, 0.5, "conflict"), point(0.5, 0.9, "transient-like"),
          point(0.9, 0.5, "transient-like"), point(0.9, 0.9, "undetermined", error="x")]
    g3 = [dataclasses.replace(p, d=3, classification="recurrent-like", error="") for p in g2]
    rep = boundary_monotonicity_report(g2, g3)
    assert rep["excluded"] == 2
    assert rep["boundary"] == {"0.1": 0.9, "0.5": 0.9, "0.9": 0.5}
    assert rep["nonincreasing"]
    assert rep["increasing_in_d"]
    assert rep["dimension_comparison"]["0.1"] == {"lower_d": 0.9, "higher_d": None}


def test_boundary_flags_partial_report():
    rep = boundary_monotonicity_report([point(0.1, 0.5, "undetermined")])
    assert rep["partial"]
    rep = boundary_monotonicity_report([point(0.1, 0.5, "transient-like"),
                                        point(0.2, 0.5, "undetermined"),
                                        point(0.3, 0.6, "transient-like")])
    # an unresolved column counts as an infinite boundary
    assert rep["boundary"]["0.2"] is None and not rep["nonincreasing"]
