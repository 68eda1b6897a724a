import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from prescore_attn import ConfigError
from prescore_attn.experiments import (GRID_DEFAULTS, config_for_row, config_from_dict, csv_body, load_config,
                                       loglog_slope, read_results, run_experiment, run_rows)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def small(name, **grid):
    return config_from_dict({"experiment": name, "seeds": [0, 1], "grid": grid})


def test_defaults_fill_grid():
    cfg = config_from_dict({"experiment": "theorem1", "seeds": {"start": 3, "count": 2}})
    assert cfg.experiment == "THEOREM1"
    assert cfg.seeds == [3, 4]
    assert cfg.grid == GRID_DEFAULTS["THEOREM1"]
    assert cfg.thresholds["pass_rate"] == 0.95


@pytest.mark.parametrize("doc,field", [
    ({"experiment": "THEOREM1", "seeds": []}, "seeds"),
    ({"experiment": "THEOREM1", "seeds": [1, 1]}, "seeds"),
    ({"experiment": "THEOREM1", "seeds": [-1]}, "seeds[0]"),
    ({"experiment": "THEOREM1"}, "seeds"),
    ({"experiment": "NOPE", "seeds": [0]}, "experiment"),
    ({"experiment": "THEOREM1", "seeds": [0], "schema": 2}, "schema"),
    ({"experiment": "THEOREM1", "seeds": [0], "grid": {"n": []}}, "grid.n"),
    ({"experiment": "THEOREM1", "seeds": [0], "grid": {"d": ["x"]}}, "grid.d[0]"),
    ({"experiment": "THEOREM1", "seeds": [0], "grid": {"n": [10.5]}}, "grid.n[0]"),
    ({"experiment": "THEOREM1", "seeds": [0], "grid": {"bogus": [1]}}, "grid.bogus"),
    ({"experiment": "THEOREM1", "seeds": [0], "grid": {"n": [100]}}, "grid"),
    ({"experiment": "COVERAGE", "seeds": [0], "grid": {"method": ["FOO"]}}, "grid.method[0]"),
    ({"experiment": "THEOREM1", "seeds": [0], "thresholds": {"nope": 1}}, "thresholds.nope"),
    ({"experiment": "THEOREM1", "seeds": [0], "thresholds": {"ratio": "big"}}, "thresholds.ratio"),
])
def test_validation_names_the_field(doc, field):
    with pytest.raises(ConfigError) as exc:
        config_from_dict(doc)
    assert exc.value.field == field
    assert str(exc.value).startswith(field)


def test_yaml_error_reports_line(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("schema: 1\nexperiment: THEOREM1\nseeds: [0\n")
    with pytest.raises(ConfigError) as exc:
        load_config(path)
    assert exc.value.field.startswith("line ")


def test_exponent_strings_are_numbers():
    cfg = config_from_dict(yaml.safe_load("experiment: THEOREM1\nseeds: [0]\nthresholds: {ratio: 1e9}\n"))
    assert cfg.thresholds["ratio"] == 1e9


def test_shipped_configs_parse():
    for path in sorted(CONFIGS.glob("*.yaml")):
        cfg = load_config(path)
        assert cfg.experiment in GRID_DEFAULTS
        assert len(cfg.seeds) >= 1


def test_rows_sorted_and_thread_independent():
    cfg = small("CLAIM1", n=[400], d=[4], p=[1.5, 3.0], restarts=[3])
    one = run_rows(cfg, threads=1)
    four = run_rows(cfg, threads=4)
    assert one == four
    assert [(r["p"], r["seed"]) for r in one] == [(1.5, 0), (1.5, 1), (3.0, 0), (3.0, 1)]


def test_output_files_and_determinism(tmp_path):
    cfg = small("THEOREM1", n=[800], d=[8])
    s1 = run_experiment(cfg, tmp_path / "a", threads=2)
    s2 = run_experiment(cfg, tmp_path / "b", threads=1)
    first = (tmp_path / "a" / "results.csv").read_text().splitlines()[0]
    assert first.startswith("# ") and "generated=" in first
    assert csv_body(tmp_path / "a" / "results.csv") == csv_body(tmp_path / "b" / "results.csv")
    assert s1 == s2
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["passed"] is True and summary["separation_pass_rate"] == 1.0


def test_rows_round_trip_through_parser(tmp_path):
    cfg = small("COVERAGE", s=[8, 16], eps_heavy=[0.1])
    run_experiment(cfg, tmp_path)
    header, rows = read_results(tmp_path / "results.csv")
    assert header[: len(cfg.grid) + 1] == list(cfg.grid) + ["seed"]
    for row in rows:
        single = config_for_row(cfg, row)
        assert len(single.points()) == 1 and single.seeds == [int(row["seed"])]
        again = run_rows(single)[0]
        for key in cfg.grid:
            assert again[key] == single.points()[0][key]
        assert repr(again["percentage"]) == row["percentage"]


def test_coverage_example_monotone(tmp_path):
    cfg = config_from_dict({"experiment": "COVERAGE", "seeds": [0, 1, 2],
                            "grid": {"n": [256], "d": [8], "epsilon": [0.25], "s": [32, 64, 128],
                                     "eps_heavy": [0.01, 0.1, 0.3]}})
    summary = run_experiment(cfg, tmp_path)
    assert len(summary["median_percentage"]) == 9
    assert summary["checks"]["monotone_in_s"]


def test_counterexample_experiment(tmp_path):
    summary = run_experiment(config_from_dict({"experiment": "COUNTEREXAMPLE", "seeds": [0]}), tmp_path)
    assert summary["passed"]
    _, rows = read_results(tmp_path / "results.csv")
    assert rows[0]["unnormalized_isolates_S"] == "false"
    assert rows[0]["normalized_isolates_S"] == "true"


def test_speed_writes_timings_separately(tmp_path):
    cfg = config_from_dict({"experiment": "SPEED", "seeds": [0], "thresholds": {"repeats": 1},
                            "grid": {"n": [256, 512], "d": [4], "s": [64], "block_size": [32]}})
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b")
    assert csv_body(tmp_path / "a" / "results.csv") == csv_body(tmp_path / "b" / "results.csv")
    header, rows = read_results(tmp_path / "a" / "timings.csv")
    assert "prescored_seconds" in header and len(rows) == 2
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert "prescored_slope" in summary["fits"][0]


def test_loglog_slope():
    ns = np.array([1, 2, 4, 8])
    assert loglog_slope(ns, 3 * ns**2.0) == pytest.approx(2.0)
