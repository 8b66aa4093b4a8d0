import json
import xml.etree.ElementTree as ET
from importlib import resources
from pathlib import Path

import pytest

from quantfolio.cli import main

DATA = resources.files("quantfolio").joinpath("data/sample_prices.csv")
NS = "{http://www.w3.org/2000/svg}"


@pytest.fixture(scope="module")
def prices_path():
    with resources.as_file(DATA) as path:
        yield str(path)


@pytest.fixture(scope="module")
def short_prices_path(tmp_path_factory, prices_path):
    """First 161 price rows (160 returns), enough for cheap backtests."""
    lines = Path(prices_path).read_text().splitlines()
    path = tmp_path_factory.mktemp("data") / "short.csv"
    path.write_text("\n".join(lines[:162]) + "\n")
    return str(path)


def run(tmp_path, command, cfg, name="cfg", threads=None):
    cfg_path = tmp_path / f"{name}.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / f"{name}_out"
    argv = [command, "--config", str(cfg_path), "--out", str(out)]
    if threads is not None:
        argv += ["--threads", str(threads)]
    return main(argv), out


def read_outputs(out):
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


def test_optimize_outputs(tmp_path, short_prices_path):
    cfg = {
        "data": {"prices": short_prices_path, "test_fraction": 0.3},
        "model": {"kind": "mean_risk", "risk_measure": "variance"},
        "constraints": {"max_weight_per_asset": {"AAPL": 0.2}},
    }
    code, out = run(tmp_path, "optimize", cfg)
    assert code == 0
    weights = json.loads((out / "weights.json").read_text())
    assert set(weights) == {"AAPL", "MSFT", "AMZN", "GOOG", "JPM",
                            "XOM", "PFE", "KO", "BA", "NVDA"}
    assert sum(weights.values()) == pytest.approx(1.0, abs=1e-8)
    assert weights["AAPL"] <= 0.2 + 1e-6
    assert all(v >= -1e-8 for v in weights.values())
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary) == {"train", "test"}
    assert "sharpe_ratio" in summary["train"]
    series = json.loads((out / "series.json").read_text())
    assert len(series["train"]["returns"]) == 112  # 160 returns, 30% test
    assert len(series["test"]["returns"]) == 48


def test_optimize_deterministic(tmp_path, short_prices_path):
    cfg = {
        "data": {"prices": short_prices_path},
        "model": {"kind": "mean_risk", "risk_measure": "cvar", "beta": 0.9},
    }
    code_a, out_a = run(tmp_path, "optimize", cfg, name="a")
    code_b, out_b = run(tmp_path, "optimize", cfg, name="b")
    assert code_a == code_b == 0
    assert read_outputs(out_a) == read_outputs(out_b)


def test_optimize_unknown_key_is_config_error(tmp_path, short_prices_path):
    cfg = {
        "data": {"prices": short_prices_path},
        "model": {"kind": "mean_risk"},
        "surprise": True,
    }
    code, out = run(tmp_path, "optimize", cfg)
    assert code == 2
    assert not out.exists()  # validation failed before any output was written


def test_optimize_missing_prices_is_data_error(tmp_path):
    cfg = {
        "data": {"prices": str(tmp_path / "nope.csv")},
        "model": {"kind": "mean_risk"},
    }
    code, _ = run(tmp_path, "optimize", cfg)
    assert code == 3


def test_optimize_infeasible_is_solver_error(tmp_path, short_prices_path):
    cfg = {
        "data": {"prices": short_prices_path},
        "model": {"kind": "mean_risk"},
        "constraints": {"min_return": 99.0},
    }
    code, _ = run(tmp_path, "optimize", cfg)
    assert code == 4


def test_missing_config_file_is_config_error(tmp_path):
    code = main(["optimize", "--config", str(tmp_path / "absent.json"),
                 "--out", str(tmp_path / "out")])
    assert code == 2


def test_bad_thread_count_is_config_error(tmp_path, short_prices_path):
    cfg = {"data": {"prices": short_prices_path}, "model": {"kind": "mean_risk"}}
    code, _ = run(tmp_path, "optimize", cfg, threads=0)
    assert code == 2


def test_threads_env_var(tmp_path, short_prices_path, monkeypatch):
    monkeypatch.setenv("QUANTFOLIO_THREADS", "oops")
    cfg = {"data": {"prices": short_prices_path}, "model": {"kind": "mean_risk"}}
    code, _ = run(tmp_path, "optimize", cfg)
    assert code == 2
    monkeypatch.setenv("QUANTFOLIO_THREADS", "2")
    code, _ = run(tmp_path, "optimize", cfg, name="env_ok")
    assert code == 0


def test_frontier_outputs(tmp_path, short_prices_path):
    cfg = {
        "data": {"prices": short_prices_path},
        "model": {"kind": "mean_risk", "risk_measure": "variance",
                  "frontier_size": 5},
        "constraints": {"max_weight_per_asset": {"AAPL": 0.2}},
    }
    code, out = run(tmp_path, "frontier", cfg)
    assert code == 0
    lines = (out / "frontier.csv").read_text().splitlines()
    header = lines[0].split(",")
    assert header[:5] == ["target_return", "realized_return_train", "risk_train",
                          "realized_return_test", "risk_test"]
    assert len(lines) == 6  # header + 5 points
    aapl_col = header.index("AAPL")
    targets = []
    for line in lines[1:]:
        cells = line.split(",")
        assert float(cells[aapl_col]) <= 0.2 + 1e-6
        targets.append(float(cells[0]))
    assert targets == sorted(targets)
    root = ET.fromstring((out / "frontier.svg").read_text())
    assert len(root.findall(f"{NS}polyline")) == 2


def test_frontier_size_one(tmp_path, short_prices_path):
    cfg = {
        "data": {"prices": short_prices_path},
        "model": {"kind": "mean_risk", "frontier_size": 1},
    }
    code, out = run(tmp_path, "frontier", cfg)
    assert code == 0
    assert len((out / "frontier.csv").read_text().splitlines()) == 2


def test_frontier_rejects_non_mean_risk(tmp_path, short_prices_path):
    cfg = {"data": {"prices": short_prices_path}, "model": {"kind": "hrp"}}
    code, _ = run(tmp_path, "frontier", cfg)
    assert code == 2


def test_backtest_walk_forward(tmp_path, prices_path):
    cfg = {
        "data": {"prices": prices_path},
        "model": {"kind": "hrp"},
        "cv": {"kind": "walk_forward", "train_size": 252, "test_size": 60},
    }
    code, out = run(tmp_path, "backtest", cfg)
    assert code == 0
    pop = json.loads((out / "population_summary.json").read_text())
    names = [row["name"] for row in pop["portfolios"]]
    assert names == ["hrp", "equal_weighted"]
    audit = json.loads((out / "weights_audit.json").read_text())
    assert len(audit["splits"]["splits"]) == 2
    for port in audit["portfolios"]:
        assert len(port["segments"]) == 2
        for seg in port["segments"]:
            w = seg["weights"]
            assert sum(w.values()) == pytest.approx(1.0, abs=1e-8)
    # 372 returns, trained on 252: exactly 120 out-of-sample periods
    root = ET.fromstring((out / "cumulative_returns.svg").read_text())
    for poly in root.findall(f"{NS}polyline"):
        assert len(poly.get("points").split()) == 120
    csv_lines = (out / "population_summary.csv").read_text().splitlines()
    assert len(csv_lines) == 3


def test_backtest_cpcv_paths(tmp_path, short_prices_path):
    cfg = {
        "data": {"prices": short_prices_path},
        "models": [{"kind": "hrp", "name": "tree"},
                   {"kind": "inverse_volatility"}],
        "cv": {"kind": "cpcv", "k": 4, "p": 2,
               "purge_horizon": 1, "embargo_fraction": 0.01},
        "benchmarks": [],
    }
    code, out = run(tmp_path, "backtest", cfg)
    assert code == 0
    pop = json.loads((out / "population_summary.json").read_text())
    names = [row["name"] for row in pop["portfolios"]]
    # C(4,2)=6 splits reconstruct 3 paths per model; the unnamed second
    # model picks up its position index
    assert names == [f"tree_path{i}" for i in range(3)] + \
        [f"inverse_volatility_1_path{i}" for i in range(3)]


def test_backtest_thread_count_neutral(tmp_path, short_prices_path):
    cfg = {
        "data": {"prices": short_prices_path},
        "model": {"kind": "mean_risk", "risk_measure": "variance"},
        "cv": {"kind": "cpcv", "k": 4, "p": 2,
               "purge_horizon": 1, "embargo_fraction": 0.01},
    }
    code_a, out_a = run(tmp_path, "backtest", cfg, name="t1", threads=1)
    code_b, out_b = run(tmp_path, "backtest", cfg, name="t4", threads=4)
    assert code_a == code_b == 0
    assert read_outputs(out_a) == read_outputs(out_b)


def test_backtest_without_cv_is_config_error(tmp_path, short_prices_path):
    cfg = {"data": {"prices": short_prices_path}, "model": {"kind": "hrp"}}
    code, _ = run(tmp_path, "backtest", cfg)
    assert code == 2


def test_report_round_trip(tmp_path, short_prices_path):
    cfg = {
        "data": {"prices": short_prices_path},
        "model": {"kind": "mean_risk"},
    }
    code, opt_out = run(tmp_path, "optimize", cfg, name="opt")
    assert code == 0
    report_cfg = {"inputs": [str(opt_out / "series.json")]}
    code, rep_out = run(tmp_path, "report", report_cfg, name="rep")
    assert code == 0
    # recomputed statistics must be byte-identical to the optimize summary
    assert (rep_out / "series_summary.json").read_bytes() == \
        (opt_out / "summary.json").read_bytes()


def test_report_empty_inputs_is_config_error(tmp_path):
    code, _ = run(tmp_path, "report", {"inputs": []})
    assert code == 2


def test_report_nonfinite_series_is_data_error(tmp_path):
    bad = tmp_path / "series.json"
    bad.write_text('{"train": {"name": "x", "returns": [0.01, NaN]}}')
    code, _ = run(tmp_path, "report", {"inputs": [str(bad)]})
    assert code == 3


def test_black_litterman_config(tmp_path, short_prices_path):
    cfg = {
        "data": {"prices": short_prices_path},
        "model": {
            "kind": "mean_risk",
            "prior": {
                "kind": "black_litterman",
                "views": [{"picks": {"AAPL": 1.0}, "value": 0.0002}],
                "tau": 0.05,
            },
        },
    }
    code, out = run(tmp_path, "optimize", cfg)
    assert code == 0
    # unknown asset in a view is a config error
    cfg["model"]["prior"]["views"] = [{"picks": {"ZZZ": 1.0}, "value": 0.1}]
    code, _ = run(tmp_path, "optimize", cfg, name="badview")
    assert code == 2


def test_stacking_config(tmp_path, short_prices_path):
    cfg = {
        "data": {"prices": short_prices_path},
        "model": {
            "kind": "stacking",
            "estimators": [{"kind": "equal_weighted"},
                           {"kind": "inverse_volatility"}],
            "final_estimator": {"kind": "mean_risk"},
            "cv": {"kind": "walk_forward", "train_size": 60, "test_size": 30},
        },
    }
    code, out = run(tmp_path, "optimize", cfg)
    assert code == 0
    weights = json.loads((out / "weights.json").read_text())
    assert sum(weights.values()) == pytest.approx(1.0, abs=1e-8)
