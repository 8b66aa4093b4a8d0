"""Batch command-line front end: JSON configs in, reports and charts out.

Exit codes: 0 success, 2 config error, 3 data error, 4 solver/infeasibility.
All numeric output is formatted to 12 significant digits so runs are
byte-identical given the same config, data, and seed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .analytics import summary
from .exceptions import (
    AssetMismatch,
    DegenerateSplit,
    DimensionMismatch,
    EmptyCv,
    EmptyIntersection,
    EmptyPopulation,
    EmptySeries,
    InfeasibleProblem,
    InvalidConfig,
    MalformedCsv,
    MissingCell,
    NonMonotonicDates,
    NonPositivePrice,
    SolverFailure,
    TooFewRows,
    TooFewSamples,
    UnboundedProblem,
    UnsupportedMeasure,
)
from .hierarchical import (
    EqualWeighted,
    HierarchicalRiskParity,
    InverseVolatility,
    NestedClustersOptimization,
    StackingOptimization,
)
from .market_data import align, load_prices, prices_to_returns, time_split
from .mean_risk import (
    MeanRisk,
    ObjectiveFunction,
    efficient_frontier,
    predict,
)
from .measures import DEFAULT_BETA, RiskMeasure, measure_value
from .model_selection import CpcvConfig, WalkForwardConfig, cross_val_predict
from .priors import BlackLitterman, EmpiricalPrior, FactorModel, ViewSet
from .svg import line_chart

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SOLVER = 4

_CONFIG_ERRORS = (InvalidConfig, UnsupportedMeasure, AssetMismatch, DimensionMismatch)
_DATA_ERRORS = (
    MalformedCsv, NonMonotonicDates, NonPositivePrice, MissingCell, TooFewRows,
    EmptyIntersection, DegenerateSplit, TooFewSamples, EmptySeries, EmptyCv,
    EmptyPopulation, FileNotFoundError, IsADirectoryError,
)
_SOLVER_ERRORS = (InfeasibleProblem, UnboundedProblem, SolverFailure)


# ---------------------------------------------------------------------------
# deterministic serialization


def _fmt(value: float) -> str:
    """12 significant digits, '.' decimal, no locale dependence."""
    if not math.isfinite(value):
        raise ValueError(f"cannot serialize non-finite value {value}")
    text = f"{value:.12g}"
    return "-0" if text == "-0" else text


def _json_dumps(obj, indent: int = 0) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f"{inner}{json.dumps(str(k))}: {_json_dumps(v, indent + 1)}"
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{inner}{_json_dumps(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if obj is None:
        return "null"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _write_text(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_json(path: Path, obj):
    _write_text(path, _json_dumps(obj) + "\n")


def _write_csv(path: Path, header: list[str], rows: list[list]):
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, (float, np.floating)):
                cells.append(_fmt(float(cell)))
            elif isinstance(cell, (int, np.integer)):
                cells.append(str(int(cell)))
            else:
                cells.append(str(cell))
        lines.append(",".join(cells))
    _write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# config parsing (strict: unknown keys are fatal)

_TOP_KEYS = {"data", "model", "models", "constraints", "cv", "outputs",
             "benchmarks", "inputs", "seed"}
_DATA_KEYS = {"prices", "factors", "returns_kind", "test_fraction"}
_CONSTRAINT_KEYS = {"budget", "min_weights", "max_weights",
                    "max_weight_per_asset", "min_return"}
_CV_KEYS = {"kind", "train_size", "test_size", "expanding", "k", "p",
            "purge_horizon", "embargo_fraction"}
_MODEL_KEYS = {"kind", "name", "objective", "risk_measure", "beta", "l1_coef",
               "l2_coef", "risk_aversion", "frontier_size", "prior",
               "linkage", "k", "inner", "outer", "estimators",
               "final_estimator", "cv", "constraints"}
_PRIOR_KEYS = {"kind", "mean_estimator", "cov_estimator", "halflife",
               "gerber_c", "rmt_passes", "ridge_alpha", "views", "tau",
               "omega", "base"}
_VIEW_KEYS = {"picks", "value"}
_OUTPUT_KEYS = {"weights", "summary", "series", "frontier_csv", "frontier_svg",
                "population_json", "population_csv", "audit", "chart"}

_OBJECTIVES = {o.value: o for o in ObjectiveFunction}
_MEASURES = {m.value: m for m in RiskMeasure}


def _check_keys(section: dict, allowed: set[str], where: str):
    if not isinstance(section, dict):
        raise InvalidConfig(f"{where} must be a JSON object")
    unknown = set(section) - allowed
    if unknown:
        raise InvalidConfig(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"config {path} is not valid JSON: {exc}") from exc
    _check_keys(cfg, _TOP_KEYS, "config")
    if "data" in cfg:
        _check_keys(cfg["data"], _DATA_KEYS, "data")
    if "constraints" in cfg:
        _check_keys(cfg["constraints"], _CONSTRAINT_KEYS, "constraints")
    if "cv" in cfg:
        _check_keys(cfg["cv"], _CV_KEYS, "cv")
    if "outputs" in cfg:
        _check_keys(cfg["outputs"], _OUTPUT_KEYS, "outputs")
    if "model" in cfg:
        _validate_model(cfg["model"], "model")
    for i, sec in enumerate(cfg.get("models", [])):
        _validate_model(sec, f"models[{i}]")
    if "seed" in cfg and not isinstance(cfg["seed"], int):
        raise InvalidConfig("seed must be an integer")
    return cfg


def _validate_model(section: dict, where: str):
    _check_keys(section, _MODEL_KEYS, where)
    if "kind" not in section:
        raise InvalidConfig(f"{where}: missing 'kind'")
    if "prior" in section:
        _validate_prior(section["prior"], f"{where}.prior")
    if "constraints" in section:
        _check_keys(section["constraints"], _CONSTRAINT_KEYS, f"{where}.constraints")
    if "cv" in section:
        _check_keys(section["cv"], _CV_KEYS, f"{where}.cv")
    for i, sub in enumerate(section.get("estimators", [])):
        _validate_model(sub, f"{where}.estimators[{i}]")
    for key in ("inner", "outer", "final_estimator"):
        if key in section:
            _validate_model(section[key], f"{where}.{key}")


def _validate_prior(section: dict, where: str):
    _check_keys(section, _PRIOR_KEYS, where)
    for i, view in enumerate(section.get("views", [])):
        _check_keys(view, _VIEW_KEYS, f"{where}.views[{i}]")
        if "picks" not in view or "value" not in view:
            raise InvalidConfig(f"{where}.views[{i}] needs 'picks' and 'value'")
    if "base" in section:
        _validate_prior(section["base"], f"{where}.base")


def _build_prior(section: dict | None, assets: tuple[str, ...]):
    if section is None:
        return None
    kind = section.get("kind", "empirical")
    if kind == "empirical":
        return EmpiricalPrior(
            mean_estimator=section.get("mean_estimator", "sample"),
            cov_estimator=section.get("cov_estimator", "sample"),
            halflife=section.get("halflife", 60.0),
            gerber_c=section.get("gerber_c", 0.5),
            rmt_passes=section.get("rmt_passes", 2),
        )
    if kind == "factor_model":
        return FactorModel(ridge_alpha=section.get("ridge_alpha", 0.1))
    if kind == "black_litterman":
        views = None
        if "views" in section:
            index = {a: j for j, a in enumerate(assets)}
            rows = section["views"]
            P = np.zeros((len(rows), len(assets)))
            Q = np.zeros(len(rows))
            for i, view in enumerate(rows):
                for name, coef in view["picks"].items():
                    if name not in index:
                        raise AssetMismatch(f"view picks unknown asset {name!r}")
                    P[i, index[name]] = float(coef)
                Q[i] = float(view["value"])
            omega = np.asarray(section["omega"], dtype=float) if "omega" in section else None
            views = ViewSet(P=P, Q=Q, omega=omega, tau=section.get("tau", 0.05))
        return BlackLitterman(views=views,
                              base_estimator=_build_prior(section.get("base"), assets))
    raise InvalidConfig(f"unknown prior kind {kind!r}")


def _build_cv(section: dict):
    kind = section.get("kind")
    if kind == "walk_forward":
        if "train_size" not in section or "test_size" not in section:
            raise InvalidConfig("walk_forward cv needs train_size and test_size")
        return WalkForwardConfig(
            train_size=section["train_size"],
            test_size=section["test_size"],
            expanding=section.get("expanding", False),
        )
    if kind == "cpcv":
        return CpcvConfig(
            k=section.get("k", 10),
            p=section.get("p", 2),
            purge_horizon=section.get("purge_horizon", 1),
            embargo_fraction=section.get("embargo_fraction", 0.01),
        )
    raise InvalidConfig(f"cv kind must be 'walk_forward' or 'cpcv', got {kind!r}")


def _build_model(section: dict, assets: tuple[str, ...], constraints: dict | None = None):
    """Instantiate an allocator from its config section.

    `constraints` is the top-level constraints section; a model-local
    `constraints` key overrides it.
    """
    kind = section["kind"]
    cons = section.get("constraints", constraints) or {}
    if kind == "mean_risk":
        objective = section.get("objective", "minimize_risk")
        measure = section.get("risk_measure", "variance")
        if objective not in _OBJECTIVES:
            raise InvalidConfig(f"unknown objective {objective!r}")
        if measure not in _MEASURES:
            raise InvalidConfig(f"unknown risk_measure {measure!r}")
        return MeanRisk(
            objective=_OBJECTIVES[objective],
            risk_measure=_MEASURES[measure],
            prior_estimator=_build_prior(section.get("prior"), assets),
            budget=cons.get("budget", 1.0),
            min_weights=cons.get("min_weights", 0.0),
            max_weights=cons.get("max_weights", 1.0),
            max_weight_per_asset=cons.get("max_weight_per_asset"),
            min_return=cons.get("min_return"),
            l1_coef=section.get("l1_coef", 0.0),
            l2_coef=section.get("l2_coef", 0.0),
            risk_aversion=section.get("risk_aversion", 1.0),
            beta=section.get("beta", DEFAULT_BETA),
        )
    if kind == "hrp":
        measure = section.get("risk_measure", "variance")
        if measure not in _MEASURES:
            raise InvalidConfig(f"unknown risk_measure {measure!r}")
        return HierarchicalRiskParity(
            risk_measure=_MEASURES[measure],
            linkage=section.get("linkage", "single"),
            prior_estimator=_build_prior(section.get("prior"), assets),
            beta=section.get("beta", DEFAULT_BETA),
        )
    if kind == "nco":
        return NestedClustersOptimization(
            inner_estimator=(_build_model(section["inner"], assets)
                             if "inner" in section else None),
            outer_estimator=(_build_model(section["outer"], assets)
                             if "outer" in section else None),
            k=section.get("k", "auto"),
            linkage=section.get("linkage", "single"),
        )
    if kind == "stacking":
        subs = section.get("estimators") or []
        if not subs:
            raise InvalidConfig("stacking model needs a non-empty 'estimators' list")
        estimators = [
            (sub.get("name", f"{sub['kind']}_{i}"), _build_model(sub, assets))
            for i, sub in enumerate(subs)
        ]
        final = (_build_model(section["final_estimator"], assets)
                 if "final_estimator" in section else None)
        kwargs = {}
        if "cv" in section:
            kwargs["cv"] = _build_cv(section["cv"])
        return StackingOptimization(estimators=estimators, final_estimator=final, **kwargs)
    if kind == "equal_weighted":
        return EqualWeighted()
    if kind == "inverse_volatility":
        return InverseVolatility(prior_estimator=_build_prior(section.get("prior"), assets))
    raise InvalidConfig(f"unknown model kind {kind!r}")


def _model_name(section: dict, index: int | None = None) -> str:
    if "name" in section:
        return str(section["name"])
    kind = section["kind"]
    return kind if index is None else f"{kind}_{index}"


# ---------------------------------------------------------------------------
# data loading


def _load_data(cfg: dict):
    """Returns (X, factors) as ReturnsMatrix objects (factors may be None)."""
    data = cfg.get("data")
    if not data or "prices" not in data:
        raise InvalidConfig("config needs a data section with a 'prices' path")
    prices = load_prices(data["prices"])
    kind = data.get("returns_kind", "simple")
    if kind not in ("simple", "log"):
        raise InvalidConfig(f"returns_kind must be 'simple' or 'log', got {kind!r}")
    factors = None
    if "factors" in data:
        factor_prices = load_prices(data["factors"])
        prices, factor_prices = align(prices, factor_prices)
        factors = prices_to_returns(factor_prices, kind=kind)
    return prices_to_returns(prices, kind=kind), factors


def _split_rows(X, factors, fraction: float):
    X_train, X_test = time_split(X, fraction)
    if factors is None:
        return X_train, X_test, None
    f_train, _ = time_split(factors, fraction)
    return X_train, X_test, f_train


# ---------------------------------------------------------------------------
# commands


def _summary_obj(port) -> dict:
    return {k: float(v) for k, v in summary(port).items()}


def cmd_optimize(cfg: dict, out: Path, threads: int) -> int:
    if "model" not in cfg:
        raise InvalidConfig("optimize needs a 'model' section")
    X, factors = _load_data(cfg)
    fraction = cfg.get("data", {}).get("test_fraction", 0.3)
    X_train, X_test, f_train = _split_rows(X, factors, fraction)

    model = _build_model(cfg["model"], X.assets, cfg.get("constraints"))
    model.fit(X_train, factors=f_train)
    weights = np.asarray(model.weights_, dtype=float)
    name = _model_name(cfg["model"])
    port_train = predict(weights, X_train, name=name)
    port_test = predict(weights, X_test, name=name)

    names = cfg.get("outputs", {})
    _write_json(out / names.get("weights", "weights.json"),
                {a: float(w) for a, w in zip(X.assets, weights)})
    _write_json(out / names.get("summary", "summary.json"),
                {"train": _summary_obj(port_train), "test": _summary_obj(port_test)})
    # series files carry full-precision returns so report round-trips exactly
    series_obj = {
        "train": {"name": name, "returns": [float(r) for r in port_train.returns]},
        "test": {"name": name, "returns": [float(r) for r in port_test.returns]},
    }
    _write_text(out / names.get("series", "series.json"),
                json.dumps(series_obj, indent=2) + "\n")
    return 0


def cmd_frontier(cfg: dict, out: Path, threads: int) -> int:
    section = cfg.get("model")
    if not section:
        raise InvalidConfig("frontier needs a 'model' section")
    if section.get("kind", "mean_risk") != "mean_risk":
        raise InvalidConfig("frontier requires a mean_risk model")
    size = section.get("frontier_size", 100)
    if not isinstance(size, int) or size < 1:
        raise InvalidConfig("frontier_size must be an integer >= 1")

    X, factors = _load_data(cfg)
    fraction = cfg.get("data", {}).get("test_fraction", 0.3)
    X_train, X_test, f_train = _split_rows(X, factors, fraction)

    model = _build_model(section, X.assets, cfg.get("constraints"))
    prior_est = model.prior_estimator if model.prior_estimator is not None else EmpiricalPrior()
    prior = prior_est.fit(X_train, factors=f_train).prior_
    spec = model._spec(prior)
    points = efficient_frontier(spec, size)

    measure = spec.risk_measure
    rows = []
    svg_train, svg_test = [], []
    for idx, point in enumerate(points):
        row = [float(point.expected_return)]
        for X_part, bucket in ((X_train, svg_train), (X_test, svg_test)):
            series = X_part.values @ point.weights
            realized = float(series.mean())
            if measure in (RiskMeasure.VARIANCE, RiskMeasure.STANDARD_DEVIATION):
                risk = measure_value(series, RiskMeasure.STANDARD_DEVIATION)
            else:
                risk = measure_value(series, measure, beta=spec.beta)
            row.extend([realized, float(risk)])
            bucket.append((float(risk), realized))
        row.extend(float(w) for w in point.weights)
        rows.append(row)

    header = ["target_return", "realized_return_train", "risk_train",
              "realized_return_test", "risk_test"] + list(X.assets)
    names = cfg.get("outputs", {})
    _write_csv(out / names.get("frontier_csv", "frontier.csv"), header, rows)
    chart = line_chart(
        [
            ("train", [r for r, _ in svg_train], [m for _, m in svg_train]),
            ("test", [r for r, _ in svg_test], [m for _, m in svg_test]),
        ],
        title="Efficient frontier",
        x_label="risk", y_label="mean return", markers=True,
    )
    _write_text(out / names.get("frontier_svg", "frontier.svg"), chart)
    return 0


def cmd_backtest(cfg: dict, out: Path, threads: int) -> int:
    if "cv" not in cfg:
        raise InvalidConfig("backtest needs a 'cv' section")
    if "factors" in cfg.get("data", {}):
        raise InvalidConfig("factor data is not supported in backtest")
    sections = cfg.get("models")
    if sections is None:
        sections = [cfg["model"]] if "model" in cfg else []
    if not sections:
        raise InvalidConfig("backtest needs a 'model' or 'models' section")

    X, _ = _load_data(cfg)
    plan = _build_cv(cfg["cv"]).plan(X.n_periods)
    if plan.n_splits == 0:
        raise EmptyCv("cv plan produced no splits")

    named = [(_model_name(sec, i if len(sections) > 1 else None),
              _build_model(sec, X.assets, cfg.get("constraints")))
             for i, sec in enumerate(sections)]
    benchmarks = cfg.get("benchmarks", ["equal_weighted"])
    for bench in benchmarks:
        named.append((bench, _build_model({"kind": bench}, X.assets)))

    portfolios = []
    for name, model in named:
        result = cross_val_predict(model, X, plan, n_jobs=threads, name=name)
        portfolios.extend(result if isinstance(result, list) else [result])

    rows = []
    for port in portfolios:
        row = {"name": port.name}
        row.update(_summary_obj(port))
        rows.append(row)
    names = cfg.get("outputs", {})
    _write_json(out / names.get("population_json", "population_summary.json"),
                {"portfolios": rows})
    header = list(rows[0].keys())
    _write_csv(out / names.get("population_csv", "population_summary.csv"),
               header, [[row[k] for k in header] for row in rows])

    audit = []
    for port in portfolios:
        audit.append({
            "portfolio": port.name,
            "segments": [
                {
                    "start": span[0].isoformat(),
                    "end": span[1].isoformat(),
                    "weights": {a: float(w) for a, w in zip(X.assets, weights)},
                }
                for weights, span in port.segments
            ],
        })
    _write_json(out / names.get("audit", "weights_audit.json"),
                {"splits": json.loads(plan.to_json()), "portfolios": audit})

    chart_series = []
    for port in portfolios:
        wealth = np.cumprod(1.0 + port.returns) - 1.0
        chart_series.append((port.name, list(range(port.n_periods)),
                             [float(v) for v in wealth]))
    chart = line_chart(chart_series, title="Cumulative return (out of sample)",
                       x_label="period", y_label="cumulative return")
    _write_text(out / names.get("chart", "cumulative_returns.svg"), chart)
    return 0


def _load_series_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise FileNotFoundError(f"cannot read input {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedCsv(f"input {path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict) or not payload:
        raise MalformedCsv(f"input {path}: expected a non-empty JSON object")
    for label, entry in payload.items():
        if (not isinstance(entry, dict) or "returns" not in entry
                or not isinstance(entry["returns"], list)):
            raise MalformedCsv(
                f"input {path}, entry {label!r}: expected {{'name', 'returns'}}"
            )
        values = entry["returns"]
        if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in values):
            raise MissingCell(f"input {path}, entry {label!r}: non-finite return value")
    return payload


def cmd_report(cfg: dict, out: Path, threads: int) -> int:
    inputs = cfg.get("inputs")
    if not inputs:
        raise InvalidConfig("report needs a non-empty 'inputs' list")
    from .analytics import Portfolio

    for path in inputs:
        payload = _load_series_file(path)
        result = {}
        for label, entry in payload.items():
            port = Portfolio(name=str(entry.get("name", label)),
                             returns=np.asarray(entry["returns"], dtype=float))
            result[label] = _summary_obj(port)
        stem = Path(path).stem
        _write_json(out / f"{stem}_summary.json", result)
    return 0


# ---------------------------------------------------------------------------
# entry point

_COMMANDS = {
    "optimize": cmd_optimize,
    "frontier": cmd_frontier,
    "backtest": cmd_backtest,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="quantfolio",
        description="Portfolio optimization and backtesting from JSON configs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="JSON config path")
        cmd.add_argument("--out", required=True, help="output directory")
        cmd.add_argument("--seed", type=int, default=None)
        cmd.add_argument("--threads", type=int, default=None)
    args = parser.parse_args(argv)

    if args.threads is not None:
        threads = args.threads
    else:
        try:
            threads = int(os.environ.get("QUANTFOLIO_THREADS", "1"))
        except ValueError:
            print("config error: QUANTFOLIO_THREADS must be an integer", file=sys.stderr)
            return EXIT_CONFIG
    if threads < 1:
        print("config error: thread count must be >= 1", file=sys.stderr)
        return EXIT_CONFIG

    try:
        cfg = load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, out, threads)
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except _SOLVER_ERRORS as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
