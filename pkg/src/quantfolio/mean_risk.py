"""Mean-risk optimization: four objectives over the supported risk measures.

Builds on the reformulation layer to express each objective as a QP/LP,
including weight constraints, L1/L2 regularization, risk caps, and
efficient-frontier sweeps over return targets.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .analytics import Portfolio
from .base import BaseEstimator
from .exceptions import (
    AssetMismatch,
    DimensionMismatch,
    InfeasibleProblem,
    InvalidConfig,
    SolverFailure,
    UnboundedProblem,
    UnsupportedMeasure,
)
from .market_data import ReturnsMatrix
from .measures import DEFAULT_BETA, RiskMeasure, measure_value
from .priors import EmpiricalPrior, Prior
from .reformulations import LinExpr, ProblemBuilder, reformulate_risk
from .solver import SolverSettings, solve


class ObjectiveFunction(Enum):
    MINIMIZE_RISK = "minimize_risk"
    MAXIMIZE_RETURN = "maximize_return"
    MAXIMIZE_UTILITY = "maximize_utility"
    MAXIMIZE_RATIO = "maximize_ratio"


@dataclass
class Constraints:
    """Feasible set: budget hyperplane, box bounds, linear rows, return floor.

    `linear_A`/`linear_b` encode A·w ≥ b. `max_weight_per_asset` maps asset
    names to upper bounds and is resolved against the prior's asset list.
    `risk_caps` is a list of (RiskMeasure, bound) pairs.
    """

    budget: float = 1.0
    lower: float | np.ndarray = 0.0
    upper: float | np.ndarray = 1.0
    max_weight_per_asset: dict[str, float] | None = None
    linear_A: np.ndarray | None = None
    linear_b: np.ndarray | None = None
    min_return: float | None = None
    risk_caps: list[tuple[RiskMeasure, float]] = field(default_factory=list)

    def bounds(self, n: int, assets: tuple[str, ...] = ()) -> tuple[np.ndarray, np.ndarray]:
        lb = np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy()
        ub = np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy()
        if self.max_weight_per_asset:
            if not assets:
                raise InvalidConfig("named weight caps need a prior with asset names")
            index = {a: i for i, a in enumerate(assets)}
            for name, cap in self.max_weight_per_asset.items():
                if name not in index:
                    raise AssetMismatch(f"capped asset {name!r} not in prior assets")
                ub[index[name]] = min(ub[index[name]], float(cap))
        if np.any(lb > ub):
            raise InvalidConfig("lower bound exceeds upper bound for some asset")
        if not (lb.sum() - 1e-12 <= self.budget <= ub.sum() + 1e-12):
            raise InvalidConfig(
                f"budget {self.budget} outside [{lb.sum()}, {ub.sum()}] implied by bounds"
            )
        return lb, ub


@dataclass
class ProblemSpec:
    objective: ObjectiveFunction
    risk_measure: RiskMeasure
    prior: Prior
    constraints: Constraints = field(default_factory=Constraints)
    l1_coef: float = 0.0
    l2_coef: float = 0.0
    risk_aversion: float = 1.0
    beta: float = DEFAULT_BETA
    frontier_size: int | None = None

    def __post_init__(self):
        if self.l1_coef < 0 or self.l2_coef < 0:
            raise InvalidConfig("regularization coefficients must be >= 0")
        if self.risk_aversion < 0:
            raise InvalidConfig("risk_aversion must be >= 0")
        if not 0 < self.beta < 1:
            raise InvalidConfig("beta must lie in (0, 1)")


@dataclass(frozen=True)
class FrontierPoint:
    weights: np.ndarray
    expected_return: float
    risk: float


def _optimization_measure(measure: RiskMeasure) -> RiskMeasure:
    # std dev has no epigraph; optimize variance (same argmin)
    if measure is RiskMeasure.STANDARD_DEVIATION:
        return RiskMeasure.VARIANCE
    return measure


def _add_risk_block(builder, spec, measure, w_idx):
    measure = _optimization_measure(measure)
    return reformulate_risk(
        builder,
        measure,
        spec.prior.scenarios if measure is not RiskMeasure.VARIANCE else None,
        w_idx,
        sigma=spec.prior.sigma if measure is RiskMeasure.VARIANCE else None,
        beta=spec.beta,
    )


def _add_regularization(builder, spec, w_idx, lb):
    """L2 as a quadratic term; L1 via |w| epigraph when shorting is allowed."""
    n = w_idx.size
    if spec.l2_coef > 0:
        builder.add_quadratic(w_idx, spec.l2_coef * np.eye(n))
    if spec.l1_coef > 0:
        if np.all(lb >= 0):
            warnings.warn(
                "l1_coef is a no-op for long-only portfolios (the L1 norm is "
                "fixed at the budget); ignoring",
                stacklevel=3,
            )
            return
        a = builder.add_variables(n, lb=0.0)
        for j in range(n):
            builder.add_ineq({int(w_idx[j]): 1.0, int(a[j]): -1.0}, 0.0)
            builder.add_ineq({int(w_idx[j]): -1.0, int(a[j]): -1.0}, 0.0)
        builder.add_cost({int(i): spec.l1_coef for i in a})


def _apply_risk_caps(builder, spec, w_idx, t_idx=None):
    for measure, bound in spec.constraints.risk_caps:
        measure = _optimization_measure(measure)
        if measure is RiskMeasure.VARIANCE:
            raise UnsupportedMeasure(
                "variance/std-dev risk caps need a quadratic constraint, which "
                "the LP/QP solver does not support; cap CVaR or MAD instead"
            )
        block = _add_risk_block(builder, spec, measure, w_idx)
        if t_idx is None:
            builder.add_expr_leq(block.risk_expr, float(bound))
        else:
            expr = LinExpr(dict(block.risk_expr.coeffs), block.risk_expr.const)
            expr.add(int(t_idx), -float(bound))
            builder.add_expr_leq(expr, 0.0)


def _raise_for_status(res, spec):
    if res.status == "Optimal":
        return
    if res.status == "Infeasible":
        detail = ""
        c = spec.constraints
        if c.min_return is not None:
            relaxed = ProblemSpec(
                objective=ObjectiveFunction.MAXIMIZE_RETURN,
                risk_measure=spec.risk_measure,
                prior=spec.prior,
                constraints=Constraints(
                    budget=c.budget, lower=c.lower, upper=c.upper,
                    max_weight_per_asset=c.max_weight_per_asset,
                    linear_A=c.linear_A, linear_b=c.linear_b,
                ),
                beta=spec.beta,
            )
            try:
                w = optimize(relaxed)
                r_max = float(spec.prior.mu @ w)
                if r_max < c.min_return - 1e-12:
                    detail = (
                        f": min_return={c.min_return} exceeds the maximum "
                        f"achievable return {r_max:.6g}"
                    )
            except (InfeasibleProblem, UnboundedProblem, SolverFailure):
                pass
        raise InfeasibleProblem(f"constraint set is infeasible{detail}")
    if res.status == "Unbounded":
        raise UnboundedProblem("objective unbounded over the feasible set")
    raise SolverFailure(
        f"solver stopped with status {res.status} after {res.iterations} iterations "
        f"(residuals {res.primal_residual:.2e}/{res.dual_residual:.2e})"
    )


def _build_standard(spec: ProblemSpec):
    """Shared assembly for the three non-ratio objectives."""
    prior = spec.prior
    n = prior.n_assets
    c = spec.constraints
    lb, ub = c.bounds(n, prior.assets)

    builder = ProblemBuilder()
    w_idx = builder.add_variables(n)
    for j in range(n):
        builder.set_bounds(int(w_idx[j]), lb=float(lb[j]), ub=float(ub[j]))
    builder.add_eq({int(i): 1.0 for i in w_idx}, c.budget)
    if c.linear_A is not None:
        A = np.atleast_2d(np.asarray(c.linear_A, dtype=float))
        b = np.asarray(c.linear_b, dtype=float).ravel()
        if A.shape != (b.size, n):
            raise DimensionMismatch(f"linear rows {A.shape} vs b {b.shape} on N={n}")
        for r in range(A.shape[0]):
            builder.add_ineq(
                {int(w_idx[j]): -float(A[r, j]) for j in range(n) if A[r, j] != 0.0},
                -float(b[r]),
            )
    if c.min_return is not None:
        builder.add_ineq(
            {int(w_idx[j]): -float(prior.mu[j]) for j in range(n)}, -float(c.min_return)
        )
    _apply_risk_caps(builder, spec, w_idx)
    _add_regularization(builder, spec, w_idx, lb)
    return builder, w_idx


def optimize(spec: ProblemSpec, settings: SolverSettings | None = None) -> np.ndarray:
    """Solve the spec's objective; returns weights on the budget hyperplane."""
    if spec.objective is ObjectiveFunction.MAXIMIZE_RATIO:
        return _optimize_ratio(spec, settings)

    prior = spec.prior
    builder, w_idx = _build_standard(spec)
    if spec.objective is ObjectiveFunction.MINIMIZE_RISK:
        block = _add_risk_block(builder, spec, spec.risk_measure, w_idx)
        if block.risk_expr is not None:
            builder.add_expr_cost(block.risk_expr)
        else:
            builder.add_quadratic(*block.quadratic)
    elif spec.objective is ObjectiveFunction.MAXIMIZE_RETURN:
        builder.add_cost({int(w_idx[j]): -float(prior.mu[j]) for j in range(prior.n_assets)})
    elif spec.objective is ObjectiveFunction.MAXIMIZE_UTILITY:
        builder.add_cost({int(w_idx[j]): -float(prior.mu[j]) for j in range(prior.n_assets)})
        block = _add_risk_block(builder, spec, spec.risk_measure, w_idx)
        if block.risk_expr is not None:
            builder.add_expr_cost(block.risk_expr, factor=spec.risk_aversion)
        else:
            builder.add_quadratic(block.quadratic[0], spec.risk_aversion * block.quadratic[1])
    else:  # pragma: no cover - enum is closed
        raise InvalidConfig(f"unknown objective {spec.objective}")

    res = solve(builder.build(), settings)
    _raise_for_status(res, spec)
    return res.x[w_idx].copy()


def _optimize_ratio(spec: ProblemSpec, settings: SolverSettings | None) -> np.ndarray:
    """Homogenized ratio maximization; see module notes.

    Degree-1 measures: maximize mu'y subject to risk(y) <= 1 plus the
    homogenized constraint cone. Variance / std dev: minimize y'Sigma y
    subject to mu'y = 1 (classic tangency form, reported ratio is
    mean over std dev). Recover w = y/t.
    """
    if spec.l1_coef > 0 or spec.l2_coef > 0:
        warnings.warn(
            "L1/L2 regularization is not scale-invariant and is ignored under "
            "MaximizeRatio",
            stacklevel=2,
        )
    prior = spec.prior
    n = prior.n_assets
    c = spec.constraints
    lb, ub = c.bounds(n, prior.assets)

    builder = ProblemBuilder()
    y_idx = builder.add_variables(n)
    t_var = builder.add_variables(1, lb=0.0)
    t = int(t_var[0])
    builder.add_eq({**{int(i): 1.0 for i in y_idx}, t: -c.budget}, 0.0)
    for j in range(n):
        if np.isfinite(lb[j]):
            builder.add_ineq({t: float(lb[j]), int(y_idx[j]): -1.0}, 0.0)
        if np.isfinite(ub[j]):
            builder.add_ineq({int(y_idx[j]): 1.0, t: -float(ub[j])}, 0.0)
    if c.linear_A is not None:
        A = np.atleast_2d(np.asarray(c.linear_A, dtype=float))
        b = np.asarray(c.linear_b, dtype=float).ravel()
        if A.shape != (b.size, n):
            raise DimensionMismatch(f"linear rows {A.shape} vs b {b.shape} on N={n}")
        for r in range(A.shape[0]):
            row = {int(y_idx[j]): -float(A[r, j]) for j in range(n) if A[r, j] != 0.0}
            row[t] = row.get(t, 0.0) + float(b[r])
            builder.add_ineq(row, 0.0)
    if c.min_return is not None:
        row = {int(y_idx[j]): -float(prior.mu[j]) for j in range(n)}
        row[t] = row.get(t, 0.0) + float(c.min_return)
        builder.add_ineq(row, 0.0)
    _apply_risk_caps(builder, spec, y_idx, t_idx=t)

    measure = _optimization_measure(spec.risk_measure)
    if measure is RiskMeasure.VARIANCE:
        builder.add_eq({int(y_idx[j]): float(prior.mu[j]) for j in range(n)}, 1.0)
        builder.add_quadratic(y_idx, prior.sigma)
    else:
        block = _add_risk_block(builder, spec, measure, y_idx)
        builder.add_expr_leq(block.risk_expr, 1.0)
        builder.add_cost({int(y_idx[j]): -float(prior.mu[j]) for j in range(n)})

    res = solve(builder.build(), settings)
    _raise_for_status(res, spec)
    t_val = float(res.x[t])
    if not np.isfinite(t_val) or t_val <= 1e-12:
        raise SolverFailure("ratio homogenization degenerate: scale variable vanished")
    return (res.x[y_idx] / t_val).copy()


def efficient_frontier(
    spec: ProblemSpec, size: int, settings: SolverSettings | None = None
) -> list[FrontierPoint]:
    """Sweep MinimizeRisk over `size` equally spaced return targets."""
    if size < 1:
        raise InvalidConfig("frontier size must be >= 1")
    prior = spec.prior
    c = spec.constraints

    def sub_spec(objective, min_return=None):
        cons = Constraints(
            budget=c.budget, lower=c.lower, upper=c.upper,
            max_weight_per_asset=c.max_weight_per_asset,
            linear_A=c.linear_A, linear_b=c.linear_b,
            min_return=min_return, risk_caps=list(c.risk_caps),
        )
        return ProblemSpec(
            objective=objective, risk_measure=spec.risk_measure, prior=prior,
            constraints=cons, l1_coef=spec.l1_coef, l2_coef=spec.l2_coef,
            risk_aversion=spec.risk_aversion, beta=spec.beta,
        )

    w_min = optimize(sub_spec(ObjectiveFunction.MINIMIZE_RISK), settings)
    r_min = float(prior.mu @ w_min)
    w_max = optimize(sub_spec(ObjectiveFunction.MAXIMIZE_RETURN), settings)
    r_max = float(prior.mu @ w_max)

    targets = np.linspace(r_min, r_max, size) if size > 1 else np.array([r_min])
    points: list[FrontierPoint] = []
    for target in targets:
        try:
            w = optimize(sub_spec(ObjectiveFunction.MINIMIZE_RISK, float(target)), settings)
        except (InfeasibleProblem, SolverFailure) as exc:
            warnings.warn(f"frontier point at target {target:.6g} dropped: {exc}",
                          stacklevel=2)
            continue
        points.append(FrontierPoint(
            weights=w,
            expected_return=float(prior.mu @ w),
            risk=portfolio_risk(w, spec),
        ))
    if not points:
        raise InfeasibleProblem("every frontier point was infeasible")
    return points


def portfolio_risk(weights: np.ndarray, spec: ProblemSpec) -> float:
    """Realized risk of `weights` under the spec's measure and prior."""
    if spec.risk_measure is RiskMeasure.VARIANCE:
        return float(weights @ spec.prior.sigma @ weights)
    if spec.risk_measure is RiskMeasure.STANDARD_DEVIATION:
        return float(np.sqrt(weights @ spec.prior.sigma @ weights))
    return measure_value(spec.prior.scenarios @ weights, spec.risk_measure, beta=spec.beta)


def predict(weights: np.ndarray, X: ReturnsMatrix, assets=(), name="portfolio") -> Portfolio:
    """Realized portfolio return series under fixed weights."""
    values = X.values if isinstance(X, ReturnsMatrix) else np.asarray(X, dtype=float)
    x_assets = tuple(X.assets) if isinstance(X, ReturnsMatrix) else ()
    if assets and x_assets and tuple(assets) != x_assets:
        raise AssetMismatch(f"weights cover {tuple(assets)} but data has {x_assets}")
    w = np.asarray(weights, dtype=float).ravel()
    if w.size != values.shape[1]:
        raise AssetMismatch(f"{w.size} weights vs {values.shape[1]} return columns")
    dates = tuple(X.dates) if isinstance(X, ReturnsMatrix) else ()
    return Portfolio(name=name, returns=values @ w, weights=w, dates=dates)


class MeanRisk(BaseEstimator):
    """Convex mean-risk optimizer with an estimator-style fit/predict API."""

    def __init__(
        self,
        objective: ObjectiveFunction = ObjectiveFunction.MINIMIZE_RISK,
        risk_measure: RiskMeasure = RiskMeasure.VARIANCE,
        prior_estimator=None,
        budget: float = 1.0,
        min_weights: float | np.ndarray = 0.0,
        max_weights: float | np.ndarray = 1.0,
        max_weight_per_asset: dict[str, float] | None = None,
        linear_A: np.ndarray | None = None,
        linear_b: np.ndarray | None = None,
        min_return: float | None = None,
        risk_caps: list[tuple[RiskMeasure, float]] | None = None,
        l1_coef: float = 0.0,
        l2_coef: float = 0.0,
        risk_aversion: float = 1.0,
        beta: float = DEFAULT_BETA,
    ):
        self.objective = objective
        self.risk_measure = risk_measure
        self.prior_estimator = prior_estimator
        self.budget = budget
        self.min_weights = min_weights
        self.max_weights = max_weights
        self.max_weight_per_asset = max_weight_per_asset
        self.linear_A = linear_A
        self.linear_b = linear_b
        self.min_return = min_return
        self.risk_caps = risk_caps
        self.l1_coef = l1_coef
        self.l2_coef = l2_coef
        self.risk_aversion = risk_aversion
        self.beta = beta

    def _spec(self, prior: Prior) -> ProblemSpec:
        constraints = Constraints(
            budget=self.budget, lower=self.min_weights, upper=self.max_weights,
            max_weight_per_asset=self.max_weight_per_asset,
            linear_A=self.linear_A, linear_b=self.linear_b,
            min_return=self.min_return, risk_caps=list(self.risk_caps or []),
        )
        return ProblemSpec(
            objective=self.objective, risk_measure=self.risk_measure, prior=prior,
            constraints=constraints, l1_coef=self.l1_coef, l2_coef=self.l2_coef,
            risk_aversion=self.risk_aversion, beta=self.beta,
        )

    def fit(self, X, factors=None):
        est = self.prior_estimator if self.prior_estimator is not None else EmpiricalPrior()
        self.prior_ = est.fit(X, factors=factors).prior_
        self.weights_ = optimize(self._spec(self.prior_))
        return self

    def predict(self, X) -> Portfolio:
        return predict(self.weights_, X, assets=self.prior_.assets,
                       name=type(self).__name__)
