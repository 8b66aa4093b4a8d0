"""Epigraph reformulations turning scenario risk measures into LP/QP blocks.

Each reformulation registers auxiliary variables and linear constraints on a
ProblemBuilder and returns the risk value as a linear expression (or a
quadratic term for variance). Minimizing that expression over the auxiliaries
with the weights held fixed reproduces the measures-module value exactly,
which is the central correctness property tested against the measures module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import UnsupportedMeasure
from .measures import DEFAULT_BETA, RiskMeasure
from .solver import QpProblem


@dataclass
class LinExpr:
    """Sparse linear expression Σ coeffs[i]·x_i + const."""

    coeffs: dict[int, float] = field(default_factory=dict)
    const: float = 0.0

    def add(self, index: int, coef: float) -> "LinExpr":
        self.coeffs[index] = self.coeffs.get(index, 0.0) + coef
        return self

    def scaled(self, factor: float) -> "LinExpr":
        return LinExpr({i: c * factor for i, c in self.coeffs.items()}, self.const * factor)


class ProblemBuilder:
    """Incrementally assemble a QpProblem with dynamically added variables."""

    def __init__(self, n_initial: int = 0):
        self.n = n_initial
        self._eq: list[tuple[dict[int, float], float]] = []
        self._ineq: list[tuple[dict[int, float], float]] = []  # Σ c x ≤ rhs
        self._quad: list[tuple[np.ndarray, np.ndarray]] = []  # (indices, M): adds xᵀMx
        self._cost: dict[int, float] = {}
        self._lb: dict[int, float] = {}
        self._ub: dict[int, float] = {}

    def add_variables(self, count: int, lb: float = -np.inf, ub: float = np.inf) -> np.ndarray:
        idx = np.arange(self.n, self.n + count)
        self.n += count
        for i in idx:
            if np.isfinite(lb):
                self._lb[int(i)] = lb
            if np.isfinite(ub):
                self._ub[int(i)] = ub
        return idx

    def set_bounds(self, index: int, lb: float = -np.inf, ub: float = np.inf):
        if np.isfinite(lb):
            self._lb[index] = lb
        else:
            self._lb.pop(index, None)
        if np.isfinite(ub):
            self._ub[index] = ub
        else:
            self._ub.pop(index, None)

    def add_eq(self, coeffs: dict[int, float], rhs: float):
        self._eq.append((dict(coeffs), rhs))

    def add_ineq(self, coeffs: dict[int, float], rhs: float):
        """Σ coeffs·x ≤ rhs"""
        self._ineq.append((dict(coeffs), rhs))

    def add_expr_leq(self, expr: LinExpr, rhs: float):
        self.add_ineq(expr.coeffs, rhs - expr.const)

    def add_cost(self, coeffs: dict[int, float]):
        for i, c in coeffs.items():
            self._cost[i] = self._cost.get(i, 0.0) + c

    def add_expr_cost(self, expr: LinExpr, factor: float = 1.0):
        self.add_cost({i: c * factor for i, c in expr.coeffs.items()})

    def add_quadratic(self, indices: np.ndarray, M: np.ndarray):
        """Adds xᵀ M x (no ½ factor) over the given variable block."""
        self._quad.append((np.asarray(indices, dtype=int), np.asarray(M, dtype=float)))

    @property
    def n_inequalities(self) -> int:
        return len(self._ineq)

    def build(self) -> QpProblem:
        n = self.n
        q = np.zeros(n)
        for i, c in self._cost.items():
            q[i] = c
        P = None
        if self._quad:
            P = np.zeros((n, n))
            for idx, M in self._quad:
                P[np.ix_(idx, idx)] += 2.0 * (M + M.T) / 2  # solver uses ½xᵀPx
        A_eq = b_eq = None
        if self._eq:
            A_eq = np.zeros((len(self._eq), n))
            b_eq = np.zeros(len(self._eq))
            for r, (coeffs, rhs) in enumerate(self._eq):
                for i, c in coeffs.items():
                    A_eq[r, i] = c
                b_eq[r] = rhs
        G = h = None
        if self._ineq:
            G = np.zeros((len(self._ineq), n))
            h = np.zeros(len(self._ineq))
            for r, (coeffs, rhs) in enumerate(self._ineq):
                for i, c in coeffs.items():
                    G[r, i] = c
                h[r] = rhs
        lb = np.full(n, -np.inf)
        ub = np.full(n, np.inf)
        for i, v in self._lb.items():
            lb[i] = v
        for i, v in self._ub.items():
            ub[i] = v
        return QpProblem(q=q, P=P, A_eq=A_eq, b_eq=b_eq, G=G, h=h, lb=lb, ub=ub)


@dataclass
class RiskBlock:
    """Handle on a reformulated risk measure inside a builder."""

    measure: RiskMeasure
    aux_indices: np.ndarray
    constraint_count: int
    risk_expr: LinExpr | None  # None for variance (quadratic)
    quadratic: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def aux_count(self) -> int:
        return self.aux_indices.size


def reformulate_risk(
    builder: ProblemBuilder,
    measure: RiskMeasure,
    scenarios: np.ndarray | None,
    w_idx: np.ndarray,
    sigma: np.ndarray | None = None,
    beta: float = DEFAULT_BETA,
) -> RiskBlock:
    """Register the epigraph block for `measure`; returns its risk expression.

    Scenario-based measures need `scenarios` (T×N); variance needs `sigma`.
    Drawdown-based blocks use uncompounded drawdowns (linear in w).
    """
    if measure is RiskMeasure.VARIANCE:
        if sigma is None:
            raise UnsupportedMeasure("variance reformulation requires sigma")
        return RiskBlock(
            measure=measure,
            aux_indices=np.arange(0),
            constraint_count=0,
            risk_expr=None,
            quadratic=(w_idx, np.asarray(sigma, dtype=float)),
        )
    if measure is RiskMeasure.STANDARD_DEVIATION:
        raise UnsupportedMeasure(
            "standard deviation has no LP/QP epigraph; optimize variance instead"
        )

    if scenarios is None:
        raise UnsupportedMeasure(f"{measure} requires scenario returns")
    S = np.asarray(scenarios, dtype=float)
    T = S.shape[0]
    n_before = builder.n_inequalities

    if measure is RiskMeasure.MEAN_ABSOLUTE_DEVIATION:
        mean_row = S.mean(axis=0)
        dev = S - mean_row  # r_t − mean, linear in w via (r_t − m)ᵀw
        u = builder.add_variables(T, lb=0.0)
        for t in range(T):
            row = {int(i): float(dev[t, j]) for j, i in enumerate(w_idx) if dev[t, j] != 0.0}
            # u_t ≥ (r_t − m)ᵀ w  →  (r_t − m)ᵀ w − u_t ≤ 0
            builder.add_ineq({**row, int(u[t]): -1.0}, 0.0)
            neg = {i: -c for i, c in row.items()}
            builder.add_ineq({**neg, int(u[t]): -1.0}, 0.0)
        expr = LinExpr({int(i): 1.0 / T for i in u})
        count = builder.n_inequalities - n_before + T  # + nonnegativity bounds
        return RiskBlock(measure, u, count, expr)

    if measure is RiskMeasure.CVAR:
        aux = builder.add_variables(1)  # alpha, free
        z = builder.add_variables(T, lb=0.0)
        alpha = int(aux[0])
        for t in range(T):
            row = {int(i): -float(S[t, j]) for j, i in enumerate(w_idx) if S[t, j] != 0.0}
            # z_t ≥ −r_tᵀw − α  →  −r_tᵀw − α − z_t ≤ 0
            builder.add_ineq({**row, alpha: -1.0, int(z[t]): -1.0}, 0.0)
        expr = LinExpr({alpha: 1.0})
        factor = 1.0 / ((1.0 - beta) * T)
        for i in z:
            expr.add(int(i), factor)
        count = builder.n_inequalities - n_before + T
        return RiskBlock(measure, np.concatenate([aux, z]), count, expr)

    if measure in (RiskMeasure.CDAR, RiskMeasure.MAX_DRAWDOWN):
        # Pairwise epigraph over drawdowns: dd_t = max_{s≤t} (C_s − C_t)ᵀ w,
        # expanded as one row per (s, t) pair. This keeps every auxiliary
        # uniquely determined at the optimum, which an operator-splitting
        # solver needs; the chained-peak alternative is heavily degenerate.
        # Row count is T(T+1)/2, so scenario counts are expected at desk scale.
        C = np.cumsum(S, axis=0)  # cumulative scenario returns, C_t ᵀ w linear
        if measure is RiskMeasure.MAX_DRAWDOWN:
            yv = builder.add_variables(1)
            yi = int(yv[0])
            for t in range(T):
                for s in range(t + 1):
                    diff = C[s] - C[t]
                    row = {int(i): float(diff[j]) for j, i in enumerate(w_idx) if diff[j] != 0.0}
                    # y ≥ (C_s − C_t)ᵀ w
                    builder.add_ineq({**row, yi: -1.0}, 0.0)
            builder.set_bounds(yi, lb=0.0)
            expr = LinExpr({yi: 1.0})
            count = builder.n_inequalities - n_before + 1
            return RiskBlock(measure, yv, count, expr)
        aux = builder.add_variables(1)  # alpha
        z = builder.add_variables(T, lb=0.0)
        alpha = int(aux[0])
        for t in range(T):
            for s in range(t + 1):
                diff = C[s] - C[t]
                row = {int(i): float(diff[j]) for j, i in enumerate(w_idx) if diff[j] != 0.0}
                # z_t ≥ (C_s − C_t)ᵀ w − α
                builder.add_ineq({**row, alpha: -1.0, int(z[t]): -1.0}, 0.0)
        expr = LinExpr({alpha: 1.0})
        factor = 1.0 / ((1.0 - beta) * T)
        for i in z:
            expr.add(int(i), factor)
        count = builder.n_inequalities - n_before + T
        return RiskBlock(measure, np.concatenate([aux, z]), count, expr)

    if measure is RiskMeasure.WORST_REALIZATION:
        yv = builder.add_variables(1)
        yi = int(yv[0])
        for t in range(T):
            row = {int(i): -float(S[t, j]) for j, i in enumerate(w_idx) if S[t, j] != 0.0}
            # y ≥ −r_tᵀw
            builder.add_ineq({**row, yi: -1.0}, 0.0)
        expr = LinExpr({yi: 1.0})
        count = builder.n_inequalities - n_before
        return RiskBlock(measure, yv, count, expr)

    raise UnsupportedMeasure(f"no reformulation for {measure}")
