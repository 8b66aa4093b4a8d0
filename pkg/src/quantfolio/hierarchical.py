"""Non-convex allocators: HRP, NCO, stacking, and the two naive baselines."""

from __future__ import annotations

import numpy as np

from dataclasses import dataclass

from .base import BaseEstimator, clone
from .exceptions import EmptyCv, InvalidConfig, ZeroVarianceAsset
from .market_data import ReturnsMatrix
from .measures import DEFAULT_BETA, RiskMeasure, measure_value
from .model_selection import CpcvConfig, SplitPlan, cross_val_predict
from .priors import EmpiricalPrior, Prior, PriorEstimator


def corr_distance(sigma: np.ndarray) -> np.ndarray:
    """d_ij = sqrt((1 - rho_ij)/2); the canonical HRP distance."""
    sigma = np.asarray(sigma, dtype=float)
    d = np.diag(sigma)
    if np.any(d <= 0):
        raise ZeroVarianceAsset("covariance diagonal must be strictly positive")
    rho = sigma / np.sqrt(np.outer(d, d))
    rho = np.clip((rho + rho.T) / 2, -1.0, 1.0)
    dist = np.sqrt(np.clip((1.0 - rho) / 2.0, 0.0, None))
    np.fill_diagonal(dist, 0.0)
    return dist


@dataclass(frozen=True)
class Dendrogram:
    """Agglomerative merge tree: N-1 (node_a, node_b, height) triples.

    Leaves are 0..N-1; merge i creates node N+i. `leaf_order` is the seriation
    used by HRP's quasi-diagonalization.
    """

    merges: tuple[tuple[int, int, float], ...]
    leaf_order: tuple[int, ...]

    @property
    def n_leaves(self) -> int:
        return len(self.merges) + 1


def linkage_cluster(D: np.ndarray, method: str = "single") -> Dendrogram:
    """Agglomerative clustering with Lance-Williams updates.

    Ties are broken by the lowest cluster-id pair (i, then j). At each merge
    the child with the smaller mean distance to all other leaves is placed
    first, so the seriation depends only on the distances, never on how the
    leaves happen to be numbered; that keeps HRP permutation-equivariant.
    """
    if method not in ("single", "average", "ward"):
        raise InvalidConfig(f"unknown linkage method {method!r}")
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    if D.shape != (n, n):
        raise InvalidConfig("distance matrix must be square")
    if n == 1:
        return Dendrogram(merges=(), leaf_order=(0,))

    # ward operates on squared distances internally
    dist = {(i, j): (D[i, j] ** 2 if method == "ward" else D[i, j])
            for i in range(n) for j in range(i + 1, n)}
    row_mean = D.sum(axis=1) / (n - 1)  # orientation score, label-free
    sizes = {i: 1 for i in range(n)}
    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    active = list(range(n))
    merges = []
    next_id = n
    for _ in range(n - 1):
        best = None
        for ai in range(len(active)):
            for bi in range(ai + 1, len(active)):
                i, j = active[ai], active[bi]
                key = (i, j) if i < j else (j, i)
                d = dist[key]
                if best is None or d < best[0] - 1e-15 or (
                    abs(d - best[0]) <= 1e-15 and (i, j) < best[1:]
                ):
                    best = (d, i, j)
        d_best, a, b = best
        height = float(np.sqrt(d_best)) if method == "ward" else float(d_best)
        merges.append((a, b, height))
        new = next_id
        next_id += 1
        na, nb = sizes[a], sizes[b]
        for c in active:
            if c in (a, b):
                continue
            dac = dist[(min(a, c), max(a, c))]
            dbc = dist[(min(b, c), max(b, c))]
            if method == "single":
                dn = min(dac, dbc)
            elif method == "average":
                dn = (na * dac + nb * dbc) / (na + nb)
            else:
                nc = sizes[c]
                dn = ((na + nc) * dac + (nb + nc) * dbc - nc * d_best) / (na + nb + nc)
            dist[(c, new)] = dn
        active = [c for c in active if c not in (a, b)] + [new]
        sizes[new] = na + nb
        ma, mb = members[a], members[b]
        score_a = float(np.mean(row_mean[ma]))
        score_b = float(np.mean(row_mean[mb]))
        members[new] = ma + mb if score_a <= score_b else mb + ma
    return Dendrogram(merges=tuple(merges), leaf_order=tuple(members[next_id - 1]))


def cut_clusters(dendrogram: Dendrogram, k: int) -> np.ndarray:
    """Labels 0..k-1 obtained by undoing the last k-1 merges; label order
    follows the first leaf of each cluster."""
    n = dendrogram.n_leaves
    if not 1 <= k <= n:
        raise InvalidConfig(f"k={k} outside [1, {n}]")
    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    for idx, (a, b, _) in enumerate(dendrogram.merges[: n - k]):
        members[n + idx] = members.pop(a) + members.pop(b)
    clusters = sorted(members.values(), key=min)
    labels = np.zeros(n, dtype=int)
    for label, leaves in enumerate(clusters):
        labels[leaves] = label
    return labels


def silhouette_score(D: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette over samples, computed on a precomputed distance matrix."""
    D = np.asarray(D, dtype=float)
    labels = np.asarray(labels, dtype=int)
    n = labels.size
    uniq = np.unique(labels)
    if uniq.size < 2:
        raise InvalidConfig("silhouette needs at least 2 clusters")
    scores = np.zeros(n)
    for i in range(n):
        same = labels == labels[i]
        if same.sum() == 1:
            scores[i] = 0.0
            continue
        a = D[i, same & (np.arange(n) != i)].mean()
        b = min(D[i, labels == other].mean() for other in uniq if other != labels[i])
        scores[i] = (b - a) / max(a, b) if max(a, b) > 0 else 0.0
    return float(scores.mean())


def _side_risk(side, prior, risk_measure, beta):
    """Risk of a side's internal inverse-variance mini-portfolio."""
    sub_sigma = prior.sigma[np.ix_(side, side)]
    ivp = 1.0 / np.diag(sub_sigma)
    ivp /= ivp.sum()
    if risk_measure is RiskMeasure.VARIANCE:
        return float(ivp @ sub_sigma @ ivp)
    if risk_measure is RiskMeasure.STANDARD_DEVIATION:
        return float(np.sqrt(ivp @ sub_sigma @ ivp))
    series = prior.scenarios[:, side] @ ivp
    return measure_value(series, risk_measure, beta=beta)


def hrp(
    prior: Prior,
    risk_measure: RiskMeasure = RiskMeasure.VARIANCE,
    linkage: str = "single",
    beta: float = DEFAULT_BETA,
) -> np.ndarray:
    """Hierarchical Risk Parity: seriation plus recursive bisection."""
    n = prior.n_assets
    if n == 1:
        return np.ones(1)
    if np.any(np.diag(prior.sigma) <= 0):
        raise ZeroVarianceAsset("HRP needs strictly positive asset variances")
    tree = linkage_cluster(corr_distance(prior.sigma), method=linkage)
    order = list(tree.leaf_order)

    weights = np.ones(n)
    stack = [order]
    while stack:
        items = stack.pop()
        if len(items) < 2:
            continue
        mid = len(items) // 2
        left, right = items[:mid], items[mid:]
        risk_l = _side_risk(left, prior, risk_measure, beta)
        risk_r = _side_risk(right, prior, risk_measure, beta)
        total = risk_l + risk_r
        alpha = 1.0 - risk_l / total if total > 0 else 0.5
        weights[left] *= alpha
        weights[right] *= 1.0 - alpha
        stack.append(left)
        stack.append(right)
    return weights / weights.sum()


def equal_weighted(n: int) -> np.ndarray:
    if n < 1:
        raise InvalidConfig("need at least one asset")
    return np.full(n, 1.0 / n)


def inverse_volatility(prior: Prior) -> np.ndarray:
    d = np.diag(prior.sigma)
    if np.any(d <= 0):
        raise ZeroVarianceAsset("inverse volatility needs positive variances")
    w = 1.0 / np.sqrt(d)
    return w / w.sum()


def nco(
    X: ReturnsMatrix,
    inner=None,
    outer=None,
    k: int | str = "auto",
    linkage: str = "single",
) -> np.ndarray:
    """Nested Clustering Optimization: intra-cluster fits, then a reduced
    inter-cluster problem on the cluster return series."""
    from .mean_risk import MeanRisk  # local import to avoid a cycle

    values = X.values if isinstance(X, ReturnsMatrix) else np.asarray(X, dtype=float)
    n = values.shape[1]
    inner = inner if inner is not None else MeanRisk()
    outer = outer if outer is not None else MeanRisk()

    prior = EmpiricalPrior().fit(X).prior_
    if n < 2:
        raise InvalidConfig("NCO needs at least 2 assets")
    D = corr_distance(prior.sigma)
    tree = linkage_cluster(D, method=linkage)
    if k == "auto":
        candidates = range(2, min(10, n - 1) + 1)
        k = max(candidates,
                key=lambda kk: (silhouette_score(D, cut_clusters(tree, kk)), -kk))
    labels = cut_clusters(tree, int(k))
    n_clusters = int(labels.max()) + 1

    intra = np.zeros((n, n_clusters))
    for c in range(n_clusters):
        cols = np.flatnonzero(labels == c)
        if cols.size == 1:
            intra[cols[0], c] = 1.0
            continue
        sub = ReturnsMatrix(
            dates=X.dates, assets=tuple(X.assets[i] for i in cols),
            values=values[:, cols], kind=X.kind,
        ) if isinstance(X, ReturnsMatrix) else values[:, cols]
        est = clone(inner).fit(sub)
        intra[cols, c] = np.asarray(est.weights_, dtype=float)

    if n_clusters == 1:
        return intra[:, 0].copy()
    reduced_values = values @ intra
    reduced = ReturnsMatrix(
        dates=X.dates, assets=tuple(f"cluster_{c}" for c in range(n_clusters)),
        values=reduced_values, kind=X.kind,
    ) if isinstance(X, ReturnsMatrix) else reduced_values
    inter = np.asarray(clone(outer).fit(reduced).weights_, dtype=float)
    return intra @ inter


class _JitteredPrior(PriorEstimator):
    """Adds a tiny diagonal to the covariance so degenerate (identical-column)
    final-stage problems stay solvable."""

    def __init__(self, base=None, jitter: float = 1e-12):
        self.base = base
        self.jitter = jitter

    def fit(self, X, factors=None):
        base = self.base if self.base is not None else EmpiricalPrior()
        p = clone(base).fit(X, factors=factors).prior_
        self.prior_ = Prior(
            mu=p.mu, sigma=p.sigma + self.jitter * np.eye(p.n_assets),
            scenarios=p.scenarios, assets=p.assets, source=p.source,
        )
        return self


def stacking(
    estimators: list[tuple[str, object]],
    final_estimator,
    X: ReturnsMatrix,
    cv,
    n_jobs: int = 1,
) -> np.ndarray:
    """Stacked allocation: out-of-sample base series feed the final stage.

    `cv` is a SplitPlan or a config object with .plan(T). CPCV plans yield one
    series per path; paths are averaged into a single out-of-sample series per
    base. The output is sum_k c_k * w_k rescaled to sum to 1.
    """
    from .mean_risk import MeanRisk  # local import to avoid a cycle

    if not estimators:
        raise InvalidConfig("stacking needs at least one base estimator")
    plan = cv if isinstance(cv, SplitPlan) else cv.plan(X.n_periods)
    if plan.n_splits == 0:
        raise EmptyCv("stacking cv plan is empty")

    oos_columns = []
    dates = None
    for name, est in estimators:
        result = cross_val_predict(est, X, plan, n_jobs=n_jobs, name=name)
        if isinstance(result, list):
            series = np.mean([p.returns for p in result], axis=0)
            dates = result[0].dates
        else:
            series = result.returns
            dates = result.dates
        oos_columns.append(series)
    synthetic = ReturnsMatrix(
        dates=dates, assets=tuple(name for name, _ in estimators),
        values=np.column_stack(oos_columns), kind="simple",
    )

    final = clone(final_estimator)
    if isinstance(final, MeanRisk):
        final.prior_estimator = _JitteredPrior(final.prior_estimator)
    c = np.asarray(final.fit(synthetic).weights_, dtype=float)

    base_weights = np.column_stack([
        np.asarray(clone(est).fit(X).weights_, dtype=float) for _, est in estimators
    ])
    w = base_weights @ c
    return w / w.sum()


_DEFAULT_STACKING_CV = CpcvConfig(k=5, p=1, purge_horizon=1, embargo_fraction=0.01)


class EqualWeighted(BaseEstimator):
    def fit(self, X, factors=None):
        values = X.values if isinstance(X, ReturnsMatrix) else np.asarray(X, dtype=float)
        self.weights_ = equal_weighted(values.shape[1])
        return self

    def predict(self, X):
        from .mean_risk import predict as _predict
        return _predict(self.weights_, X, name=type(self).__name__)


class InverseVolatility(BaseEstimator):
    def __init__(self, prior_estimator=None):
        self.prior_estimator = prior_estimator

    def fit(self, X, factors=None):
        est = self.prior_estimator if self.prior_estimator is not None else EmpiricalPrior()
        self.prior_ = clone(est).fit(X, factors=factors).prior_
        self.weights_ = inverse_volatility(self.prior_)
        return self

    def predict(self, X):
        from .mean_risk import predict as _predict
        return _predict(self.weights_, X, name=type(self).__name__)


class HierarchicalRiskParity(BaseEstimator):
    def __init__(self, risk_measure: RiskMeasure = RiskMeasure.VARIANCE,
                 linkage: str = "single", prior_estimator=None,
                 beta: float = DEFAULT_BETA):
        self.risk_measure = risk_measure
        self.linkage = linkage
        self.prior_estimator = prior_estimator
        self.beta = beta

    def fit(self, X, factors=None):
        est = self.prior_estimator if self.prior_estimator is not None else EmpiricalPrior()
        self.prior_ = clone(est).fit(X, factors=factors).prior_
        self.weights_ = hrp(self.prior_, risk_measure=self.risk_measure,
                            linkage=self.linkage, beta=self.beta)
        return self

    def predict(self, X):
        from .mean_risk import predict as _predict
        return _predict(self.weights_, X, name=type(self).__name__)


class NestedClustersOptimization(BaseEstimator):
    def __init__(self, inner_estimator=None, outer_estimator=None,
                 k: int | str = "auto", linkage: str = "single"):
        self.inner_estimator = inner_estimator
        self.outer_estimator = outer_estimator
        self.k = k
        self.linkage = linkage

    def fit(self, X, factors=None):
        self.weights_ = nco(X, inner=self.inner_estimator, outer=self.outer_estimator,
                            k=self.k, linkage=self.linkage)
        return self

    def predict(self, X):
        from .mean_risk import predict as _predict
        return _predict(self.weights_, X, name=type(self).__name__)


class StackingOptimization(BaseEstimator):
    def __init__(self, estimators=None, final_estimator=None,
                 cv=_DEFAULT_STACKING_CV, n_jobs: int = 1):
        self.estimators = estimators
        self.final_estimator = final_estimator
        self.cv = cv
        self.n_jobs = n_jobs

    def fit(self, X, factors=None):
        from .mean_risk import MeanRisk
        if not self.estimators:
            raise InvalidConfig("StackingOptimization needs base estimators")
        final = self.final_estimator if self.final_estimator is not None else MeanRisk()
        self.weights_ = stacking(self.estimators, final, X, self.cv, n_jobs=self.n_jobs)
        return self

    def predict(self, X):
        from .mean_risk import predict as _predict
        return _predict(self.weights_, X, name=type(self).__name__)
