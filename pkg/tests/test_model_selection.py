import numpy as np
import pytest

from quantfolio.analytics import MultiPeriodPortfolio
from quantfolio.exceptions import EmptyCv, InvalidConfig
from quantfolio.hierarchical import EqualWeighted, InverseVolatility
from quantfolio.model_selection import (
    CpcvConfig,
    SplitPlan,
    WalkForwardConfig,
    cpcv,
    cross_val_predict,
    walk_forward,
)

from conftest import make_returns


def test_walk_forward_exact_ranges():
    # [DERIVED] T=372, train 252, test 60: splits at [0,252)/[252,312)
    # and [60,312)/[312,372); no third split fits
    plan = walk_forward(372, 252, 60)
    assert plan.n_splits == 2
    tr0, te0 = plan.splits[0]
    tr1, te1 = plan.splits[1]
    np.testing.assert_array_equal(tr0, np.arange(0, 252))
    np.testing.assert_array_equal(te0, np.arange(252, 312))
    np.testing.assert_array_equal(tr1, np.arange(60, 312))
    np.testing.assert_array_equal(te1, np.arange(312, 372))


def test_walk_forward_expanding():
    plan = walk_forward(372, 252, 60, expanding=True)
    assert plan.n_splits == 2
    np.testing.assert_array_equal(plan.splits[1][0], np.arange(0, 312))


def test_walk_forward_no_room_warns_and_returns_empty():
    with pytest.warns(UserWarning, match="too short"):
        plan = walk_forward(100, 90, 20)
    assert plan.n_splits == 0
    with pytest.raises(InvalidConfig):
        walk_forward(100, 0, 20)


def test_walk_forward_test_sets_partition_tail():
    plan = walk_forward(500, 100, 70)
    covered = np.concatenate([te for _, te in plan.splits])
    assert covered[0] == 100
    np.testing.assert_array_equal(covered, np.arange(100, 100 + covered.size))
    assert covered.size == ((500 - 100) // 70) * 70


def test_cpcv_counts():
    # [DERIVED] k=10, p=2: C(10,2)=45 splits, each fold under test in
    # C(9,1)=9 of them, giving 9 reconstructed paths
    cfg = CpcvConfig(k=10, p=2, purge_horizon=0, embargo_fraction=0.0)
    assert cfg.n_splits == 45
    assert cfg.n_paths == 9
    plan = cpcv(450, cfg)
    assert plan.n_splits == 45
    assert plan.n_paths == 9
    counts = np.zeros(10, dtype=int)
    for blocks in plan.test_folds:
        for fold_id, _ in blocks:
            counts[fold_id] += 1
    np.testing.assert_array_equal(counts, np.full(10, 9))


def test_cpcv_paths_cover_every_fold_once():
    cfg = CpcvConfig(k=6, p=2, purge_horizon=0, embargo_fraction=0.0)
    plan = cpcv(120, cfg)
    # for each path, every fold appears exactly once
    per_path = {}
    for (split, fold), path in plan.path_of.items():
        per_path.setdefault(path, []).append(fold)
    assert len(per_path) == cfg.n_paths
    for folds in per_path.values():
        assert sorted(folds) == list(range(6))


def test_cpcv_purge_and_embargo_audit():
    # [DERIVED] T=500, k=10, p=2, purge 3, embargo 0.02 -> 10 embargo rows
    cfg = CpcvConfig(k=10, p=2, purge_horizon=3, embargo_fraction=0.02)
    plan = cpcv(500, cfg)
    embargo = int(0.02 * 500)
    for train, test in plan.splits:
        train_set = set(train.tolist())
        assert not train_set & set(test.tolist())
        # no train index within the purge window before each test block or
        # the embargo window after it
        t_lo, t_hi = test.min(), test.max()
        for idx in train:
            assert not (t_lo - 3 <= idx < t_lo)
            assert not (t_hi < idx <= t_hi + embargo)


def test_cpcv_config_validation():
    with pytest.raises(InvalidConfig):
        CpcvConfig(k=2, p=2)
    with pytest.raises(InvalidConfig):
        CpcvConfig(k=5, p=0)
    with pytest.raises(InvalidConfig):
        CpcvConfig(k=5, p=1, embargo_fraction=1.5)


def test_split_plan_json_roundtrip():
    plan = cpcv(200, CpcvConfig(k=5, p=2, purge_horizon=2, embargo_fraction=0.01))
    text = plan.to_json()
    back = SplitPlan.from_json(text)
    assert back.n_splits == plan.n_splits
    assert back.n_paths == plan.n_paths
    for (a_tr, a_te), (b_tr, b_te) in zip(plan.splits, back.splits):
        np.testing.assert_array_equal(a_tr, b_tr)
        np.testing.assert_array_equal(a_te, b_te)
    assert back.path_of == plan.path_of


def test_config_plan_helpers():
    assert WalkForwardConfig(train_size=50, test_size=25).plan(100).n_splits == 2
    assert CpcvConfig(k=4, p=2).plan(100).n_splits == 6


def test_cross_val_predict_walk_forward(rng):
    X = make_returns(rng.normal(0.0005, 0.01, (372, 4)))
    plan = walk_forward(372, 252, 60)
    result = cross_val_predict(EqualWeighted(), X, plan)
    assert isinstance(result, MultiPeriodPortfolio)
    assert result.n_periods == 120
    np.testing.assert_allclose(result.returns, X.values[252:].mean(axis=1), atol=1e-15)
    assert len(result.segments) == 2


def test_cross_val_predict_cpcv_paths(rng):
    X = make_returns(rng.normal(0.0005, 0.01, (120, 3)))
    plan = cpcv(120, CpcvConfig(k=4, p=2, purge_horizon=0, embargo_fraction=0.0))
    result = cross_val_predict(InverseVolatility(), X, plan)
    assert isinstance(result, list)
    assert len(result) == 3
    for path in result:
        assert path.n_periods == 120  # every path covers all folds


def test_cross_val_predict_thread_count_is_neutral(rng):
    X = make_returns(rng.normal(0.0005, 0.01, (200, 4)))
    plan = cpcv(200, CpcvConfig(k=5, p=2, purge_horizon=1, embargo_fraction=0.01))
    seq = cross_val_predict(InverseVolatility(), X, plan, n_jobs=1)
    par = cross_val_predict(InverseVolatility(), X, plan, n_jobs=4)
    for a, b in zip(seq, par):
        np.testing.assert_array_equal(a.returns, b.returns)


def test_cross_val_predict_empty_plan(rng):
    X = make_returns(rng.normal(0, 0.01, (30, 2)))
    with pytest.raises(EmptyCv):
        cross_val_predict(EqualWeighted(), X, SplitPlan())


def test_cross_val_predict_error_names_split(rng):
    class Boom(EqualWeighted):
        def fit(self, X, factors=None):
            raise ValueError("nope")

    X = make_returns(rng.normal(0, 0.01, (100, 2)))
    plan = walk_forward(100, 50, 25)
    with pytest.raises(ValueError, match="split 0"):
        cross_val_predict(Boom(), X, plan)
