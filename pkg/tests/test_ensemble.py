import numpy as np
import pytest

from pivot_vfl import ensemble as ens
from pivot_vfl import fixedpoint as fp
from pivot_vfl.errors import ConfigError
from pivot_vfl.harness.transport import REVEAL
from pivot_vfl.protocol.predict import predict_basic
from pivot_vfl.tree import CLASSIFICATION, REGRESSION, TreeParams, cart_predict

from conftest import dataset, decrypt_all, make_fed

F = fp.FRAC_BITS
SMALL = dict(max_depth=2, max_splits=3, min_split_samples=5)


def trees_equal(a, b):
    return a.structure() == b.structure() and [nd.label for nd in a.nodes] == [nd.label for nd in b.nodes]


def rows(parts):
    return [[p[r] for p in parts] for r in range(len(parts[0]))]


@pytest.mark.parametrize("task", [CLASSIFICATION, REGRESSION])
def test_forest_matches_plain_twin(task):
    params = TreeParams(task, 3 if task == CLASSIFICATION else 2, **SMALL)
    parts, y = dataset(50, 4, task=task, n_classes=params.n_classes, seed=1, params=params)
    forest = ens.ForestParams(n_trees=3, max_features="sqrt", seed=4)
    fed = make_fed(parts, y, seed=1)
    got = ens.rf_train(fed, params, forest)
    want = ens.rf_train_plain(parts, y, params, forest)
    assert all(trees_equal(a, b) for a, b in zip(got.trees, want.trees))
    for r in rows(parts)[:15]:
        assert ens.rf_predict(fed, got, r) == ens.rf_predict_plain(want, r)


def test_forest_plans_are_seeded_bootstraps():
    a = ens.rf_plan(30, [2, 3], ens.ForestParams(5, "sqrt", 9))
    b = ens.rf_plan(30, [2, 3], ens.ForestParams(5, "sqrt", 9))
    assert all(np.array_equal(x.membership, y.membership) and x.feature_masks == y.feature_masks
               for x, y in zip(a, b))
    assert all(sum(len(m) for m in p.feature_masks) == 2 for p in a)
    assert all(set(np.unique(p.membership)) <= {0, 1} for p in a)


def test_single_tree_forest_equals_the_tree():
    params = TreeParams(**SMALL)
    parts, y = dataset(40, 3, seed=2)
    fed = make_fed(parts, y, seed=2)
    forest = ens.rf_train(fed, params, ens.ForestParams(1, "all", 0))
    for r in rows(parts)[:8]:
        assert ens.rf_predict(fed, forest, r) == predict_basic(fed, forest.trees[0], r)


def test_params_validation():
    with pytest.raises(ConfigError):
        ens.ForestParams(n_trees=0)
    with pytest.raises(ConfigError):
        ens.BoostParams(learning_rate=0)
    with pytest.raises(ConfigError):
        ens.BoostParams(n_rounds=0)


def test_residual_update_examples():
    fed = make_fed([np.zeros((3, 1), dtype=np.int64)] * 3)
    y = [fp.encode(v) for v in (1.5, -0.25, 3.0)]
    enc_y = fed.encrypt(0, y, F)
    zero = fed.encrypt(0, [0, 0, 0], F)
    step = ens._rescale(fed, [fed.mul_plain(0.1, c, F) for c in zero], F, "step")
    assert decrypt_all(fed, fed.vsub(enc_y, step)) == y
    step = ens._rescale(fed, [fed.mul_plain(1.0, c, F) for c in enc_y], F, "step")
    assert decrypt_all(fed, fed.vsub(enc_y, step)) == [0, 0, 0]
    sq = ens._enc_square(fed, enc_y)
    assert decrypt_all(fed, sq) == [v * v for v in y] and sq[0].scale == 2 * F


def test_encrypted_softmax_examples():
    fed = make_fed([np.zeros((2, 1), dtype=np.int64)] * 3)
    scores = [fed.encrypt(0, [fp.encode(0.7), fp.encode(16.0)], F), fed.encrypt(0, [fp.encode(0.7), 0], F)]
    p0, p1 = (decrypt_all(fed, p) for p in ens._enc_softmax(fed, scores))
    assert abs(fp.to_float(p0[0]) - 0.5) < 1e-3 and abs(fp.to_float(p1[0]) - 0.5) < 1e-3
    assert fp.to_float(p0[1]) > 0.99
    assert all(abs(fp.to_float(a + b) - 1) <= 1e-3 for a, b in zip(p0, p1))


def test_gbdt_regression_matches_plain_twin_and_hides_residuals():
    params = TreeParams(REGRESSION, **SMALL)
    parts, y = dataset(40, 3, task=REGRESSION, seed=3, params=params)
    boost = ens.BoostParams(3, 0.1)
    fed = make_fed(parts, y, seed=3)
    got = ens.gbdt_train(fed, params, boost)
    want = ens.gbdt_train_plain(parts, y, params, boost)
    assert len(got.trees) == 3 and all(len(r) == 1 for r in got.trees)
    for rg, rw in zip(got.trees, want.trees):
        assert rg[0].structure() == rw[0].structure()
        assert all(abs(a.label - b.label) <= 8 for a, b in zip(rg[0].leaves(), rw[0].leaves()))
    reveals = fed.transcript.reveals()
    assert {e.tag for e in reveals} <= {"prune", "gain", "split", "leaf"}
    # the only label-derived values opened are leaf means, one per leaf
    n_leaves = sum(len(r[0].leaves()) for r in got.trees)
    assert sum(e.count for e in reveals if e.tag == "leaf") == n_leaves
    preds = ens.gbdt_predict(fed, got, rows(parts)[:10])
    plain = ens.gbdt_predict_plain(want, rows(parts)[:10])
    assert all(abs(a - b) <= 8 * len(got.trees) for a, b in zip(preds, plain))


def test_gbdt_classification_trains_rounds_times_classes_trees():
    params = TreeParams(CLASSIFICATION, 3, **SMALL)
    parts, y = dataset(30, 3, n_classes=3, seed=4)
    boost = ens.BoostParams(2, 0.5)
    fed = make_fed(parts, y, seed=4)
    got = ens.gbdt_train(fed, params, boost)
    want = ens.gbdt_train_plain(parts, y, params, boost)
    assert sum(len(r) for r in got.trees) == 2 * 3
    for rg, rw in zip(got.trees, want.trees):
        for a, b in zip(rg, rw):
            assert a.structure() == b.structure()
    sample = rows(parts)[:6]
    assert ens.gbdt_predict(fed, got, sample) == ens.gbdt_predict_plain(want, sample)


def test_single_round_regression_is_the_scaled_tree():
    params = TreeParams(REGRESSION, **SMALL)
    parts, y = dataset(30, 3, task=REGRESSION, seed=5, params=params)
    boost = ens.BoostParams(1, 1.0)
    fed = make_fed(parts, y, seed=5)
    got = ens.gbdt_train(fed, params, boost)
    r = rows(parts)[:5]
    assert ens.gbdt_predict(fed, got, r) == [cart_predict(got.trees[0][0], x) for x in r]
    assert all(e.kind != REVEAL or e.tag in ("prune", "gain", "split", "leaf", "prediction")
               for e in fed.transcript.entries)
