from fractions import Fraction

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest

from pivot_vfl import fixedpoint as fp
from pivot_vfl.errors import ConfigError
from pivot_vfl.tree import (CLASSIFICATION, REGRESSION, TreeParams, cart_predict, cart_train, encode_labels,
                            encode_matrix, fixed_gains, gain_gini, gen_splits, gen_splits_float, gini,
                            predict_rows, variance)
from pivot_vfl.harness.data import synth, vsplit

F = fp.FRAC_BITS
TOL = Fraction(16, 1 << F)


def test_gen_splits_examples():
    assert gen_splits([5, 5, 5], 4) == []
    assert gen_splits_float([1.0, 2.0, 3.0, 4.0], 1) == [2.5]
    assert gen_splits(encode_matrix([1, 2, 3, 4]), 1) == [fp.encode(2.5)]
    col = [3, 1, 4, 1, 5, 9, 2, 6]
    assert len(gen_splits(col, 6)) == 6 and len(gen_splits(col, 50)) == 6
    assert gen_splits([0, 2, 4], 9) == [1, 3]


@given(st.lists(st.integers(-1000, 1000), min_size=1, max_size=60), st.integers(1, 12))
def test_gen_splits_bounds(col, b):
    ts = gen_splits(col, b)
    distinct = len(set(col))
    assert len(ts) <= min(b, distinct - 1)
    assert ts == sorted(set(ts))
    assert all(min(col) <= t < max(col) for t in ts)


def test_impurity_examples():
    assert gini([2, 2]) == Fraction(1, 2)
    assert gini([4, 0]) == 0
    assert gini([1, 1, 1, 1]) == Fraction(3, 4)
    # five samples, class 1 at positions 1, 3, 4; deposit split sends (1,2) left of (3,5)
    assert gain_gini([2, 2], [1, 1], [1, 1]) == 0
    assert gain_gini([2, 3], [2, 3], [0, 0]) == 0
    assert gain_gini([3, 2], [3, 0], [0, 2]) == gini([3, 2])
    assert variance(5 * 3, 25 * 3, 3) == 0
    assert variance(6, 14, 3) == Fraction(2, 3)
    assert variance(7, 49, 1) == 0


@settings(max_examples=300)
@given(st.lists(st.tuples(st.integers(0, 40), st.integers(0, 40)), min_size=2, max_size=4))
def test_gain_is_never_negative_beyond_quantisation(pairs):
    left = [a for a, _ in pairs]
    right = [b for _, b in pairs]
    parent = [a + b for a, b in pairs]
    if sum(parent) == 0:
        return
    assert gain_gini(parent, left, right) >= 0
    params = TreeParams(n_classes=len(pairs))
    (g,) = fixed_gains([(sum(left), sum(right), left, right)], (sum(parent), parent), params, sum(parent))
    if sum(left) and sum(right):
        assert Fraction(g, 1 << F) >= -TOL
        assert abs(Fraction(g, 1 << F) - gain_gini(parent, left, right)) <= TOL


def test_params_validation():
    with pytest.raises(ConfigError):
        TreeParams(task="ranking")
    with pytest.raises(ConfigError):
        TreeParams(n_classes=1)
    with pytest.raises(ConfigError):
        TreeParams(max_splits=0)


# -- exhaustive reference ------------------------------------------------------------

def exact_gain(y, mask, left, task, n_classes):
    yl, yr, yn = y[mask & left], y[mask & ~left], y[mask]
    if len(yl) == 0 or len(yr) == 0:
        return None
    if task == CLASSIFICATION:
        def counts(v):
            return [int((v == k).sum()) for k in range(n_classes)]
        return gain_gini(counts(yn), counts(yl), counts(yr))
    def var(v):
        return variance(sum(Fraction(int(a)) for a in v), sum(Fraction(int(a)) ** 2 for a in v), len(v))
    n = len(yn)
    return (var(yn) - Fraction(len(yl), n) * var(yl) - Fraction(len(yr), n) * var(yr)) / (1 << 2 * F)


def best_exact(x, y, mask, task, n_classes):
    best = None
    for j in range(x.shape[1]):
        vals = sorted(set(int(v) for v in x[mask, j]))
        for t in vals[:-1]:
            g = exact_gain(y, mask, x[:, j] <= t, task, n_classes)
            if g is not None and (best is None or g > best):
                best = g
    return best


def check_against_reference(model, x, y, params, tol):
    """Walk the oracle's tree; each split must be optimal up to ``tol``, each leaf justified."""
    cols = np.cumsum([0] + [p for p in params["dims"]])

    def walk(nid, mask):
        node = model.nodes[nid]
        yn = y[mask]
        best = best_exact(x, y, mask, params["task"], params["n_classes"])
        if node.leaf:
            pure = params["task"] == CLASSIFICATION and len(set(yn.tolist())) <= 1
            small = mask.sum() < model.params.min_split_samples
            assert (node.depth == model.params.max_depth or pure or small
                    or best is None or best <= tol)
            if params["task"] == CLASSIFICATION:
                counts = [int((yn == k).sum()) for k in range(params["n_classes"])]
                assert node.label == counts.index(max(counts))
            else:
                mean = Fraction(sum(int(v) for v in yn), len(yn))
                # the division recipe's relative bound, plus rounding of the operands
                assert abs(node.label - mean) <= abs(mean) / 1024 + 4
            return
        j = cols[node.party] + node.feature
        left = x[:, j] <= node.threshold
        got = exact_gain(y, mask, left, params["task"], params["n_classes"])
        assert got is not None and got >= best - tol and got > 0
        walk(node.left, mask & left)
        walk(node.right, mask & ~left)

    walk(0, np.ones(len(y), dtype=bool))


@pytest.mark.parametrize("seed", range(12))
def test_oracle_matches_exhaustive_reference_classification(seed):
    rng = np.random.default_rng(seed)
    n, d, c = int(rng.integers(10, 51)), int(rng.integers(1, 5)), int(rng.integers(2, 4))
    xf, yf = synth(n, d, c, CLASSIFICATION, seed)
    x, y = encode_matrix(xf), np.asarray(yf).astype(np.int64)
    parts = vsplit(x, min(d, 2))
    params = TreeParams(CLASSIFICATION, c, max_depth=3, max_splits=n, min_split_samples=2)
    model = cart_train(parts, y, params)
    check_against_reference(model, x, y, {"task": CLASSIFICATION, "n_classes": c,
                                          "dims": [p.shape[1] for p in parts]}, TOL)


@pytest.mark.parametrize("seed", range(6))
def test_oracle_matches_exhaustive_reference_regression(seed):
    rng = np.random.default_rng(100 + seed)
    n, d = int(rng.integers(10, 51)), int(rng.integers(1, 5))
    xf, yf = synth(n, d, 2, REGRESSION, seed)
    params = TreeParams(REGRESSION, max_depth=3, max_splits=n, min_split_samples=2)
    x, y = encode_matrix(xf), encode_labels(yf, params)
    parts = vsplit(x, min(d, 2))
    model = cart_train(parts, y, params)
    # regression gains are in squared label units, so quantisation scales with the label range
    spread = max(1, max(abs(float(v)) for v in yf)) ** 2
    check_against_reference(model, x, np.array([int(v) for v in y], dtype=object),
                            {"task": REGRESSION, "n_classes": 2, "dims": [p.shape[1] for p in parts]},
                            TOL * Fraction(spread).limit_denominator(1 << 20))


def test_prediction_walks_the_tree():
    x = encode_matrix([[1.0], [2.0], [3.0], [4.0], [5.0], [6.0]])
    y = np.array([0, 0, 0, 1, 1, 1])
    model = cart_train([x], y, TreeParams(max_depth=2, max_splits=5, min_split_samples=2))
    assert predict_rows(model, [x]) == y.tolist()
    assert cart_predict(model, [encode_matrix([3.4])]) == 0
    assert cart_predict(model, [encode_matrix([3.6])]) == 1


def test_training_is_deterministic():
    xf, yf = synth(80, 4, 3, CLASSIFICATION, 5)
    parts = vsplit(encode_matrix(xf), 2)
    a = cart_train(parts, np.asarray(yf, dtype=np.int64), TreeParams(n_classes=3))
    b = cart_train(parts, np.asarray(yf, dtype=np.int64), TreeParams(n_classes=3))
    assert a.structure() == b.structure() and [nd.label for nd in a.nodes] == [nd.label for nd in b.nodes]
