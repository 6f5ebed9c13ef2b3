import math

from hypothesis import given, settings, strategies as st
import numpy as np
import pytest
from scipy import stats

from pivot_vfl import fixedpoint as fp
from pivot_vfl.errors import ConfigError, DealerExhaustedError, ReconstructionError, ScaleError, TripleReuseError
from pivot_vfl.harness.transport import BEAVER, MASKED, REVEAL
from pivot_vfl.mpc import Q, Dealer, FieldParams, MPCEngine, Shared

F = fp.FRAC_BITS
ONE = 1 << F
values = st.integers(-(1 << 40), 1 << 40)


def rec(e, x):
    return [int(v) for v in e.reconstruct(x)]


def test_field_params_validation():
    with pytest.raises(ConfigError):
        FieldParams(q=2 ** 128 - 1)
    with pytest.raises(ConfigError):
        FieldParams(q=2 ** 61 - 1)


@settings(max_examples=50)
@given(st.lists(values, min_size=1, max_size=50))
def test_share_reconstruct(xs):
    e = MPCEngine(3, seed=1)
    assert rec(e, e.share(1, xs)) == xs


def test_share_zero_and_single_share_uniformity():
    e = MPCEngine(3, seed=2)
    x = e.share(0, [0] * 3)
    assert rec(e, x) == [0, 0, 0]
    sh = e.share(0, [12345] * 10000)
    # three parties tested at a family-wise level of 0.01
    for party in range(3):
        buckets = np.bincount([int(v) * 16 // Q for v in sh.sh[party]], minlength=16)
        assert stats.chisquare(buckets).pvalue > 0.01 / 3


def test_add_is_local_and_commutative():
    e = MPCEngine(3, seed=3)
    a, b = e.share(0, [5, -7, 11]), e.share(2, [3, 3, -20])
    before = e.counters.rounds
    assert rec(e, a + b) == rec(e, b + a) == [8, -4, -9]
    assert rec(e, a + 0) == [5, -7, 11]
    assert e.counters.rounds == before
    ones = e.share(1, [1] * 100)
    assert rec(e, ones.total()) == [100]


@settings(max_examples=30)
@given(st.lists(st.tuples(values, values), min_size=1, max_size=40))
def test_beaver_product_matches_floor(pairs):
    e = MPCEngine(3, seed=4)
    a = e.share(0, [p[0] for p in pairs], F)
    b = e.share(1, [p[1] for p in pairs], F)
    got = rec(e, e.mul(a, b))
    assert got == [(x * y) >> F for x, y in pairs]


def test_beaver_thousand_random_real_products():
    rng = np.random.default_rng(5)
    xs = rng.uniform(-100, 100, 1000)
    ys = rng.uniform(-100, 100, 1000)
    e = MPCEngine(3, seed=5)
    a = e.share(0, [fp.encode(v) for v in xs], F)
    b = e.share(2, [fp.encode(v) for v in ys], F)
    got = np.array([fp.to_float(v) for v in rec(e, e.mul(a, b))])
    exact = np.array([fp.to_float(fp.encode(x)) * fp.to_float(fp.encode(y)) for x, y in zip(xs, ys)])
    assert np.all(np.abs(got - exact) <= 2 ** -F)


def test_mul_identities():
    e = MPCEngine(3, seed=6)
    a = e.share(0, [fp.encode(v) for v in (1.5, -2.25, 7.0)], F)
    assert rec(e, e.mul(a, e.public([ONE] * 3, F))) == rec(e, a)
    assert rec(e, e.mul(a, e.public([0] * 3, F))) == [0, 0, 0]


def test_triple_reuse_is_rejected():
    e = MPCEngine(3, seed=7)
    a, b = e.share(0, [1, 2]), e.share(1, [3, 4])
    t = e.dealer.triples(2)
    e.mul(a, b, triple=t)
    with pytest.raises(TripleReuseError):
        e.mul(a, b, triple=t)


def test_dealer_budget_is_hard():
    d = Dealer(3, seed=1, budget={"triples": 5})
    e = MPCEngine(3, dealer=d)
    a = e.share(0, [1, 2, 3])
    e.mul(a, a)
    with pytest.raises(DealerExhaustedError):
        e.mul(a, a)


def test_dealer_is_deterministic():
    t1, t2 = Dealer(3, seed=9).triples(4), Dealer(3, seed=9).triples(4)
    assert np.array_equal(t1.a, t2.a) and np.array_equal(t1.c, t2.c)
    t = Dealer(3, seed=9).triples(50)
    assert all((int(a) * int(b) - int(c)) % Q == 0
               for a, b, c in zip(t.a.sum(axis=0), t.b.sum(axis=0), t.c.sum(axis=0)))


def test_missing_share_cannot_open():
    e = MPCEngine(3, seed=8)
    x = e.share(0, [4])
    with pytest.raises(ReconstructionError):
        e.open(Shared(x.sh[:2], 0, Q))
    with pytest.raises(ReconstructionError):
        e.from_shares([[1], [2]])


def test_scale_mismatch_is_an_error():
    e = MPCEngine(3, seed=8)
    with pytest.raises(ScaleError):
        e.share(0, [1], 0) + e.share(0, [1], F)


def test_cmp_exhaustive_grid():
    e = MPCEngine(3, seed=10)
    grid = range(-64, 65)
    a = [x for x in grid for _ in grid]
    b = [y for _ in grid for y in grid]
    got = rec(e, e.cmp(e.share(0, a, F), e.share(1, b, F)))
    assert got == [int(x > y) for x, y in zip(a, b)]


def test_cmp_random_pairs_and_examples():
    rng = np.random.default_rng(11)
    a = [int(v) for v in rng.integers(-(1 << 50), 1 << 50, 10000)]
    b = [int(v) for v in rng.integers(-(1 << 50), 1 << 50, 10000)]
    a[:100] = b[:100]
    e = MPCEngine(3, seed=11)
    got = rec(e, e.cmp(e.share(0, a), e.share(2, b)))
    assert got == [int(x > y) for x, y in zip(a, b)]
    x = e.share(0, [fp.encode(3.5)], F)
    assert rec(e, e.cmp(x, e.share(1, [fp.encode(-2.25)], F))) == [1]
    assert rec(e, e.cmp(x, x)) == [0]


@settings(max_examples=30)
@given(st.lists(st.integers(-(1 << 80), 1 << 80), min_size=1, max_size=20), st.integers(1, 60))
def test_trunc_is_exact_floor(xs, bits):
    e = MPCEngine(3, seed=12)
    assert rec(e, e.trunc(e.share(0, xs), bits)) == [x >> bits for x in xs]


def test_eq_and_select():
    e = MPCEngine(3, seed=13)
    a = e.share(0, [3, -4, 5, 0])
    b = e.share(1, [3, 4, -5, 0])
    assert rec(e, e.eq(a, b)) == [1, 0, 0, 1]
    bit = e.share(2, [1, 0, 1, 0])
    assert rec(e, e.select(bit, a, b)) == [3, 4, 5, 0]


def test_argmax_examples():
    e = MPCEngine(3, seed=14)
    vals = [e.share(0, [v]) for v in (1, 3, 2)]
    v, (p,) = e.argmax(vals, [[10], [20], [30]])
    assert rec(e, v) == [3] and rec(e, p) == [20]
    v, (p,) = e.argmax([e.share(0, [5])] * 3, [[10], [20], [30]])
    assert rec(e, p) == [10]
    v, (p,) = e.argmax([e.share(0, [-9])], [[7]])
    assert rec(e, v) == [-9] and rec(e, p) == [7]


@settings(max_examples=25)
@given(st.lists(st.integers(-20, 20), min_size=1, max_size=8))
def test_argmax_index_is_first_maximum(vals):
    e = MPCEngine(3, seed=15)
    _, (idx,) = e.argmax([e.share(1, [v]) for v in vals], [[r] for r in range(len(vals))])
    assert rec(e, idx) == [vals.index(max(vals))]


def test_div_matches_recipe_and_relative_bound():
    rng = np.random.default_rng(16)
    a = [fp.encode(v) for v in rng.uniform(-500, 500, 300)]
    b = [fp.encode(v) for v in rng.uniform(1, 1000, 300)]
    e = MPCEngine(3, seed=16)
    got = rec(e, e.div(e.share(0, a, F), e.share(1, b, F), 0, 10))
    assert got == [fp.div(x, y, 0, 10) for x, y in zip(a, b)]
    for x, y, g in zip(a, b, got):
        q = x / y
        if abs(q) >= 2 ** -5:
            assert abs(fp.to_float(g) - q) <= 2 ** -10 * abs(q)
    e = MPCEngine(3, seed=17)
    six = e.share(0, [fp.encode(6.0), fp.encode(2.5)], F)
    out = [fp.to_float(v) for v in rec(e, e.div(six, e.share(1, [fp.encode(3.0), ONE], F), 0, 4))]
    assert abs(out[0] - 2) <= 2 ** -14 and abs(out[1] - 2.5) <= 2 ** -14


def test_exp_matches_recipe_and_error_bound():
    xs = [fp.encode(v) for v in np.linspace(-16, 16, 97)] + [0, ONE]
    e = MPCEngine(3, seed=18)
    got = rec(e, e.exp(e.share(0, xs, F)))
    assert got == [fp.exp(x) for x in xs]
    assert got[-2] == ONE
    assert abs(fp.to_float(got[-1]) - math.e) <= 1e-3
    for x, g in zip(xs, got):
        if fp.to_float(x) >= -4:
            assert abs(fp.to_float(g) - math.exp(fp.to_float(x))) <= 1e-3 * math.exp(fp.to_float(x))


def test_ln_and_softmax_match_recipes():
    xs = [1, 7, 1000, ONE // 3, ONE - 1, ONE]
    e = MPCEngine(3, seed=19)
    assert rec(e, e.ln_unit(e.share(0, xs, F))) == [fp.ln_unit(x) for x in xs]
    scores = [[fp.encode(v) for v in row] for row in ((0.5, 2.0, -1.0), (3.0, 3.0, 3.0))]
    sh = [e.share(0, [scores[0][k], scores[1][k]], F) for k in range(3)]
    probs = [rec(e, p) for p in e.softmax(sh)]
    for r in range(2):
        assert [probs[k][r] for k in range(3)] == fp.softmax(scores[r])


def test_uniform_unit_is_odd_and_in_range():
    e = MPCEngine(3, seed=20)
    u = rec(e, e.uniform_unit(2000))
    assert all(v % 2 == 1 and 0 < v < 2 * ONE for v in u)
    assert stats.kstest(np.array(u) / (2 * ONE), "uniform").pvalue > 0.01


def test_only_masked_values_are_opened():
    e = MPCEngine(3, seed=21)
    secret = [123456789, -987654321, 424242424]
    a = e.share(0, secret, F)
    e.cmp(e.mul(a, a), a)
    e.div(e.share(1, [ONE * 3], F), e.share(2, [ONE * 2], F), 0, 4)
    kinds = {entry.kind for entry in e.transcript.entries}
    assert kinds <= {BEAVER, MASKED}
    assert REVEAL not in kinds
    opened = {int(v) for entry in e.transcript.entries for v in (entry.values or [])}
    assert not opened & ({v % Q for v in secret} | {(v * v >> F) % Q for v in secret})
