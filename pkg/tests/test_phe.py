from fractions import Fraction
import random

from hypothesis import given, settings, strategies as st
import pytest

from pivot_vfl import phe
from pivot_vfl.errors import CombinationError, ConfigError, EncodingError, ScaleError, ThresholdError

from conftest import shared_keys

PK, KEYS = shared_keys(3)
RNG = random.Random(0)
BOUND = 1 << 60
ints = st.integers(-BOUND, BOUND)


def dec(c):
    return phe.decrypt(PK, c, KEYS)


def enc(x, scale=0):
    return phe.encrypt_int(PK, x, scale, RNG)


def test_keygen_structure():
    assert PK.n.bit_length() >= 256
    assert len(KEYS) == 3
    assert [k.index for k in KEYS] == [0, 1, 2]


def test_keygen_rejects_small_or_untested_keys():
    with pytest.raises(ConfigError):
        phe.keygen(128, 3, seed=1, test_mode=True)
    with pytest.raises(ConfigError):
        phe.keygen(512, 3, seed=1)
    with pytest.raises(ConfigError):
        phe.keygen(256, 1, seed=1, test_mode=True)


def test_keygen_is_deterministic_under_seed():
    a, ka = phe.keygen(256, 3, seed=42, test_mode=True)
    b, kb = phe.keygen(256, 3, seed=42, test_mode=True)
    assert a.n == b.n and [k.exponent for k in ka] == [k.exponent for k in kb]


@settings(max_examples=1000)
@given(ints)
def test_roundtrip(x):
    assert phe.decrypt_int(PK, enc(x), KEYS) == x


@settings(max_examples=1000)
@given(ints, ints)
def test_add_homomorphism(a, b):
    assert phe.decrypt_int(PK, phe.add_hom(PK, enc(a), enc(b)), KEYS) == a + b


@settings(max_examples=300)
@given(ints, ints)
def test_sub_homomorphism(a, b):
    assert phe.decrypt_int(PK, phe.sub_hom(PK, enc(a), enc(b)), KEYS) == a - b


@settings(max_examples=1000)
@given(st.integers(-(1 << 30), 1 << 30), st.integers(-(1 << 30), 1 << 30))
def test_scalar_homomorphism(k, a):
    assert phe.decrypt_int(PK, phe.mul_plain(PK, k, enc(a)), KEYS) == k * a


@settings(max_examples=200)
@given(st.lists(st.tuples(st.integers(-1000, 1000), st.integers(-1000, 1000)), min_size=1, max_size=32))
def test_dot_equals_fold_of_scalar_and_add(pairs):
    xs = [p[0] for p in pairs]
    cs = [enc(p[1]) for p in pairs]
    folded = phe.mul_plain(PK, xs[0], cs[0])
    for x, c in zip(xs[1:], cs[1:]):
        folded = phe.add_hom(PK, folded, phe.mul_plain(PK, x, c))
    want = sum(x * p[1] for x, p in zip(xs, pairs))
    assert phe.decrypt_int(PK, phe.dot_hom(PK, xs, cs), KEYS) == want
    assert phe.decrypt_int(PK, folded, KEYS) == want


def test_examples():
    assert dec(phe.encrypt(PK, 0, rng=RNG)) == 0
    assert dec(phe.encrypt(PK, -1.5, rng=RNG)) == Fraction(-3, 2)
    a, b = phe.encrypt(PK, 3.25, rng=RNG), phe.encrypt(PK, 3.25, rng=RNG)
    assert a.value != b.value
    assert dec(phe.add_hom(PK, phe.encrypt(PK, 2.5, rng=RNG), phe.encrypt(PK, -1.25, rng=RNG))) == Fraction(5, 4)
    x = enc(9)
    assert phe.decrypt_int(PK, phe.add_hom(PK, enc(0), x), KEYS) == 9
    assert phe.decrypt_int(PK, phe.sum_hom(PK, [enc(1) for _ in range(25)]), KEYS) == 25
    assert phe.decrypt_int(PK, phe.mul_plain(PK, 1, x), KEYS) == 9
    assert phe.decrypt_int(PK, phe.mul_plain(PK, 0, x), KEYS) == 0
    assert phe.decrypt_int(PK, phe.mul_plain(PK, 3, enc(-2)), KEYS) == -6
    assert phe.decrypt_int(PK, phe.dot_hom(PK, [1, 0, 1, 0, 0], [enc(v) for v in (1, 0, 1, 0, 0)]), KEYS) == 2
    assert phe.decrypt_int(PK, phe.dot_hom(PK, [0] * 4, [enc(v) for v in (3, 1, 4, 1)]), KEYS) == 0


def test_random_binary_dot_products():
    rng = random.Random(3)
    for _ in range(20):
        xs = [rng.randint(0, 1) for _ in range(8)]
        ys = [rng.randint(0, 1) for _ in range(8)]
        got = phe.decrypt_int(PK, phe.dot_hom(PK, xs, [enc(y) for y in ys]), KEYS)
        assert got == sum(a * b for a, b in zip(xs, ys))


def test_fixed_point_scales_add_up():
    c = phe.mul_plain(PK, 0.5, phe.encrypt(PK, 3.0, rng=RNG), scale=16)
    assert c.scale == 32
    assert dec(c) == Fraction(3, 2)


def test_full_threshold():
    c = enc(7)
    partials = [phe.partial_decrypt(c, k) for k in KEYS]
    assert phe.combine_int(PK, c, partials, 3) == 7
    for drop in range(3):
        with pytest.raises(ThresholdError):
            phe.combine_int(PK, c, partials[:drop] + partials[drop + 1:], 3)


def test_combination_errors():
    c1, c2 = enc(7), enc(8)
    p1 = [phe.partial_decrypt(c1, k) for k in KEYS]
    p2 = [phe.partial_decrypt(c2, k) for k in KEYS]
    with pytest.raises(CombinationError):
        phe.combine_int(PK, c1, [p1[0], p2[1], p1[2]], 3)
    with pytest.raises(CombinationError):
        phe.combine_int(PK, c1, [p1[0], p1[0], p1[1]], 3)
    other_pk, other_keys = shared_keys(3, seed=99)
    foreign = phe.partial_decrypt(c1, other_keys[1])
    with pytest.raises(CombinationError):
        phe.combine_int(PK, c1, [p1[0], foreign, p1[2]], 3)


def test_encoding_overflow():
    with pytest.raises(EncodingError):
        enc(1 << PK.max_bits)


def test_scale_mismatch():
    with pytest.raises(ScaleError):
        phe.add_hom(PK, enc(1, 0), enc(1, 16))


def test_rerandomize_keeps_plaintext():
    c = enc(-11)
    d = phe.rerandomize(PK, c, RNG)
    assert d.value != c.value
    assert phe.decrypt_int(PK, d, KEYS) == -11


def test_key_files_roundtrip():
    assert phe.load_key(phe.dump_public_key(PK)) == PK
    k = phe.load_key(phe.dump_partial_key(KEYS[2]))
    assert k.exponent == KEYS[2].exponent and k.index == 2
    with pytest.raises(ConfigError):
        phe.load_key("garbage")
