"""Threshold Paillier with an m-out-of-m decryption key.

The public key uses g = n + 1.  The secret exponent d satisfies d = 0 mod lambda
and d = 1 mod n, so c^d mod n^2 = 1 + x*n for c = Enc(x); d is split into
additive integer shares (the last one may be negative) and every party must
contribute a partial decryption.  Setup is a trusted dealer.

Plaintexts are fixed-point integers carried together with a scale tag (the
number of fractional bits).  Negative numbers live in the upper half of Z_n.
"""
from dataclasses import dataclass, field
from fractions import Fraction
import hashlib
import math
import random

import gmpy2

from .errors import CombinationError, ConfigError, EncodingError, ScaleError, ThresholdError
from .fixedpoint import FRAC_BITS, encode

MIN_KEY_BITS = 256
PRODUCTION_KEY_BITS = 1024
KEY_SHARE_SLACK = 128


@dataclass(frozen=True)
class PublicKey:
    n: int
    n_squared: int = field(init=False, repr=False)
    max_bits: int = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "n_squared", self.n * self.n)
        # |x| < 2^max_bits keeps positive and negative encodings apart
        object.__setattr__(self, "max_bits", self.n.bit_length() - 2)

    @property
    def fingerprint(self):
        return hashlib.sha256(str(self.n).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class PartialSecretKey:
    index: int
    exponent: int
    n: int
    verification_data: bytes = b""


@dataclass(frozen=True)
class Ciphertext:
    value: int
    scale: int = 0


@dataclass(frozen=True)
class PartialDecryption:
    party: int
    ciphertext: int
    value: int
    verification_data: bytes = b""


def _key_tag(n):
    return hashlib.sha256(b"pivot-key:" + str(n).encode()).digest()


def _random_prime(bits, rng):
    while True:
        cand = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
        p = int(gmpy2.next_prime(cand))
        if p.bit_length() == bits:
            return p


def keygen(key_bits=PRODUCTION_KEY_BITS, parties=3, seed=None, test_mode=False):
    """Dealer key generation: one public key and `parties` partial keys."""
    if key_bits < MIN_KEY_BITS:
        raise ConfigError(f"key_bits={key_bits} below the minimum of {MIN_KEY_BITS}")
    if key_bits < PRODUCTION_KEY_BITS and not test_mode:
        raise ConfigError(f"key_bits={key_bits} requires test_mode")
    if parties < 2:
        raise ConfigError("threshold keys need at least two parties")
    rng = random.Random(seed) if seed is not None else random.SystemRandom()
    half = key_bits // 2
    while True:
        p = _random_prime(half, rng)
        q = _random_prime(key_bits - half, rng)
        n = p * q
        if p != q and n.bit_length() == key_bits and math.gcd(n, (p - 1) * (q - 1)) == 1:
            break
    lam = (p - 1) * (q - 1) // math.gcd(p - 1, q - 1)
    d = lam * int(gmpy2.invert(lam, n))
    width = (lam * n).bit_length() + KEY_SHARE_SLACK
    shares = [rng.getrandbits(width) for _ in range(parties - 1)]
    shares.append(d - sum(shares))
    tag = _key_tag(n)
    pk = PublicKey(n)
    return pk, [PartialSecretKey(i, s, n, tag) for i, s in enumerate(shares)]


# -- encoding ---------------------------------------------------------------

def encode_plain(pk, x):
    """Signed integer -> element of Z_n."""
    x = int(x)
    if x.bit_length() > pk.max_bits:
        raise EncodingError(f"plaintext magnitude 2^{x.bit_length()} exceeds 2^{pk.max_bits}")
    return x % pk.n


def decode_plain(pk, m):
    return m - pk.n if m > pk.n // 2 else m


def _fixed(value, scale):
    if isinstance(value, int):
        return value << scale
    return encode(value, scale)


# -- core operations ---------------------------------------------------------

def _rand_unit(pk, rng):
    while True:
        r = rng.randrange(1, pk.n)
        if math.gcd(r, pk.n) == 1:
            return r


def encrypt_int(pk, x, scale=0, rng=None):
    """Encrypt an already scaled integer."""
    rng = rng or random.SystemRandom()
    m = encode_plain(pk, x)
    r = _rand_unit(pk, rng)
    c = (1 + m * pk.n) * int(gmpy2.powmod(r, pk.n, pk.n_squared)) % pk.n_squared
    return Ciphertext(c, scale)


def encrypt(pk, value, scale=FRAC_BITS, rng=None):
    """Encrypt a real value as a fixed-point integer with `scale` fractional bits."""
    return encrypt_int(pk, _fixed(value, scale), scale, rng)


def trivial(pk, x, scale=0):
    """Deterministic encryption with r = 1; only ever used as an additive constant."""
    return Ciphertext((1 + encode_plain(pk, x) * pk.n) % pk.n_squared, scale)


def rerandomize(pk, c, rng=None):
    rng = rng or random.SystemRandom()
    r = _rand_unit(pk, rng)
    return Ciphertext(c.value * int(gmpy2.powmod(r, pk.n, pk.n_squared)) % pk.n_squared, c.scale)


def add_hom(pk, a, b):
    if a.scale != b.scale:
        raise ScaleError(f"cannot add ciphertexts at scales {a.scale} and {b.scale}")
    return Ciphertext(a.value * b.value % pk.n_squared, a.scale)


def neg_hom(pk, a):
    return Ciphertext(int(gmpy2.invert(a.value, pk.n_squared)), a.scale)


def sub_hom(pk, a, b):
    return add_hom(pk, a, neg_hom(pk, b))


def mul_plain(pk, x, c, scale=0):
    """x (*) [v]: the plaintext x is encoded with `scale` fractional bits."""
    k = _fixed(x, scale) if scale else int(x)
    if k == 0:
        return trivial(pk, 0, c.scale + scale)
    return Ciphertext(int(gmpy2.powmod(c.value, k, pk.n_squared)), c.scale + scale)


def dot_hom(pk, xs, cs, scale=0):
    """Homomorphic dot product of a plaintext vector with an encrypted vector."""
    if len(xs) != len(cs):
        raise ValueError("length mismatch")
    if not cs:
        raise ValueError("empty dot product")
    out_scale = cs[0].scale + scale
    acc = gmpy2.mpz(1)
    nsq = pk.n_squared
    for x, c in zip(xs, cs):
        if c.scale != cs[0].scale:
            raise ScaleError("mixed scales in dot product")
        k = _fixed(x, scale) if scale else int(x)
        if k == 0:
            continue
        if k == 1:
            acc = acc * c.value % nsq
        else:
            acc = acc * gmpy2.powmod(c.value, k, nsq) % nsq
    return Ciphertext(int(acc), out_scale)


def sum_hom(pk, cs):
    acc = gmpy2.mpz(1)
    for c in cs:
        if c.scale != cs[0].scale:
            raise ScaleError("mixed scales in sum")
        acc = acc * c.value % pk.n_squared
    return Ciphertext(int(acc), cs[0].scale)


# -- threshold decryption -------------------------------------------------------

def partial_decrypt(c, key):
    n2 = key.n * key.n
    return PartialDecryption(key.index, c.value, int(gmpy2.powmod(c.value, key.exponent, n2)),
                             key.verification_data)


def combine_int(pk, c, partials, parties):
    """Combine m partial decryptions into the signed plaintext integer."""
    seen = {p.party for p in partials}
    if len(seen) != len(partials):
        raise CombinationError("duplicate partial decryption")
    if len(seen) < parties:
        raise ThresholdError(f"{len(seen)} of {parties} partial decryptions supplied")
    tag = _key_tag(pk.n)
    acc = gmpy2.mpz(1)
    for p in partials:
        if p.ciphertext != c.value:
            raise CombinationError("partial decryption belongs to another ciphertext")
        if p.verification_data and p.verification_data != tag:
            raise CombinationError("partial decryption made with a foreign key")
        acc = acc * p.value % pk.n_squared
    if (acc - 1) % pk.n != 0:
        raise CombinationError("partials do not combine to a valid plaintext")
    return decode_plain(pk, int((acc - 1) // pk.n) % pk.n)


def combine(pk, c, partials, parties):
    return Fraction(combine_int(pk, c, partials, parties), 1 << c.scale)


def decrypt_int(pk, c, keys):
    """Convenience for tests: run every party's partial decryption locally."""
    return combine_int(pk, c, [partial_decrypt(c, k) for k in keys], len(keys))


def decrypt(pk, c, keys):
    return Fraction(decrypt_int(pk, c, keys), 1 << c.scale)


# -- serialisation ----------------------------------------------------------------

KEY_HEADER = "pivot-key v1"


def dump_public_key(pk):
    return f"{KEY_HEADER}\nkind=public\nn={pk.n}\n"


def dump_partial_key(key):
    return (f"{KEY_HEADER}\nkind=partial\nindex={key.index}\nn={key.n}\n"
            f"exponent={key.exponent}\ntag={key.verification_data.hex()}\n")


def load_key(text):
    lines = [ln.strip() for ln in text.strip().splitlines()]
    if not lines or lines[0] != KEY_HEADER:
        raise ConfigError("unrecognised key file header")
    fields = dict(ln.split("=", 1) for ln in lines[1:] if ln)
    try:
        if fields["kind"] == "public":
            return PublicKey(int(fields["n"]))
        if fields["kind"] == "partial":
            return PartialSecretKey(int(fields["index"]), int(fields["exponent"]),
                                    int(fields["n"]), bytes.fromhex(fields.get("tag", "")))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"malformed key file: {exc}") from exc
    raise ConfigError(f"unknown key kind {fields.get('kind')!r}")
