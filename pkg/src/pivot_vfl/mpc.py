"""Additive secret sharing over Z_q with a trusted offline dealer.

Values are fixed-point integers with an explicit scale; negative numbers are
represented as q - |x|.  Multiplication uses Beaver triples.  Truncation is
exact (floor): the dealer hands out a random r together with XOR-shared bits
of its low part, the parties open x + 2^(k-1) + r, and a bitwise less-than in
GF(2) recovers the borrow.  Comparison is truncation by k-1 bits.  Because all
rounding is deterministic, the plaintext recipes in ``fixedpoint`` reproduce
every result exactly.
"""
from collections import Counter
from dataclasses import dataclass
import hashlib
import math
import random

import gmpy2
import numpy as np

from . import fixedpoint as fp
from .errors import ConfigError, DealerExhaustedError, ReconstructionError, ScaleError, TripleReuseError
from .harness.transport import BEAVER, MASKED, REVEAL, Transcript, Transport

Q = 2 ** 128 - 159
SIGMA = 40
ELEMENT_BYTES = 16


@dataclass(frozen=True)
class FieldParams:
    q: int = Q
    frac_bits: int = fp.FRAC_BITS
    trunc_bits: int = 86     # every truncated value satisfies |x| < 2^trunc_bits
    sigma: int = SIGMA
    cmp_bits: int = 64       # default comparison width: |a - b| < 2^(cmp_bits-1)

    def __post_init__(self):
        if not gmpy2.is_prime(self.q):
            raise ConfigError("share modulus must be prime")
        if self.trunc_bits + self.sigma + 1 >= self.q.bit_length():
            raise ConfigError("q too small for the truncation bound plus statistical masking")
        if self.cmp_bits > self.trunc_bits:
            raise ConfigError("comparison width exceeds the truncation bound")
        if 2 * self.frac_bits + self.sigma > self.trunc_bits:
            raise ConfigError("fractional bits too large for the truncation bound")


def seed_int(*parts):
    """Stable 64-bit integer seed derived from arbitrary labels."""
    digest = hashlib.sha256(repr(parts).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _obj(values, size=None):
    arr = np.asarray(values, dtype=object).ravel()
    if size is not None and arr.size == 1 and size != 1:
        arr = np.full(size, arr[0], dtype=object)
    return np.array([int(v) for v in arr], dtype=object)


def int_bits(values, nbits):
    """Little-endian bit matrix (L, nbits) of non-negative Python ints."""
    vals = list(values)
    out = np.zeros((len(vals), nbits), dtype=np.uint8)
    for off in range(0, nbits, 60):
        w = min(60, nbits - off)
        chunk = np.array([(v >> off) & ((1 << w) - 1) for v in vals], dtype=np.uint64)
        for i in range(w):
            out[:, off + i] = (chunk >> np.uint64(i)) & np.uint64(1)
    return out


def bits_to_int(bits):
    """Inverse of int_bits for a (L, nbits) matrix."""
    L, nbits = bits.shape
    out = np.zeros(L, dtype=object)
    for off in range(0, nbits, 60):
        w = min(60, nbits - off)
        weights = np.uint64(1) << np.arange(w, dtype=np.uint64)
        chunk = bits[:, off:off + w].astype(np.uint64) @ weights
        out = out + np.array([int(v) << off for v in chunk], dtype=object)
    return out


class Shared:
    """An additively shared vector: ``sh[i]`` is party i's share of each element."""

    __slots__ = ("sh", "scale", "q")

    def __init__(self, sh, scale, q):
        self.sh = sh
        self.scale = scale
        self.q = q

    @property
    def parties(self):
        return self.sh.shape[0]

    def __len__(self):
        return self.sh.shape[1]

    def _public(self, c):
        return _obj(c, len(self)) % self.q

    def _check(self, other):
        if self.scale != other.scale:
            raise ScaleError(f"scale mismatch {self.scale} vs {other.scale}")
        if len(self) != len(other):
            raise ValueError(f"length mismatch {len(self)} vs {len(other)}")

    def __add__(self, other):
        if isinstance(other, Shared):
            self._check(other)
            return Shared((self.sh + other.sh) % self.q, self.scale, self.q)
        sh = self.sh.copy()
        sh[0] = (sh[0] + self._public(other)) % self.q
        return Shared(sh, self.scale, self.q)

    __radd__ = __add__

    def __neg__(self):
        return Shared((-self.sh) % self.q, self.scale, self.q)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Shared) else -_obj(other, len(self)))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, c):
        """Multiply by a public integer constant (no scale change)."""
        if isinstance(c, Shared):
            raise TypeError("use MPCEngine.mul for shared products")
        return Shared(self.sh * self._public(c) % self.q, self.scale, self.q)

    __rmul__ = __mul__

    def __getitem__(self, idx):
        sh = self.sh[:, idx]
        if sh.ndim == 1:
            sh = sh[:, None]
        return Shared(sh, self.scale, self.q)

    def with_scale(self, scale):
        return Shared(self.sh, scale, self.q)

    def lift(self, bits):
        """Reinterpret at a finer scale by multiplying by 2^bits."""
        return Shared(self.sh * (1 << bits) % self.q, self.scale + bits, self.q)

    def tile(self, k):
        return Shared(np.tile(self.sh, (1, k)), self.scale, self.q)

    def repeat(self, k):
        return Shared(np.repeat(self.sh, k, axis=1), self.scale, self.q)

    def total(self):
        return Shared((self.sh.sum(axis=1) % self.q)[:, None], self.scale, self.q)

    def blocks(self, k):
        """Split into k equal consecutive blocks."""
        L = len(self) // k
        return [self[i * L:(i + 1) * L] for i in range(k)]

    @staticmethod
    def cat(items, scale=None):
        if not items:
            raise ValueError("nothing to concatenate")
        if scale is None:
            for it in items[1:]:
                if it.scale != items[0].scale:
                    raise ScaleError("concatenating mixed scales")
        sh = np.concatenate([it.sh for it in items], axis=1)
        return Shared(sh, items[0].scale if scale is None else scale, items[0].q)


class _Triple:
    __slots__ = ("a", "b", "c", "used")

    def __init__(self, a, b, c):
        self.a, self.b, self.c, self.used = a, b, c, False


class Dealer:
    """Offline randomness: Beaver triples, GF(2) triples, edaBits and daBits.

    Deterministic under ``seed``.  ``budget`` maps a kind to the number of
    elements that may be drawn; exceeding it is a hard error.
    """

    def __init__(self, parties, params=None, seed=None, budget=None):
        self.m = parties
        self.params = params or FieldParams()
        self.seed = seed
        self.rng = random.Random(f"dealer:{seed}") if seed is not None else random.SystemRandom()
        self.bitrng = np.random.default_rng(None if seed is None else seed_int("dealer-bits", seed))
        self.used = Counter()
        self.budget = dict(budget or {})

    def _take(self, kind, count):
        self.used[kind] += count
        cap = self.budget.get(kind)
        if cap is not None and self.used[kind] > cap:
            raise DealerExhaustedError(f"dealer {kind} budget of {cap} exhausted")

    def _rand(self, L):
        # draws below 2^128 are valid representatives; later arithmetic reduces mod q
        g = self.rng.getrandbits
        return np.array([g(128) for _ in range(L)], dtype=object)

    def share(self, vals):
        q = self.params.q
        sh = np.empty((self.m, len(vals)), dtype=object)
        acc = np.zeros(len(vals), dtype=object)
        for i in range(self.m - 1):
            sh[i] = self._rand(len(vals))
            acc = acc + sh[i]
        sh[-1] = (vals - acc) % q
        return sh

    def xor_share(self, bits):
        sh = self.bitrng.integers(0, 2, size=(self.m,) + bits.shape, dtype=np.uint8)
        sh[-1] = bits ^ np.bitwise_xor.reduce(sh[:-1], axis=0)
        return sh

    def triples(self, L):
        self._take("triples", L)
        q = self.params.q
        a, b = self._rand(L), self._rand(L)
        return _Triple(self.share(a), self.share(b), self.share(a * b % q))

    def bit_triples(self, shape):
        self._take("bit_triples", int(np.prod(shape)))
        a = self.bitrng.integers(0, 2, size=shape, dtype=np.uint8)
        b = self.bitrng.integers(0, 2, size=shape, dtype=np.uint8)
        return self.xor_share(a), self.xor_share(b), self.xor_share(a & b)

    def edabits(self, L, nbits, total_bits):
        """Random r < 2^total_bits: shares of r and of its low part, XOR shares of the low bits."""
        self._take("edabits", L)
        lo_bits = self.bitrng.integers(0, 2, size=(L, nbits), dtype=np.uint8)
        lo = bits_to_int(lo_bits)
        g = self.rng.getrandbits
        hi_w = total_bits - nbits
        r = np.array([(g(hi_w) << nbits) + int(v) for v in lo], dtype=object)
        return self.share(lo), self.share(r), self.xor_share(lo_bits)

    def dabits(self, L):
        self._take("dabits", L)
        bits = self.bitrng.integers(0, 2, size=L, dtype=np.uint8)
        return self.share(np.array([int(b) for b in bits], dtype=object)), self.xor_share(bits)

    def state(self):
        return {"version": 1, "seed": self.seed, "used": dict(self.used), "budget": self.budget}


class MPCEngine:
    def __init__(self, parties, params=None, dealer=None, transport=None, transcript=None,
                 counters=None, seed=None):
        self.m = parties
        self.params = params or FieldParams()
        self.q = self.params.q
        self.f = self.params.frac_bits
        if transport is None:
            transport = Transport(parties, counters)
        self.transport = transport
        self.counters = transport.counters
        self.transcript = transcript if transcript is not None else Transcript()
        self.dealer = dealer or Dealer(parties, self.params, seed)
        if seed is not None:
            self.rngs = [random.Random(f"party:{seed}:{i}") for i in range(parties)]
        else:
            self.rngs = [random.SystemRandom() for _ in range(parties)]

    # -- input / output ------------------------------------------------------

    def share(self, owner, values, scale=0):
        """Party ``owner`` splits its private values into fresh random shares."""
        vals = _obj(values) % self.q
        L = len(vals)
        g = self.rngs[owner].getrandbits
        sh = np.empty((self.m, L), dtype=object)
        acc = np.zeros(L, dtype=object)
        for i in range(self.m):
            if i != owner:
                sh[i] = np.array([g(128) % self.q for _ in range(L)], dtype=object)
                acc = acc + sh[i]
                self.transport.account(owner, i, ELEMENT_BYTES * L)
        sh[owner] = (vals - acc) % self.q
        self.counters.rounds += 1
        return Shared(sh, scale, self.q)

    def from_shares(self, shares, scale=0):
        sh = np.array([[int(v) % self.q for v in row] for row in shares], dtype=object)
        if sh.shape[0] != self.m:
            raise ReconstructionError(f"expected {self.m} share rows, got {sh.shape[0]}")
        return Shared(sh, scale, self.q)

    def public(self, values, scale=0, size=None):
        vals = _obj(values, size) % self.q
        sh = np.zeros((self.m, len(vals)), dtype=object)
        sh[0] = vals
        return Shared(sh, scale, self.q)

    def signed(self, vals):
        half = self.q // 2
        return np.array([int(v) - self.q if int(v) > half else int(v) for v in vals], dtype=object)

    def _account_open(self, L, nbytes_each=ELEMENT_BYTES):
        for i in range(self.m):
            for j in range(self.m):
                self.transport.account(i, j, nbytes_each * L)
        self.counters.rounds += 1
        self.counters.opens += L

    def _open_raw(self, sh, kind, tag):
        total = sh.sum(axis=0) % self.q
        self._account_open(sh.shape[1])
        self.transcript.record(kind, tag, total)
        return total

    def open(self, x, tag="", kind=REVEAL):
        if x.parties != self.m:
            raise ReconstructionError(f"need all {self.m} shares, got {x.parties}")
        return self.signed(self._open_raw(x.sh, kind, tag))

    def reconstruct(self, x):
        """Test helper: recombine without logging or accounting."""
        return self.signed(x.sh.sum(axis=0) % self.q)

    # -- GF(2) layer ------------------------------------------------------------

    def _open_bits(self, b, kind, tag):
        total = np.bitwise_xor.reduce(b, axis=0)
        self._account_open(total.size, 1)
        self.counters.opens -= total.size
        self.transcript.record(kind, tag, total if self.transcript.level == "full" else None)
        return total

    def _and_bits(self, x, y):
        a, b, c = self.dealer.bit_triples(x.shape[1:])
        self.counters.bit_triples += int(np.prod(x.shape[1:]))
        ef = self._open_bits(np.concatenate([x ^ a, y ^ b], axis=1), BEAVER, "and")
        L = x.shape[1]
        e, f = ef[:L], ef[L:]
        z = c ^ (e & b) ^ (f & a)
        z[0] ^= e & f
        return z

    def _bit_lt(self, c_bits, r_bits):
        """XOR shares of [c < r] for public c and XOR-shared r (little-endian bits)."""
        L, nbits = c_bits.shape
        lt = np.zeros((self.m, L), dtype=np.uint8)
        for i in range(nbits):
            ri = r_bits[:, :, i]
            diff = ri.copy()
            diff[0] ^= c_bits[:, i]
            lt = lt ^ self._and_bits(diff, ri ^ lt)
        return lt

    def _bit_to_arith(self, b):
        dq, d2 = self.dealer.dabits(b.shape[1])
        v = np.array([int(t) for t in self._open_bits(b ^ d2, MASKED, "b2a")], dtype=object)
        sh = dq * (1 - 2 * v)
        sh[0] = sh[0] + v
        return Shared(sh % self.q, 0, self.q)

    # -- truncation and comparison ---------------------------------------------------

    def mod2m(self, x, bits, k=None):
        """x mod 2^bits for |x| < 2^(k-1); exact."""
        k = k or self.params.trunc_bits
        if not 0 < bits < k:
            raise ValueError(f"mod2m needs 0 < bits={bits} < k={k}")
        if k > self.params.trunc_bits + 1:
            raise ConfigError(f"bound 2^{k} exceeds the truncation bound")
        L = len(x)
        r_lo, r, r_bits = self.dealer.edabits(L, bits, k + self.params.sigma)
        masked = x.sh + r
        masked[0] = masked[0] + (1 << (k - 1))
        c = self._open_raw(masked % self.q, MASKED, "mod2m")
        mask = (1 << bits) - 1
        c_lo = np.array([int(v) & mask for v in c], dtype=object)
        borrow = self._bit_to_arith(self._bit_lt(int_bits(c_lo, bits), r_bits))
        sh = (-r_lo + borrow.sh * (1 << bits)) % self.q
        sh[0] = (sh[0] + c_lo) % self.q
        return Shared(sh, x.scale, self.q)

    def trunc(self, x, bits, k=None):
        """Exact floor(x / 2^bits); the result scale drops by ``bits``."""
        if bits == 0:
            return x
        low = self.mod2m(x, bits, k)
        inv = int(gmpy2.invert(1 << bits, self.q))
        return Shared((x.sh - low.sh) * inv % self.q, x.scale - bits, self.q)

    def ltz(self, x, k=None):
        """[x < 0] for |x| < 2^(k-1)."""
        k = k or self.params.cmp_bits
        self.counters.comparisons += len(x)
        return (-self.trunc(x, k - 1, k)).with_scale(0)

    def cmp(self, a, b, k=None):
        """[a > b] elementwise."""
        diff = (b - a) if isinstance(b, Shared) else (-a + b)
        return self.ltz(diff.with_scale(0), k)

    def ge(self, a, b, k=None):
        return 1 - self.cmp(b, a, k)

    def eq(self, a, b, k=None):
        diff = (b - a) if isinstance(b, Shared) else (-a + b)
        diff = diff.with_scale(0)
        both = self.ltz(Shared.cat([diff, -diff]), k)
        lo, hi = both.blocks(2)
        return 1 - lo - hi

    # -- multiplication -------------------------------------------------------------

    def _align(self, x, y):
        if len(x) == len(y):
            return x, y
        if len(x) == 1:
            return x.tile(len(y)), y
        if len(y) == 1:
            return x, y.tile(len(x))
        raise ValueError(f"length mismatch {len(x)} vs {len(y)}")

    def mul(self, x, y, scale=None, triple=None):
        """Beaver product; truncates down to ``scale`` (default: the larger input scale)."""
        x, y = self._align(x, y)
        L = len(x)
        t = triple or self.dealer.triples(L)
        if t.used:
            raise TripleReuseError("Beaver triple already consumed")
        t.used = True
        self.counters.triples += L
        de = self._open_raw(np.concatenate([(x.sh - t.a) % self.q, (y.sh - t.b) % self.q], axis=1),
                            BEAVER, "mul")
        d, e = de[:L], de[L:]
        z = t.c + d * t.b + e * t.a
        z[0] = z[0] + d * e
        out = Shared(z % self.q, x.scale + y.scale, self.q)
        target = max(x.scale, y.scale) if scale is None else scale
        return self.trunc(out, out.scale - target) if out.scale > target else out

    def scale_by(self, x, c, c_scale):
        """x times a public fixed-point constant encoded with c_scale bits."""
        return self.trunc(x * c, c_scale).with_scale(x.scale) if c_scale else x * c

    def select(self, bit, a, b):
        """bit ? a : b"""
        if not isinstance(a, Shared):
            a = self.public(a, b.scale, len(b))
        if not isinstance(b, Shared):
            b = self.public(b, a.scale, len(a))
        return b + self.mul(bit, a - b)

    def bit_or(self, a, b):
        return a + b - self.mul(a, b)

    # -- argmax -----------------------------------------------------------------------

    def argmax(self, values, payloads=None, init=None, k=None):
        """Sequential left-to-right maximum with strict > (first maximum wins).

        values: list of R Shared vectors of equal length L (argmax per position).
        payloads: list of R lists of P items (Shared or public ints) carried along.
        init: optional (value, payload list) start point; default starts at values[0].
        """
        R = len(values)
        payloads = payloads if payloads is not None else [[r] for r in range(R)]
        L = len(values[0])
        scale = values[0].scale

        def as_shared(p):
            return p.with_scale(0) if isinstance(p, Shared) else self.public(p, 0, L)

        if init is None:
            cur_v, cur_p = values[0], [as_shared(p) for p in payloads[0]]
            start = 1
        else:
            v0, p0 = init
            cur_v = v0 if isinstance(v0, Shared) else self.public(v0, scale, L)
            cur_p = [as_shared(p) for p in p0]
            start = 0
        for r in range(start, R):
            bit = self.cmp(values[r], cur_v, k)
            cand = [values[r].with_scale(0)] + [as_shared(p) for p in payloads[r]]
            cur = [cur_v.with_scale(0)] + cur_p
            stack = Shared.cat([c - o for c, o in zip(cand, cur)])
            delta = self.mul(bit.tile(len(cand)), stack).blocks(len(cand))
            new = [o + d for o, d in zip(cur, delta)]
            cur_v, cur_p = new[0].with_scale(scale), new[1:]
        return cur_v, cur_p

    # -- reciprocal, division ---------------------------------------------------------------

    def _gt_consts(self, x, consts, k=None):
        """[x > c_j] for every public constant, blocked by constant."""
        J = len(consts)
        L = len(x)
        cvec = np.concatenate([np.full(L, c, dtype=object) for c in consts])
        return self.cmp(x.tile(J), self.public(cvec, x.scale), k).blocks(J)

    def reciprocal_parts(self, b, lo=0, hi=20):
        """Normalised Newton reciprocal of b in (2^lo, 2^hi] (scale f)."""
        f = self.f
        fs = max(hi, 0)
        comps = self._gt_consts(b, [1 << (j + f) for j in range(lo, hi)])
        s = self.public(1 << (fs - lo), fs, len(b))
        for j, c in zip(range(lo, hi), comps):
            s = s - c.with_scale(fs) * (1 << (fs - j - 1))
        bn = self.mul(b, s, scale=f)
        two = 2 << f
        x = (-(bn * 2)) + fp.encode(fp.RECIP_INIT, f)
        for _ in range(fp.RECIP_ITERS):
            t = self.mul(bn, x)
            x = self.mul(x, two - t)
        return x, s, fs

    def div_with(self, a, parts):
        y, s, fs = parts
        return self.mul(self.mul(a, y), s, scale=self.f)

    def div(self, a, b, lo=0, hi=20):
        return self.div_with(a, self.reciprocal_parts(b, lo, hi))

    # -- exponential, logarithm, softmax ---------------------------------------------------

    def _horner(self, coeffs, x):
        f = self.f
        acc = self.scale_by(x, coeffs[-1], f) + coeffs[-2]
        for c in reversed(coeffs[:-2]):
            acc = self.mul(acc, x) + c
        return acc

    def exp(self, a, lo=fp.DEFAULT_EXP_RANGE[0], hi=fp.DEFAULT_EXP_RANGE[1], clamp=False):
        f = self.f
        if clamp:
            below = self.cmp(self.public(lo << f, a.scale, len(a)), a)
            a = self.select(below, lo << f, a)
        u_lo, u_hi = fp.exp_range_bits(lo, hi)
        g = f + u_lo
        u = self.scale_by(a, fp.encode(math.log2(math.e), f), f)
        js = list(range(-u_lo + 1, u_hi + 1))
        # [u >= j] = [u > j*2^f - 1]
        comps = self._gt_consts(u, [(j << f) - 1 for j in js])
        p2k = self.public(1 << f, g, len(a))
        r = u + (u_lo << f)
        for j, c in zip(js, comps):
            p2k = p2k + c.with_scale(g) * (1 << (j - 1 + g))
            r = r - c.with_scale(f) * (1 << f)
        poly = self._horner(fp.exp2_coeffs(f), r)
        return self.mul(p2k, poly, scale=f)

    def ln_unit(self, x):
        """ln x for x in (0, 1] at scale f."""
        f = self.f
        lo = -f
        comps = self._gt_consts(x, [1 << (j + f) for j in range(lo, 0)])
        s = self.public(1 << (-lo), 0, len(x))
        t = self.public(lo, 0, len(x))
        for j, c in zip(range(lo, 0), comps):
            s = s - c * (1 << (-j - 1))
            t = t + c
        xn = self.mul(x, s)
        one = 1 << f
        coeffs = fp.expe_coeffs(f)
        y = xn - one
        for _ in range(fp.LN_ITERS):
            y = y - one + self.mul(xn, self._horner(coeffs, -y))
        return y + (t * fp.encode(math.log(2), f)).with_scale(f)

    def softmax(self, scores, lo=-24):
        """Softmax across a list of c Shared vectors (per position)."""
        c = len(scores)
        best, _ = self.argmax(scores)
        diffs = Shared.cat([s - best for s in scores])
        es = self.exp(diffs, lo, 0, clamp=True)
        blocks = es.blocks(c)
        total = blocks[0]
        for b in blocks[1:]:
            total = total + b
        parts = self.reciprocal_parts(total, 0, math.ceil(math.log2(c + 1)))
        y, s, fs = parts
        out = self.div_with(es, (y.tile(c), s.tile(c), fs))
        return out.blocks(c)

    # -- jointly sampled uniforms -------------------------------------------------------------

    def uniform_unit(self, L):
        """2U'+1 for U' uniform on [0, 2^f): an odd integer encoding U in (0, 1) at scale f+1."""
        f = self.f
        acc = None
        for i in range(self.m):
            u = self.share(i, [self.rngs[i].getrandbits(f) for _ in range(L)])
            acc = u if acc is None else acc + u
        k = f + max(1, math.ceil(math.log2(self.m))) + 2
        low = self.mod2m(acc, f, k)
        return (low * 2 + 1).with_scale(f + 1)

    def uniform_centered(self, L):
        """V = 2U'+1-2^f: odd, in (-2^f, 2^f); U = V/2^(f+1) is uniform on (-1/2, 1/2)."""
        return self.uniform_unit(L) - (1 << self.f)
