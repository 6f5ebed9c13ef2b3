"""Plaintext fixed-point arithmetic.

Every routine here is the exact integer recipe that the MPC engine evaluates on
shares: same truncations (floor), same normalisation comparisons, same Newton
iteration counts.  The plaintext tree oracle uses these, so a protocol run and
the oracle agree bit for bit.
"""
from fractions import Fraction
import math

FRAC_BITS = 16

RECIP_ITERS = 12
LN_ITERS = 12
EXP_POLY_DEGREE = 8
# initial guess x0 = 2.9142 - 2b for b in (0.5, 1]
RECIP_INIT = 2.9142

DEFAULT_EXP_RANGE = (-16, 16)


def encode(value, frac_bits=FRAC_BITS):
    """Round-half-even encoding of a real value into a scaled integer."""
    return round(Fraction(value) * (1 << frac_bits))


def decode(x, frac_bits=FRAC_BITS):
    return Fraction(int(x), 1 << frac_bits)


def to_float(x, frac_bits=FRAC_BITS):
    return int(x) / float(1 << frac_bits)


def mul(a, b, f=FRAC_BITS):
    return (a * b) >> f


def exp2_coeffs(f=FRAC_BITS):
    """Taylor coefficients of 2**r on [0, 1): (ln 2)^i / i!."""
    ln2 = math.log(2)
    return [encode(ln2 ** i / math.factorial(i), f) for i in range(EXP_POLY_DEGREE + 1)]


def expe_coeffs(f=FRAC_BITS):
    """Taylor coefficients of e**z around 0."""
    return [encode(Fraction(1, math.factorial(i)), f) for i in range(EXP_POLY_DEGREE + 1)]


def horner(coeffs, x, f=FRAC_BITS):
    acc = coeffs[-1]
    for c in reversed(coeffs[:-1]):
        acc = ((acc * x) >> f) + c
    return acc


# -- reciprocal / division -------------------------------------------------

def norm_factor(b, lo, hi, f=FRAC_BITS):
    """Power-of-two scaling s (at scale fs) bringing b in (2^lo, 2^hi] into (0.5, 1].

    Comparisons c_j = [b > 2^j] for j in lo..hi-1; s = 2^(fs - t) with
    t = lo + sum(c_j).
    """
    fs = max(hi, 0)
    s = 1 << (fs - lo)
    for j in range(lo, hi):
        if b > (1 << (j + f)):
            s -= 1 << (fs - j - 1)
    return s, fs


def recip_normalized(bn, f=FRAC_BITS, iters=RECIP_ITERS):
    """Newton reciprocal of bn in (0.5, 1] at scale f."""
    two = 2 << f
    x = encode(RECIP_INIT, f) - 2 * bn
    for _ in range(iters):
        x = (x * (two - ((bn * x) >> f))) >> f
    return x


def reciprocal_parts(b, lo, hi, f=FRAC_BITS):
    s, fs = norm_factor(b, lo, hi, f)
    bn = (b * s) >> fs
    return recip_normalized(bn, f), s, fs


def div(a, b, lo=0, hi=20, f=FRAC_BITS):
    """a / b for b in (2^lo, 2^hi] (both at scale f)."""
    y, s, fs = reciprocal_parts(b, lo, hi, f)
    return (((a * y) >> f) * s) >> fs


def div_with(a, parts, f=FRAC_BITS):
    y, s, fs = parts
    return (((a * y) >> f) * s) >> fs


# -- exponential / logarithm ------------------------------------------------

def exp_range_bits(lo, hi):
    """Number of comparisons below and above zero used to split off 2^k."""
    log2e = math.log2(math.e)
    return math.ceil(-lo * log2e), math.ceil(hi * log2e)


def exp(a, lo=DEFAULT_EXP_RANGE[0], hi=DEFAULT_EXP_RANGE[1], f=FRAC_BITS, clamp=False):
    """e**a with a at scale f in [lo, hi]."""
    if clamp and a < (lo << f):
        a = lo << f
    u_lo, u_hi = exp_range_bits(lo, hi)
    g = f + u_lo
    u = (a * encode(math.log2(math.e), f)) >> f
    p2k = 1 << f
    k = -u_lo
    for j in range(-u_lo + 1, u_hi + 1):
        if u >= (j << f):
            p2k += 1 << (j - 1 + g)
            k += 1
    r = u - (k << f)
    poly = horner(exp2_coeffs(f), r, f)
    return (p2k * poly) >> g


def ln_unit(x, f=FRAC_BITS, iters=LN_ITERS):
    """Natural log of x in (0, 1] at scale f (x >= 1 ulp)."""
    lo = -f
    s = 1 << (-lo)
    t = lo
    for j in range(lo, 0):
        if x > (1 << (j + f)):
            s -= 1 << (-j - 1)
            t += 1
    xn = x * s
    one = 1 << f
    coeffs = expe_coeffs(f)
    y = xn - one
    for _ in range(iters):
        y = y - one + ((xn * horner(coeffs, -y, f)) >> f)
    return y + t * encode(math.log(2), f)


def laplace_from_uniform(v, mu, scale, f=FRAC_BITS):
    """Inverse-CDF Laplace sample from an odd V in (-2^f, 2^f).

    U = V / 2^(f+1) is uniform on (-1/2, 1/2) and never zero.  mu and scale are
    encoded at scale f; the result is at scale f.
    """
    sgn = 1 if v > 0 else -1
    x = (1 << f) - abs(v)
    lnx = ln_unit(x, f)
    return mu - sgn * ((scale * lnx) >> f)


def softmax(scores, lo=-24, f=FRAC_BITS, div_hi=None):
    """Max-shifted softmax over a list of scaled scores."""
    best = scores[0]
    for s in scores[1:]:
        if s > best:
            best = s
    es = [exp(s - best, lo, 0, f, clamp=True) for s in scores]
    hi = div_hi if div_hi is not None else math.ceil(math.log2(len(scores) + 1))
    total = sum(es)
    parts = reciprocal_parts(total, 0, hi, f)
    return [div_with(e, parts, f) for e in es]
