"""Moving values between Paillier ciphertexts and additive shares.

enc_to_shares: every party adds an encrypted random mask, the masked sum is
jointly decrypted towards party 0, and party 0 subtracts its own mask while
the others hold their negated masks.  The integer shares sum to x exactly
(before any reduction mod q), which cipher_mul relies on.

shares_to_enc: the parties open x + 2^k + rho where rho = sum of private
integer masks, then each party encrypts its mask.  [x] is the public part
minus the encrypted masks; the result is exact, with no wrap-around mod q.
"""
import math

import numpy as np

from . import phe
from .errors import MaskedOverflowError
from .harness.transport import CONVERSION, MASKED
from .mpc import Shared


def enc_to_shares(fed, cts, tag="enc2shares", exact=False):
    """Ciphertexts -> Shared (scale of the inputs; mixed scales give scale 0).

    With exact=True also returns the unreduced integer shares (list per party).
    """
    q = fed.params.q
    L = len(cts)
    scales = {c.scale for c in cts}
    masks = []
    masked = list(cts)
    for p in fed.parties:
        r = [p.rng.randrange(q) for _ in range(L)]
        masks.append(r)
        enc_r = [fed.encrypt(p.index, [v], c.scale)[0] for v, c in zip(r, cts)]
        if p.index != 0:
            fed.transport.account(p.index, 0, sum((c.value.bit_length() + 7) // 8 for c in enc_r))
        masked = fed.vadd(masked, enc_r)
    e = fed.joint_decrypt(masked, CONVERSION, tag, receiver=0)
    lo = -(1 << (fed.params.trunc_bits + 1))
    hi = fed.m * q + (1 << (fed.params.trunc_bits + 1))
    for v in e:
        if not lo <= v <= hi:
            raise MaskedOverflowError("masked plaintext outside the expected range; input too large")
    ints = [[v - r for v, r in zip(e, masks[0])]] + [[-r for r in masks[i]] for i in range(1, fed.m)]
    sh = np.array([[v % q for v in row] for row in ints], dtype=object)
    out = Shared(sh, scales.pop() if len(scales) == 1 else 0, q)
    return (out, ints) if exact else out


def shares_to_enc(fed, x, tag="shares2enc"):
    """Shared -> ciphertexts at the same scale; requires |x| < 2^trunc_bits."""
    k = fed.params.trunc_bits
    width = k + fed.params.sigma - max(1, math.ceil(math.log2(fed.m)))
    L = len(x)
    rho = [[p.rng.getrandbits(width) for _ in range(L)] for p in fed.parties]
    masked = x.sh + np.array(rho, dtype=object)
    masked[0] = masked[0] + (1 << k)
    c = fed.mpc._open_raw(masked % fed.params.q, MASKED, tag)
    enc = [phe.trivial(fed.pk, int(v) - (1 << k), x.scale) for v in c]
    for p in fed.parties:
        enc_rho = fed.encrypt(p.index, rho[p.index], x.scale)
        fed.transport.broadcast(p.index, enc_rho, tag)
        enc = fed.vsub(enc, enc_rho)
    return enc


def cipher_mul(fed, a_cts, b_cts, owner, tag="ciphermul"):
    """[a_t * b_t] for every t; costs one threshold decryption per element."""
    _, ints = enc_to_shares(fed, a_cts, tag, exact=True)
    acc = None
    for p in fed.parties:
        mine = [fed.mul_plain(s, b) for s, b in zip(ints[p.index], b_cts)]
        if p.index != owner:
            fed.transport.account(p.index, owner, sum((c.value.bit_length() + 7) // 8 for c in mine))
        acc = mine if acc is None else fed.vadd(acc, mine)
    return [phe.Ciphertext(c.value, a.scale + b.scale)
            for c, a, b in zip(fed.rerandomize(owner, acc), a_cts, b_cts)]
