"""A federation of simulated parties sharing one threshold key and one MPC engine."""
from dataclasses import dataclass, field
import math
import random
import time

import numpy as np

from . import phe
from .errors import ConfigError
from .harness.counters import OpCounters
from .harness.transport import Transcript, Transport
from .mpc import Dealer, FieldParams, MPCEngine, seed_int


@dataclass
class PartyState:
    index: int
    key: phe.PartialSecretKey
    features: np.ndarray
    rng: random.Random
    labels: object = None


@dataclass
class NodeRecord:
    """Per-node cost snapshot used by the counter-law checks."""
    tree: str
    node: int
    depth: int
    leaf: bool
    evaluated: bool
    n_splits: int
    delta: OpCounters = field(default_factory=OpCounters)


class Federation:
    """Parties 0..m-1; ``super_index`` holds the labels.

    Lock-step simulation: every party's local computation runs in this
    process, but values only cross party boundaries through the transport
    (ciphertexts) or through MPC openings, and both are accounted.
    """

    def __init__(self, pk, keys, parts, labels=None, super_index=0, params=None, seed=0,
                 transcript_level="full", dealer_budget=None, timeout=5.0):
        m = len(keys)
        if len(parts) != m:
            raise ConfigError(f"{len(parts)} feature partitions for {m} keys")
        if m < 2:
            raise ConfigError("a federation needs at least two parties")
        if not 0 <= super_index < m:
            raise ConfigError("super client index out of range")
        self.params = params or FieldParams()
        need = self.params.q.bit_length() + math.ceil(math.log2(m)) + 2
        if pk.max_bits <= need:
            raise ConfigError(f"Paillier modulus too small: need more than {need} plaintext bits")
        self.pk = pk
        self.m = m
        self.super_index = super_index
        self.seed = seed
        self.counters = OpCounters()
        self.transport = Transport(m, self.counters, timeout)
        self.transcript = Transcript(level=transcript_level)
        self.dealer = Dealer(m, self.params, seed=seed_int("dealer", seed), budget=dealer_budget)
        self.mpc = MPCEngine(m, self.params, self.dealer, self.transport, self.transcript,
                             seed=seed_int("mpc", seed))
        self.parties = [PartyState(i, keys[i], np.asarray(parts[i]), random.Random(f"he:{seed}:{i}"),
                                   labels if i == super_index else None) for i in range(m)]
        self.node_log = []
        self.started = time.time()

    @property
    def n_samples(self):
        return len(self.parties[0].features)

    @property
    def frac_bits(self):
        return self.params.frac_bits

    # -- homomorphic helpers with accounting ------------------------------------------

    def encrypt(self, party, ints, scale=0):
        rng = self.parties[party].rng
        self.counters.encryptions += len(ints)
        return [phe.encrypt_int(self.pk, int(v), scale, rng) for v in ints]

    def rerandomize(self, party, cts):
        rng = self.parties[party].rng
        self.counters.hom_ops += len(cts)
        return [phe.rerandomize(self.pk, c, rng) for c in cts]

    def add(self, a, b):
        self.counters.hom_ops += 1
        return phe.add_hom(self.pk, a, b)

    def sub(self, a, b):
        self.counters.hom_ops += 1
        return phe.sub_hom(self.pk, a, b)

    def vadd(self, xs, ys):
        return [self.add(a, b) for a, b in zip(xs, ys)]

    def vsub(self, xs, ys):
        return [self.sub(a, b) for a, b in zip(xs, ys)]

    def total(self, cts):
        self.counters.hom_ops += len(cts)
        return phe.sum_hom(self.pk, cts)

    def mul_plain(self, k, c, scale=0):
        self.counters.hom_ops += 1
        return phe.mul_plain(self.pk, k, c, scale)

    def dot(self, xs, cs, scale=0):
        self.counters.hom_ops += len(cs)
        return phe.dot_hom(self.pk, xs, cs, scale)

    def masked_product(self, party, plain, cts, scale=None):
        """Elementwise plain (*) [c], re-randomised; zero entries become fresh Enc(0).

        ``scale`` tags the result when the plain factors are fixed-point integers.
        """
        out = []
        for k, c in zip(plain, cts):
            k = int(k)
            s = c.scale if scale is None else scale
            if k == 0:
                out.append(self.encrypt(party, [0], s)[0])
                continue
            prod = self.rerandomize(party, [c if k == 1 else self.mul_plain(k, c)])[0]
            out.append(phe.Ciphertext(prod.value, s))
        return out

    # -- threshold decryption ------------------------------------------------------------

    def joint_decrypt(self, cts, kind, tag="", receiver=None):
        """Every party contributes partials; the receiver (or everyone) combines."""
        if not cts:
            return []
        partials = []
        for p in self.parties:
            mine = [phe.partial_decrypt(c, p.key) for c in cts]
            self.counters.partial_decryptions += len(cts)
            targets = range(self.m) if receiver is None else [receiver]
            for dst in targets:
                self.transport.account(p.index, dst, sum((x.value.bit_length() + 7) // 8 for x in mine))
            partials.append(mine)
        self.counters.decryptions += len(cts)
        self.counters.rounds += 1
        values = [phe.combine_int(self.pk, c, [partials[i][t] for i in range(self.m)], self.m)
                  for t, c in enumerate(cts)]
        self.transcript.record(kind, tag, values)
        return values

    # -- per-node bookkeeping -----------------------------------------------------------

    def begin_node(self):
        return self.counters.snapshot()

    def end_node(self, start, tree, node, evaluated, n_splits):
        self.node_log.append(NodeRecord(tree, node.id, node.depth, node.leaf, evaluated, n_splits,
                                        self.counters - start))
