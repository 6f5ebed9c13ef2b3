"""Differential privacy computed inside MPC.

Laplace noise is drawn by inverse-transform sampling on a jointly sampled
uniform; the exponential mechanism picks a shared index by locating a shared
uniform inside cumulative weights.  Neither the noise nor the selected index
is ever opened.
"""
from dataclasses import dataclass

from . import fixedpoint as fp
from .errors import ConfigError
from .mpc import Shared
from .protocol.basic import TreeTrainer
from .tree import CLASSIFICATION

COUNT_SENSITIVITY = 1.0
GINI_SENSITIVITY = 2.0
EXP_CLIP = 24


@dataclass(frozen=True)
class DpBudget:
    epsilon: float
    depth: int

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")

    @property
    def per_node(self):
        # the pruning query plus either the split or the leaf query
        return 2 * self.epsilon

    @property
    def total(self):
        # siblings see disjoint samples, so only the depth composes
        return 2 * (self.depth + 1) * self.epsilon

    def as_dict(self):
        return {"per_query": self.epsilon, "per_node": self.per_node, "depth": self.depth, "total": self.total}


def sample_laplace_shared(e, mu, scale, count=1):
    """Shared Laplace(mu, scale) draws at scale f; mu and scale are public reals."""
    f = e.f
    v = e.uniform_centered(count).with_scale(0)
    both = e.ltz(Shared.cat([-v, v]))
    pos, neg = both.blocks(2)
    sign = pos - neg
    mag = e.mul(sign, v)
    lnx = e.ln_unit((-mag + (1 << f)).with_scale(f))
    spread = e.scale_by(lnx, fp.encode(scale, f), f)
    return -e.mul(sign, spread) + fp.encode(mu, f)


def laplace_plain(v, mu, scale, f=fp.FRAC_BITS):
    return fp.laplace_from_uniform(v, fp.encode(mu, f), fp.encode(scale, f), f)


def mech_weights_plain(scores, epsilon, sensitivity, f=fp.FRAC_BITS, clip=EXP_CLIP):
    """Fixed-point selection weights exactly as computed on shares."""
    coef = fp.encode(epsilon / (2 * sensitivity), f)
    best = max(scores)
    return [fp.exp((coef * (s - best)) >> f, -clip, 0, f, clamp=True) for s in scores]


def exp_mech_select(e, scores, epsilon, sensitivity, draws=1, payloads=(), clip=EXP_CLIP):
    """Shared index r chosen with probability proportional to exp(eps * score_r / (2 * sensitivity)).

    scores: Shared of length R (scale f).  payloads: columns of length R, each
    a list of public ints or a Shared vector; the selected entries come back
    shared.  ``draws`` independent selections reuse one set of weights.
    """
    f = e.f
    R = len(scores)
    cols = [scores[r] for r in range(R)]
    best, _ = e.argmax(cols)
    coef = fp.encode(epsilon / (2 * sensitivity), f)
    arg = e.scale_by(scores - best.tile(R), coef, f)
    weights = e.exp(arg, -clip, 0, clamp=True)
    cum = []
    acc = None
    for r in range(R):
        acc = weights[r] if acc is None else acc + weights[r]
        cum.append(acc)
    total = cum[-1]
    # U in (0, 1) at scale f+1; compare U * total against the cumulative weights (no division)
    u = e.uniform_unit(draws).with_scale(0)
    target = e.mul(u, total.with_scale(0))
    if R > 1:
        bounds = Shared.cat([c.with_scale(0) * (1 << (f + 1)) for c in cum[:-1]]).repeat(draws)
        above = e.cmp(target.tile(R - 1), bounds).blocks(R - 1)
    else:
        above = []
    hits = []
    for r in range(R):
        lower = e.public([1] * draws) if r == 0 else above[r - 1]
        hits.append(lower - above[r] if r < R - 1 else lower)
    index = hits[0] * 0
    for r in range(1, R):
        index = index + hits[r] * r
    picked = []
    stacked = Shared.cat(hits)
    for col in payloads:
        if isinstance(col, Shared):
            prod = e.mul(stacked, col.with_scale(0).repeat(draws)).blocks(R)
            out = prod[0]
            for p in prod[1:]:
                out = out + p
            picked.append(out.with_scale(col.scale))
        else:
            out = hits[0] * int(col[0])
            for r in range(1, R):
                out = out + hits[r] * int(col[r])
            picked.append(out)
    return index, picked


class DPTreeTrainer(TreeTrainer):
    """Basic training with noisy pruning counts, exponential-mechanism splits and noisy leaf counts.

    The purity test and the positive-gain test stay exact so that a very large
    epsilon reproduces the non-private tree.
    """

    def __init__(self, fed, params, epsilon, membership=None, feature_masks=None, tag="tree"):
        if params.task != CLASSIFICATION:
            raise ConfigError("private training is implemented for classification trees")
        super().__init__(fed, params, membership, feature_masks, None, tag)
        self.budget = DpBudget(epsilon, params.max_depth)
        self.eps = epsilon

    def _noise(self, count, sensitivity=COUNT_SENSITIVITY):
        return sample_laplace_shared(self.mpc, 0, sensitivity / self.eps, count)

    def _prune(self, N, G, best):
        e = self.mpc
        f = self.f
        noisy = N.lift(f) + self._noise(1)
        bit = e.cmp(self.params.min_split_samples << f, noisy)
        gmax, _ = best
        pure = 1 - e.cmp(N, gmax, self.count_width)
        return int(e.open(e.bit_or(bit, pure), "prune")[0]) == 1

    def _choose(self, gains):
        e = self.mpc
        cols = [[c[t] for c in self.cands] for t in range(3)] + [gains]
        _, picked = exp_mech_select(e, gains, self.eps, GINI_SENSITIVITY, payloads=cols)
        if int(e.open(e.cmp(picked[3], 0), "gain")[0]) == 0:
            return None
        return self._reveal_split(picked[:3])

    def _leaf_value(self, N, G, best):
        f = self.f
        noisy = Shared.cat([g.lift(f) for g in G]) + self._noise(len(G))
        _, (label,) = self.mpc.argmax(noisy.blocks(len(G)), [[k] for k in range(len(G))])
        return label


def dp_train(fed, params, epsilon, membership=None, feature_masks=None, tag="tree"):
    trainer = DPTreeTrainer(fed, params, epsilon, membership, feature_masks, tag)
    return trainer.train(), trainer.budget
