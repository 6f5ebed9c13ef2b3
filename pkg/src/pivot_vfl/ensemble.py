"""Random forest and gradient boosting built on the basic tree protocol.

Each ensemble comes with a plaintext twin (``*_plain``) that applies the same
fixed-point recipe to the concatenated data; the federated run must match it.
"""
from dataclasses import dataclass, field
import math
import random

import numpy as np

from . import fixedpoint as fp
from . import phe
from .bridge import cipher_mul, enc_to_shares, shares_to_enc
from .errors import ConfigError
from .harness.transport import REVEAL
from .mpc import Shared
from .protocol.basic import train_basic
from .protocol.predict import encrypted_predict
from .tree import CLASSIFICATION, REGRESSION, TreeParams, cart_predict, cart_train, first_argmax, with_params


# -- random forest ---------------------------------------------------------------------

@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 4
    max_features: object = "sqrt"   # "sqrt", "all", a fraction in (0, 1] or a count
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("a forest needs at least one tree")


@dataclass
class TreePlan:
    membership: np.ndarray        # private to the super client
    feature_masks: list           # public: usable local features per party


@dataclass
class Forest:
    params: TreeParams
    trees: list
    plans: list = field(default_factory=list)
    forest: ForestParams = None

    @property
    def output_scale(self):
        return 0 if self.params.task == CLASSIFICATION else 2 * self.params.frac_bits


def _n_features(total, rule):
    if rule == "sqrt":
        return max(1, round(math.sqrt(total)))
    if rule == "all":
        return total
    if isinstance(rule, float):
        return max(1, min(total, round(rule * total)))
    return max(1, min(total, int(rule)))


def rf_plan(n, dims, forest):
    """Bootstrap memberships and per-tree feature subsets, deterministic under the forest seed."""
    rng = random.Random(f"forest:{forest.seed}")
    feats = [(i, j) for i, d in enumerate(dims) for j in range(d)]
    plans = []
    for _ in range(forest.n_trees):
        picks = [rng.randrange(n) for _ in range(n)]
        member = np.zeros(n, dtype=np.int64)
        member[picks] = 1
        chosen = rng.sample(feats, _n_features(len(feats), forest.max_features))
        masks = [set() for _ in dims]
        for i, j in chosen:
            masks[i].add(j)
        plans.append(TreePlan(member, masks))
    return plans


def rf_train(fed, params, forest):
    dims = [p.features.shape[1] for p in fed.parties]
    plans = rf_plan(fed.n_samples, dims, forest)
    trees = [train_basic(fed, params, membership=pl.membership, feature_masks=pl.feature_masks, tag=f"tree{w}")
             for w, pl in enumerate(plans)]
    return Forest(params, trees, plans, forest)


def rf_train_plain(parts, labels, params, forest):
    plans = rf_plan(len(labels), [p.shape[1] for p in parts], forest)
    trees = [cart_train(parts, labels, params, membership=pl.membership, feature_masks=pl.feature_masks)
             for pl in plans]
    return Forest(params, trees, plans, forest)


def _mean_weight(n_trees, f):
    return round((1 << f) / n_trees)


def rf_predict(fed, forest, sample_parts):
    """Majority vote (classification) or mean (regression, at scale 2f); only the result is opened."""
    params = forest.params
    cts = [encrypted_predict(fed, t, sample_parts) for t in forest.trees]
    W = len(cts)
    if params.task == REGRESSION:
        total = fed.total(cts)
        mean = fed.mul_plain(_mean_weight(W, params.frac_bits), total)
        return fed.joint_decrypt([phe.Ciphertext(mean.value, forest.output_scale)], REVEAL, "prediction")[0]
    e = fed.mpc
    c = params.n_classes
    votes_sh = enc_to_shares(fed, cts, "votes")
    hits = e.eq(votes_sh.tile(c), e.public([k for k in range(c) for _ in range(W)], 0))
    votes = [blk.total() for blk in hits.blocks(c)]
    _, (label,) = e.argmax(votes, [[k] for k in range(c)])
    return int(e.open(label, "prediction")[0])


def rf_predict_plain(forest, sample_parts):
    params = forest.params
    preds = [cart_predict(t, sample_parts) for t in forest.trees]
    if params.task == REGRESSION:
        return sum(preds) * _mean_weight(len(preds), params.frac_bits)
    votes = [sum(1 for p in preds if p == k) for k in range(params.n_classes)]
    return first_argmax(votes)[0]


# -- gradient boosting ---------------------------------------------------------------------

@dataclass(frozen=True)
class BoostParams:
    n_rounds: int = 4
    learning_rate: float = 0.1

    def __post_init__(self):
        if self.n_rounds < 1:
            raise ConfigError("boosting needs at least one round")
        if not 0 < self.learning_rate <= 1:
            raise ConfigError("learning rate must lie in (0, 1]")


@dataclass
class Booster:
    params: TreeParams            # user-facing task and class count
    boost: BoostParams
    trees: list                   # trees[w][k]: round w, class k (one entry for regression)

    @property
    def output_scale(self):
        return 0 if self.params.task == CLASSIFICATION else self.params.frac_bits


def _tree_params(params):
    return with_params(params, task=REGRESSION)


def _targets(labels, params):
    """Per-output regression targets at scale f."""
    f = params.frac_bits
    if params.task == REGRESSION:
        return [[int(v) for v in labels]]
    return [[(1 << f) if int(v) == k else 0 for v in labels] for k in range(params.n_classes)]


def _rescale(fed, cts, bits, tag):
    """Drop ``bits`` fractional bits of encrypted values via a round trip through shares."""
    sh = enc_to_shares(fed, cts, tag)
    return shares_to_enc(fed, fed.mpc.trunc(sh, bits), tag)


def _enc_square(fed, cts):
    return cipher_mul(fed, cts, cts, owner=fed.super_index, tag="square")


def gbdt_train(fed, params, boost):
    f = params.frac_bits
    sup = fed.super_index
    tp = _tree_params(params)
    targets = _targets(fed.parties[sup].labels, params)
    enc_targets = [fed.encrypt(sup, t, f) for t in targets]
    outputs = len(targets)
    residual = enc_targets
    scores = None
    rows = _rows(fed)
    rounds = []
    for w in range(boost.n_rounds):
        trees = []
        for k in range(outputs):
            if w == 0:
                t = train_basic(fed, tp, labels=targets[k], tag=f"r{w}c{k}")
            else:
                t = train_basic(fed, tp, enc_labels=[residual[k], _enc_square(fed, residual[k])],
                                tag=f"r{w}c{k}")
            trees.append(t)
        rounds.append(trees)
        if w == boost.n_rounds - 1:
            break
        preds = [[encrypted_predict(fed, t, r) for r in rows] for t in trees]
        steps = [_rescale(fed, [fed.mul_plain(boost.learning_rate, c, f) for c in p], f, "step") for p in preds]
        if params.task == REGRESSION:
            residual = [fed.vsub(residual[0], steps[0])]
            continue
        scores = steps if scores is None else [fed.vadd(s, d) for s, d in zip(scores, steps)]
        probs = _enc_softmax(fed, scores)
        residual = [fed.vsub(y, p) for y, p in zip(enc_targets, probs)]
    return Booster(params, boost, rounds)


def _rows(fed):
    n = fed.n_samples
    return [[p.features[r] for p in fed.parties] for r in range(n)]


def _enc_softmax(fed, scores):
    c = len(scores)
    n = len(scores[0])
    sh = enc_to_shares(fed, [x for s in scores for x in s], "scores").blocks(c)
    probs = fed.mpc.softmax([b.with_scale(fed.frac_bits) for b in sh])
    out = shares_to_enc(fed, Shared.cat(probs), "probs")
    return [out[k * n:(k + 1) * n] for k in range(c)]


def gbdt_train_plain(parts, labels, params, boost):
    f = params.frac_bits
    nu = fp.encode(boost.learning_rate, f)
    tp = _tree_params(params)
    targets = _targets(labels, params)
    n = len(labels)
    residual = [list(t) for t in targets]
    scores = None
    rows = [[p[r] for p in parts] for r in range(n)]
    rounds = []
    for w in range(boost.n_rounds):
        trees = [cart_train(parts, np.array(res, dtype=object), tp) for res in residual]
        rounds.append(trees)
        if w == boost.n_rounds - 1:
            break
        steps = [[(nu * cart_predict(t, r)) >> f for r in rows] for t in trees]
        if params.task == REGRESSION:
            residual = [[y - s for y, s in zip(residual[0], steps[0])]]
            continue
        scores = steps if scores is None else [[a + b for a, b in zip(s, d)] for s, d in zip(scores, steps)]
        probs = [fp.softmax([scores[k][r] for k in range(len(scores))], f=f) for r in range(n)]
        residual = [[y - probs[r][k] for r, y in enumerate(targets[k])] for k in range(len(targets))]
    return Booster(params, boost, rounds)


def gbdt_predict(fed, booster, sample_rows):
    """Predictions for a batch of samples (each a list of per-party feature vectors)."""
    params = booster.params
    f = params.frac_bits
    outputs = len(booster.trees[0])
    cts = []
    for k in range(outputs):
        for r in sample_rows:
            terms = [fed.mul_plain(booster.boost.learning_rate, encrypted_predict(fed, rnd[k], r), f)
                     for rnd in booster.trees]
            cts.append(fed.total(terms))
    if params.task == REGRESSION:
        return [v >> f for v in fed.joint_decrypt(cts, REVEAL, "prediction")]
    e = fed.mpc
    sh = e.trunc(enc_to_shares(fed, cts, "scores"), f)
    probs = e.softmax(sh.blocks(outputs))
    _, (label,) = e.argmax(probs, [[k] for k in range(outputs)])
    return [int(v) for v in e.open(label, "prediction")]


def gbdt_predict_plain(booster, sample_rows):
    params = booster.params
    f = params.frac_bits
    nu = fp.encode(booster.boost.learning_rate, f)
    outputs = len(booster.trees[0])
    out = []
    for r in sample_rows:
        scores = [sum(nu * cart_predict(rnd[k], r) for rnd in booster.trees) >> f for k in range(outputs)]
        if params.task == REGRESSION:
            out.append(scores[0])
        else:
            out.append(first_argmax(fp.softmax(scores, f=f))[0])
    return out
