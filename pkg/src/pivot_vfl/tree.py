"""Decision-tree primitives and the plaintext CART oracle.

The oracle trains on the concatenation of all party partitions with the same
candidate enumeration (party, feature, split), the same fixed-point gain recipe
and the same tie-breaking as the federated protocols, so a protocol run must
reproduce its tree exactly.  ``arithmetic="float"`` gives an unquantised
reference for accuracy comparisons.
"""
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import fixedpoint as fp
from .errors import ConfigError

CLASSIFICATION = "classification"
REGRESSION = "regression"


@dataclass(frozen=True)
class TreeParams:
    task: str = CLASSIFICATION
    n_classes: int = 2
    max_depth: int = 4
    max_splits: int = 8
    min_split_samples: int = 5
    frac_bits: int = fp.FRAC_BITS

    def __post_init__(self):
        if self.task not in (CLASSIFICATION, REGRESSION):
            raise ConfigError(f"unknown task {self.task!r}")
        if self.task == CLASSIFICATION and self.n_classes < 2:
            raise ConfigError("classification needs at least two classes")
        if self.max_depth < 0 or self.max_splits < 1:
            raise ConfigError("max_depth must be >= 0 and max_splits >= 1")
        if self.min_split_samples < 1:
            raise ConfigError("min_split_samples must be >= 1")

    @property
    def label_scale(self):
        return 0 if self.task == CLASSIFICATION else self.frac_bits

    @property
    def n_stats(self):
        """Label statistics per branch: class counts, or (sum, sum of squares)."""
        return self.n_classes if self.task == CLASSIFICATION else 2


@dataclass
class Node:
    id: int
    depth: int
    leaf: bool
    party: int = None
    feature: int = None          # feature index local to ``party``
    split: int = None            # index into that feature's thresholds
    threshold: object = None     # int, Ciphertext or None when hidden
    label: object = None         # int, Ciphertext, or None for internal nodes
    left: int = None
    right: int = None
    dummy: bool = False


@dataclass
class TreeModel:
    params: TreeParams
    nodes: list = field(default_factory=list)
    hidden: bool = False

    @property
    def root(self):
        return self.nodes[0]

    def internal(self):
        return [nd for nd in self.nodes if not nd.leaf]

    def leaves(self):
        return [nd for nd in self.nodes if nd.leaf]

    def depth(self):
        return max(nd.depth for nd in self.nodes)

    def structure(self):
        """Public shape: (id, depth, leaf, party, feature, split, left, right)."""
        return [(nd.id, nd.depth, nd.leaf, nd.party, nd.feature, nd.split, nd.left, nd.right)
                for nd in self.nodes]


# -- split candidates -------------------------------------------------------------

def split_gaps(n_distinct, max_splits):
    """Gap positions between sorted distinct values, spread evenly."""
    if n_distinct < 2:
        return []
    if max_splits >= n_distinct - 1:
        return list(range(1, n_distinct))
    gaps = []
    for s in range(1, max_splits + 1):
        g = min(max(s * n_distinct // (max_splits + 1), 1), n_distinct - 1)
        if not gaps or gaps[-1] != g:
            gaps.append(g)
    return gaps


def gen_splits(column, max_splits):
    """Thresholds for one fixed-point feature column; a sample goes left when x <= t."""
    u = sorted(set(int(v) for v in column))
    return [(u[g - 1] + u[g]) // 2 for g in split_gaps(len(u), max_splits)]


def gen_splits_float(column, max_splits):
    u = sorted(set(float(v) for v in column))
    return [(u[g - 1] + u[g]) / 2 for g in split_gaps(len(u), max_splits)]


@dataclass
class SplitTable:
    """One party's candidate splits: thresholds and left-indicator matrices per feature."""
    thresholds: list
    indicators: list     # per feature: (n, S_j) bool, True = goes left

    @classmethod
    def build(cls, features, max_splits, allowed=None, arithmetic="fixed"):
        gen = gen_splits if arithmetic == "fixed" else gen_splits_float
        thresholds, indicators = [], []
        for j in range(features.shape[1]):
            col = features[:, j]
            ts = gen(col, max_splits) if allowed is None or j in allowed else []
            thresholds.append(ts)
            if ts:
                indicators.append(np.stack([col <= t for t in ts], axis=1))
            else:
                indicators.append(np.zeros((len(col), 0), dtype=bool))
        return cls(thresholds, indicators)

    def candidates(self):
        return [(j, s) for j, ts in enumerate(self.thresholds) for s in range(len(ts))]

    def max_splits(self):
        return max((len(ts) for ts in self.thresholds), default=0)


def enumerate_candidates(tables):
    """Global candidate order: party, then feature, then split."""
    return [(i, j, s) for i, t in enumerate(tables) for (j, s) in t.candidates()]


# -- exact impurity measures -----------------------------------------------------------

def gini(counts):
    """Gini impurity of a node with the given class counts, as a Fraction."""
    total = sum(counts)
    if total == 0:
        return Fraction(0)
    return 1 - sum(Fraction(g, total) ** 2 for g in counts)


def gain_gini(parent, left, right):
    n = sum(parent)
    if n == 0:
        return Fraction(0)
    return gini(parent) - Fraction(sum(left), n) * gini(left) - Fraction(sum(right), n) * gini(right)


def variance(total, total_sq, count):
    """Label variance from the sum, the sum of squares and the count."""
    if count == 0:
        return Fraction(0)
    return Fraction(total_sq, count) - Fraction(total, count) ** 2


# -- gain recipes -------------------------------------------------------------------

def count_bits(n):
    return max(1, int(n).bit_length())


def fixed_gains(stats, node_totals, params, n_samples):
    """Fixed-point gains for every candidate (scale f); degenerate splits score -1.

    stats: list of (n_l, n_r, g_l, g_r) with g_* lists of length n_stats.
    node_totals: (N, G).  Classification counts are scale-0 integers; regression
    g[0] is a label sum at scale f and g[1] a sum of squares at scale 2f.
    """
    f = params.frac_bits
    hi = count_bits(n_samples)
    one = 1 << f
    N, G = node_totals
    parts_n = fp.reciprocal_parts(N << f, 0, hi, f)
    if params.task == CLASSIFICATION:
        parent = sum(fp.mul(p, p, f) for p in (fp.div_with(g << f, parts_n, f) for g in G))
    else:
        mean = fp.div_with(G[0], parts_n, f)
        parent = fp.div_with(G[1] >> f, parts_n, f) - fp.mul(mean, mean, f)
    out = []
    for n_l, n_r, g_l, g_r in stats:
        valid = n_l > 0 and n_r > 0
        parts_l = fp.reciprocal_parts((n_l << f) + (0 if n_l > 0 else one), 0, hi, f)
        parts_r = fp.reciprocal_parts((n_r << f) + (0 if n_r > 0 else one), 0, hi, f)
        w_l = fp.div_with(n_l << f, parts_n, f)
        w_r = fp.div_with(n_r << f, parts_n, f)
        if params.task == CLASSIFICATION:
            s_l = sum(fp.mul(p, p, f) for p in (fp.div_with(g << f, parts_l, f) for g in g_l))
            s_r = sum(fp.mul(p, p, f) for p in (fp.div_with(g << f, parts_r, f) for g in g_r))
            gain = fp.mul(w_l, s_l, f) + fp.mul(w_r, s_r, f) - parent
        else:
            m_l = fp.div_with(g_l[0], parts_l, f)
            v_l = fp.div_with(g_l[1] >> f, parts_l, f) - fp.mul(m_l, m_l, f)
            m_r = fp.div_with(g_r[0], parts_r, f)
            v_r = fp.div_with(g_r[1] >> f, parts_r, f) - fp.mul(m_r, m_r, f)
            gain = parent - (fp.mul(w_l, v_l, f) + fp.mul(w_r, v_r, f))
        out.append(gain if valid else -one)
    return out


def float_gains(stats, node_totals, params, n_samples):
    N, G = node_totals
    if params.task == CLASSIFICATION:
        parent = sum((g / N) ** 2 for g in G)
    else:
        parent = G[1] / N - (G[0] / N) ** 2
    out = []
    for n_l, n_r, g_l, g_r in stats:
        if n_l <= 0 or n_r <= 0:
            out.append(-1.0)
            continue
        if params.task == CLASSIFICATION:
            gain = (n_l / N) * sum((g / n_l) ** 2 for g in g_l) + (n_r / N) * sum((g / n_r) ** 2 for g in g_r) - parent
        else:
            v_l = g_l[1] / n_l - (g_l[0] / n_l) ** 2
            v_r = g_r[1] / n_r - (g_r[0] / n_r) ** 2
            gain = parent - ((n_l / N) * v_l + (n_r / N) * v_r)
        out.append(gain)
    return out


def first_argmax(values, init=None):
    """Index of the first maximum with strict >, starting from an optional floor."""
    best, idx = (values[0], 0) if init is None else (init, -1)
    for r in range(0 if init is not None else 1, len(values)):
        if values[r] > best:
            best, idx = values[r], r
    return idx, best


# -- the oracle ---------------------------------------------------------------------

def label_stats(labels, params):
    """Per-sample label statistic vectors (beta for classification, y and y^2 for regression)."""
    labels = np.asarray(labels)
    if params.task == CLASSIFICATION:
        return [(labels == k).astype(np.int64) for k in range(params.n_classes)]
    vals = [int(v) for v in labels] if labels.dtype == object or labels.dtype.kind in "iu" else list(labels)
    return [np.array(vals, dtype=object), np.array([v * v for v in vals], dtype=object)]


def cart_train(parts, labels, params, membership=None, feature_masks=None, arithmetic="fixed"):
    """Train one tree on vertically partitioned features held in the clear.

    parts: list of (n, d_i) arrays (fixed-point integers, or floats when
    arithmetic="float").  labels: class ids, or regression targets (fixed-point
    integers / floats).  membership: optional 0/1 (or count) weights per sample.
    feature_masks: optional per-party sets of usable local feature indices.
    """
    n = len(labels)
    tables = [SplitTable.build(p, params.max_splits, None if feature_masks is None else feature_masks[i], arithmetic)
              for i, p in enumerate(parts)]
    cands = enumerate_candidates(tables)
    alpha = np.ones(n, dtype=np.int64) if membership is None else np.asarray(membership, dtype=np.int64)
    beta = label_stats(labels, params)
    if arithmetic == "float":
        beta = [np.asarray(b, dtype=float) for b in beta]
    gains_fn = fixed_gains if arithmetic == "fixed" else float_gains
    model = TreeModel(params)
    f = params.frac_bits

    def stat_sum(vec, mask):
        return sum(v for v, m in zip(vec, mask) if m) if vec.dtype == object else vec[mask.astype(bool)].sum().item()

    def node_label(N, G):
        if params.task == CLASSIFICATION:
            return first_argmax(list(G))[0]
        if arithmetic == "fixed":
            return fp.div(G[0], N << f, 0, count_bits(n), f)
        return G[0] / N if N else 0.0

    def build(alpha, depth):
        nid = len(model.nodes)
        node = Node(nid, depth, leaf=True)
        model.nodes.append(node)
        gam = [b * alpha for b in beta]
        N = int(alpha.sum())
        G = [stat_sum(g, np.ones(n, dtype=bool)) for g in gam]
        if depth == params.max_depth:
            node.label = node_label(N, G)
            return nid
        stop = N < params.min_split_samples
        if params.task == CLASSIFICATION:
            stop = stop or max(G) >= N
        if stop:
            node.label = node_label(N, G)
            return nid
        stats = []
        for (i, j, s) in cands:
            left = tables[i].indicators[j][:, s]
            right = ~left
            stats.append((int(alpha[left].sum()), int(alpha[right].sum()),
                          [stat_sum(g, left) for g in gam], [stat_sum(g, right) for g in gam]))
        gains = gains_fn(stats, (N, G), params, n)
        floor = -(1 << f) if arithmetic == "fixed" else -1.0
        best, gmax = first_argmax(gains, init=floor) if gains else (-1, floor)
        if best < 0 or gmax <= 0:
            node.label = node_label(N, G)
            return nid
        i, j, s = cands[best]
        node.leaf = False
        node.party, node.feature, node.split = i, j, s
        node.threshold = tables[i].thresholds[j][s]
        left = tables[i].indicators[j][:, s].astype(np.int64)
        node.left = build(alpha * left, depth + 1)
        node.right = build(alpha * (1 - left), depth + 1)
        return nid

    build(alpha, 0)
    return model


def cart_predict(model, sample_parts):
    """Follow the tree for one sample given as per-party feature vectors."""
    node = model.nodes[0]
    while not node.leaf:
        x = sample_parts[node.party][node.feature]
        node = model.nodes[node.left if x <= node.threshold else node.right]
    return node.label


def predict_rows(model, parts):
    n = len(parts[0])
    return [cart_predict(model, [p[r] for p in parts]) for r in range(n)]


def with_params(params, **kw):
    return replace(params, **kw)


def encode_matrix(x, frac_bits=fp.FRAC_BITS):
    """Float matrix -> fixed-point int64 matrix (round half even)."""
    return np.rint(np.asarray(x, dtype=float) * (1 << frac_bits)).astype(np.int64)


def encode_labels(y, params):
    if params.task == CLASSIFICATION:
        return np.asarray(y).astype(np.int64)
    return np.array([fp.encode(float(v), params.frac_bits) for v in y], dtype=object)
