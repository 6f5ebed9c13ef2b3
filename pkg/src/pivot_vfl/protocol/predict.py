"""Federated prediction.

Basic models: an encrypted leaf-indicator vector travels from the last party to
the first; each party zeroes the leaves its own splits rule out and
re-randomises every entry, then the first party forms the dot product with the
leaf labels and the result is jointly decrypted.

Hidden models: thresholds and leaf labels are secret-shared and the tree is
walked obliviously over a complete binary tree of the trained depth.
"""
import numpy as np

from ..bridge import enc_to_shares
from ..harness.transport import REVEAL
from ..mpc import Shared


def leaf_positions(model):
    """Leaves in left-to-right order and, for each internal node, its left/right leaf positions."""
    leaves = [nd.id for nd in model.nodes if nd.leaf]
    pos = {nid: k for k, nid in enumerate(leaves)}
    below = {}

    def collect(nid):
        nd = model.nodes[nid]
        if nd.leaf:
            below[nid] = [pos[nid]]
        else:
            below[nid] = collect(nd.left) + collect(nd.right)
        return below[nid]

    collect(0)
    sides = {nd.id: (set(below[nd.left]), set(below[nd.right])) for nd in model.nodes if not nd.leaf}
    return leaves, sides


def leaf_indicator(fed, model, sample_parts, trace=None):
    """[eta]: one encrypted 0/1 entry per leaf, updated by every party from the last to the first.

    ``trace`` (a list) receives a copy of [eta] after each party's update.
    """
    leaves, sides = leaf_positions(model)
    t = len(leaves)
    last = fed.m - 1
    eta = fed.encrypt(last, [1] * t, 0)
    for i in range(last, -1, -1):
        keep = np.ones(t, dtype=np.int64)
        for nd in model.nodes:
            if nd.leaf or nd.party != i:
                continue
            go_left = sample_parts[i][nd.feature] <= nd.threshold
            for k in (sides[nd.id][1] if go_left else sides[nd.id][0]):
                keep[k] = 0
        eta = fed.masked_product(i, keep, eta)
        if trace is not None:
            trace.append(list(eta))
        if i > 0:
            eta = fed.transport.exchange(i, i - 1, eta, "eta")
            fed.counters.rounds += 1
    return leaves, eta


def encrypted_predict(fed, model, sample_parts):
    """[y_hat] for one sample without decrypting (labels must be public integers)."""
    leaves, eta = leaf_indicator(fed, model, sample_parts)
    labels = [int(model.nodes[nid].label) for nid in leaves]
    y = fed.dot(labels, eta)
    return type(y)(y.value, model.params.label_scale)


def predict_basic(fed, model, sample_parts):
    """Decrypted prediction (scaled integer label) for one sample."""
    ct = encrypted_predict(fed, model, sample_parts)
    return fed.joint_decrypt([ct], REVEAL, "prediction")[0]


def predict_basic_rows(fed, model, parts):
    n = len(parts[0])
    return [predict_basic(fed, model, [p[r] for p in parts]) for r in range(n)]


# -- hidden models ---------------------------------------------------------------------

class SharedTree:
    """Complete depth-h layout of a hidden tree with shared thresholds and leaf labels.

    Slot numbering is heap order (root 0, children 2k+1 and 2k+2).  Real
    internal nodes keep their (party, feature); slots below a shallow leaf are
    pass-through dummies that always route left, and the leaf label sits in
    the left-most descendant at the bottom level.
    """

    def __init__(self, fed, model):
        self.depth = max(model.depth(), 0)
        h = self.depth
        n_internal = (1 << h) - 1
        self.slots = [None] * n_internal        # (party, feature) or None for dummies
        self.leaf_of = {}                       # bottom index -> model leaf id
        thresholds, labels = [], []
        order_t, order_l = [], []

        def place(nid, slot, depth):
            nd = model.nodes[nid]
            if nd.leaf:
                k = slot
                for _ in range(h - depth):
                    k = 2 * k + 1
                self.leaf_of[k - n_internal] = nid
                labels.append(nd.label)
                order_l.append(k - n_internal)
                return
            self.slots[slot] = (nd.party, nd.feature)
            thresholds.append(nd.threshold)
            order_t.append(slot)
            place(nd.left, 2 * slot + 1, depth + 1)
            place(nd.right, 2 * slot + 2, depth + 1)

        place(0, 0, 0)
        sh = enc_to_shares(fed, thresholds + labels, "model") if thresholds or labels else None
        f = model.params.frac_bits
        self.thresholds = {}
        self.labels = {}
        for k, slot in enumerate(order_t):
            self.thresholds[slot] = sh[k].with_scale(f)
        for k, pos in enumerate(order_l):
            self.labels[pos] = sh[len(order_t) + k].with_scale(model.params.label_scale)
        self.label_scale = model.params.label_scale
        self.frac_bits = f


def predict_hidden_rows(fed, shared_tree, parts, tag="prediction"):
    """Oblivious prediction for every row; only the final labels are opened."""
    e = fed.mpc
    st = shared_tree
    h = st.depth
    n = len(parts[0])
    f = st.frac_bits
    if h == 0:
        out = st.labels[0].tile(n)
        return [int(v) for v in e.open(out, tag)]
    n_internal = (1 << h) - 1
    # the owner of each real slot shares its feature column for all rows
    xs, ts = [], []
    for slot in range(n_internal):
        if st.slots[slot] is None:
            xs.append(e.public([0] * n, f))
            ts.append(e.public([0] * n, f))
        else:
            i, j = st.slots[slot]
            xs.append(e.share(i, [int(v) for v in parts[i][:, j]], f))
            ts.append(st.thresholds[slot].tile(n))
    go_right = e.cmp(Shared.cat(xs), Shared.cat(ts)).blocks(n_internal)
    markers = [e.public([1] * n, 0)]
    for level in range(h):
        first = (1 << level) - 1
        width = 1 << level
        bits = Shared.cat([go_right[first + k] for k in range(width)])
        cur = Shared.cat(markers)
        right = e.mul(cur, bits)
        left = cur - right
        lb, rb = left.blocks(width), right.blocks(width)
        markers = [b for k in range(width) for b in (lb[k], rb[k])]
    labels = [st.labels[k].tile(n) if k in st.labels else e.public([0] * n, st.label_scale)
              for k in range(1 << h)]
    prods = e.mul(Shared.cat(markers), Shared.cat([lab.with_scale(0) for lab in labels])).blocks(1 << h)
    total = prods[0]
    for p in prods[1:]:
        total = total + p
    return [int(v) for v in e.open(total, tag)]
