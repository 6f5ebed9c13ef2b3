"""Tree training where the split (party, feature, threshold index) and leaf labels become public.

Per node: the super client masks its label indicators with the encrypted
sample-availability vector, every party computes encrypted split statistics
by plaintext-ciphertext dot products, everything is converted to shares, and
gains plus the best split are computed in MPC.
"""
import numpy as np

from ..bridge import enc_to_shares
from ..mpc import Shared
from ..tree import (CLASSIFICATION, Node, SplitTable, TreeModel, count_bits, enumerate_candidates,
                    label_stats)


class TreeTrainer:
    """Shared node loop; subclasses replace the reveal/selection steps."""

    hides_model = False

    def __init__(self, fed, params, membership=None, feature_masks=None, enc_labels=None, tag="tree",
                 labels=None):
        self.fed = fed
        self.params = params
        self.mpc = fed.mpc
        self.tag = tag
        self.membership = membership
        self.enc_labels = enc_labels
        self.tables = [SplitTable.build(p.features, params.max_splits,
                                        None if feature_masks is None else feature_masks[i])
                       for i, p in enumerate(fed.parties)]
        self.cands = enumerate_candidates(self.tables)
        self.n = fed.n_samples
        self.f = params.frac_bits
        self.hi = count_bits(self.n)
        self.count_width = self.hi + 3
        self.classification = params.task == CLASSIFICATION
        if enc_labels is None:
            # labels default to the super client's own; boosting passes derived targets it holds
            own = fed.parties[fed.super_index].labels if labels is None else labels
            self.beta = label_stats(own, params)

    # -- entry point -------------------------------------------------------------------

    def train(self):
        fed = self.fed
        sup = fed.super_index
        mem = np.ones(self.n, dtype=np.int64) if self.membership is None else np.asarray(self.membership)
        alpha = fed.encrypt(sup, [int(v) for v in mem], 0)
        fed.transport.broadcast(sup, alpha, "alpha")
        self.model = TreeModel(self.params, hidden=self.hides_model)
        self._build(alpha, self.enc_labels, 0)
        return self.model

    def _build(self, alpha, gammas, depth):
        fed = self.fed
        node = Node(len(self.model.nodes), depth, leaf=True)
        self.model.nodes.append(node)
        start = fed.begin_node()
        if gammas is None:
            gammas = self._label_gammas(alpha)
        N, G = self._totals(alpha, gammas)
        best = self._class_argmax(G)
        evaluated = False
        children = None
        if depth < self.params.max_depth and not self._prune(N, G, best) and self.cands:
            evaluated = True
            gains = self._gains(N, G, self._stats(alpha, gammas))
            split = self._choose(gains)
            if split is not None:
                children = self._split(node, split, alpha, gammas)
        if children is None:
            node.label = self._leaf_label(N, G, best)
        else:
            node.leaf = False
        fed.end_node(start, self.tag, node, evaluated, len(self.cands))
        if children is not None:
            (la, lg), (ra, rg) = children
            node.left = self._build(la, lg, depth + 1)
            node.right = self._build(ra, rg, depth + 1)
        return node.id

    # -- encrypted statistics ------------------------------------------------------------------

    def _label_gammas(self, alpha):
        fed = self.fed
        sup = fed.super_index
        if self.classification:
            gam = [fed.masked_product(sup, b, alpha) for b in self.beta]
        else:
            gam = [fed.masked_product(sup, self.beta[0], alpha, self.f),
                   fed.masked_product(sup, self.beta[1], alpha, 2 * self.f)]
        fed.transport.broadcast(sup, gam, "gamma")
        return gam

    def _totals(self, alpha, gammas):
        fed = self.fed
        cts = [fed.total(alpha)] + [fed.total(g) for g in gammas]
        sh = enc_to_shares(fed, cts, "totals")
        N = sh[0].with_scale(0)
        G = [sh[1 + k].with_scale(gammas[k][0].scale) for k in range(len(gammas))]
        return N, G

    def _stats(self, alpha, gammas):
        """Encrypted (n_l, n_r, g_l, g_r) for every candidate, converted to shares.

        Layout: [n_l | n_r | g_l[0] | g_r[0] | g_l[1] | g_r[1] ...], each block S long.
        """
        fed = self.fed
        blocks = [[] for _ in range(2 + 2 * len(gammas))]
        for i, table in enumerate(self.tables):
            sent = []
            for j, s in table.candidates():
                left = table.indicators[j][:, s].astype(np.int64)
                right = 1 - left
                row = [fed.dot(left, alpha), fed.dot(right, alpha)]
                for g in gammas:
                    row += [fed.dot(left, g), fed.dot(right, g)]
                for b, c in zip(blocks, row):
                    b.append(c)
                sent.extend(row)
            fed.transport.broadcast(i, sent, "stats")
        flat = [c for b in blocks for c in b]
        return enc_to_shares(fed, flat, "stats")

    # -- MPC gain computation (mirrors tree.fixed_gains) -----------------------------------------

    def _gains(self, N, G, stats):
        e = self.mpc
        f = self.f
        one = 1 << f
        S = len(self.cands)
        c = len(G)
        blocks = stats.blocks(2 + 2 * c)
        nl, nr = blocks[0].with_scale(0), blocks[1].with_scale(0)
        counts = Shared.cat([nl, nr])
        parts_n = e.reciprocal_parts(N.lift(f), 0, self.hi)
        if self.classification:
            P = e.div_with(Shared.cat([g.lift(f) for g in G]), parts_n)
            parent = e.mul(P, P).total()
        else:
            mean = e.div_with(G[0], parts_n)
            parent = e.div_with(e.trunc(G[1], f), parts_n) - e.mul(mean, mean)
        pos = e.cmp(counts, 0, self.count_width)
        den = counts.lift(f) + ((1 - pos) * one).with_scale(f)
        y, s, fs = e.reciprocal_parts(den, 0, self.hi)
        w = e.div_with(counts.lift(f), parts_n)
        if self.classification:
            g = Shared.cat([Shared.cat([blocks[2 + 2 * k], blocks[3 + 2 * k]]).with_scale(0).lift(f)
                            for k in range(c)])
            P = e.div_with(g, (y.tile(c), s.tile(c), fs))
            sq = e.mul(P, P).blocks(c)
            ssum = sq[0]
            for b in sq[1:]:
                ssum = ssum + b
            wl, wr = e.mul(w, ssum).blocks(2)
            gain = wl + wr - parent.tile(S)
        else:
            g1 = Shared.cat([blocks[2], blocks[3]]).with_scale(f)
            g2 = Shared.cat([blocks[4], blocks[5]]).with_scale(2 * f)
            m = e.div_with(g1, (y, s, fs))
            var = e.div_with(e.trunc(g2, f), (y, s, fs)) - e.mul(m, m)
            wl, wr = e.mul(w, var).blocks(2)
            gain = parent.tile(S) - (wl + wr)
        valid = e.mul(pos[:S], pos[S:])
        return e.mul(valid, gain + one) - one

    # -- public decisions ------------------------------------------------------------------------

    def _class_argmax(self, G):
        if not self.classification:
            return None
        return self.mpc.argmax(G, [[k] for k in range(len(G))], k=self.count_width)

    def _prune(self, N, G, best):
        e = self.mpc
        bit = e.cmp(self.params.min_split_samples, N, self.count_width)
        if self.classification:
            gmax, _ = best
            pure = 1 - e.cmp(N, gmax, self.count_width)
            bit = e.bit_or(bit, pure)
        return int(e.open(bit, "prune")[0]) == 1

    def _choose(self, gains):
        """Secure argmax over candidates; returns the public split or None."""
        e = self.mpc
        S = len(self.cands)
        if S == 0:
            return None
        one = 1 << self.f
        gmax, payload = e.argmax([gains[r] for r in range(S)], [list(c) for c in self.cands],
                                 init=(-one, [-1, -1, -1]))
        if int(e.open(e.cmp(gmax, 0), "gain")[0]) == 0:
            return None
        return self._reveal_split(payload)

    def _reveal_split(self, payload):
        i, j, s = (int(v) for v in self.mpc.open(Shared.cat(payload), "split"))
        return i, j, s

    def _leaf_value(self, N, G, best):
        if self.classification:
            return best[1][0]
        return self.mpc.div(G[0], N.lift(self.f), 0, self.hi)

    def _leaf_label(self, N, G, best):
        return int(self.mpc.open(self._leaf_value(N, G, best), "leaf")[0])

    def _split(self, node, split, alpha, gammas):
        fed = self.fed
        i, j, s = split
        node.party, node.feature, node.split = i, j, s
        node.threshold = self.tables[i].thresholds[j][s]
        left = self.tables[i].indicators[j][:, s].astype(np.int64)
        a_l = fed.masked_product(i, left, alpha)
        a_r = fed.masked_product(i, 1 - left, alpha)
        fed.transport.broadcast(i, [a_l, a_r], "children")
        if self.enc_labels is None:
            return (a_l, None), (a_r, None)
        g_l = [fed.masked_product(i, left, g) for g in gammas]
        g_r = [fed.masked_product(i, 1 - left, g) for g in gammas]
        fed.transport.broadcast(i, [g_l, g_r], "children")
        return (a_l, g_l), (a_r, g_r)


def train_basic(fed, params, membership=None, feature_masks=None, enc_labels=None, tag="tree", labels=None):
    return TreeTrainer(fed, params, membership, feature_masks, enc_labels, tag, labels).train()
