"""Tree training that keeps split thresholds and leaf labels hidden.

Only the owning party and feature of each split are opened.  The split index
stays shared; an encrypted one-hot selector picks the left-branch indicator
column and the threshold homomorphically, and the child availability vectors
come from a ciphertext-ciphertext product.  Leaf labels are converted back to
ciphertexts instead of being opened.
"""
import numpy as np

from .. import phe
from ..bridge import cipher_mul, shares_to_enc
from ..mpc import Shared
from .basic import TreeTrainer


class HiddenTreeTrainer(TreeTrainer):
    hides_model = True

    def __init__(self, fed, params, membership=None, feature_masks=None, tag="tree"):
        super().__init__(fed, params, membership, feature_masks, None, tag)
        # every selector is padded to the same width so its length reveals nothing
        self.pad = params.max_splits

    def _reveal_split(self, payload):
        i, j = (int(v) for v in self.mpc.open(Shared.cat(payload[:2]), "split"))
        return i, j, payload[2]

    def _leaf_label(self, N, G, best):
        value = self._leaf_value(N, G, best)
        return shares_to_enc(self.fed, value, "leaf")[0]

    def _split(self, node, split, alpha, gammas):
        fed = self.fed
        e = self.mpc
        i, j, s_shared = split
        node.party, node.feature = i, j
        b = self.pad
        sel = e.eq(s_shared.tile(b), e.public(list(range(b)), 0))
        lam = shares_to_enc(fed, sel, "selector")
        table = self.tables[i]
        ind = table.indicators[j].astype(np.int64)
        S_j = ind.shape[1]
        # the owner selects the indicator column and threshold without learning the index
        v = [fed.dot(list(row) + [0] * (b - S_j), lam) for row in ind]
        v = fed.rerandomize(i, v)
        fed.transport.broadcast(i, v, "indicator")
        tau = fed.dot(list(table.thresholds[j]) + [0] * (b - S_j), lam)
        node.threshold = phe.Ciphertext(fed.rerandomize(i, [tau])[0].value, self.f)
        a_l = cipher_mul(fed, alpha, v, owner=i, tag="alpha")
        a_r = fed.vsub(alpha, a_l)
        fed.transport.broadcast(i, [a_l, a_r], "children")
        return (a_l, None), (a_r, None)


def train_enhanced(fed, params, membership=None, feature_masks=None, tag="tree"):
    return HiddenTreeTrainer(fed, params, membership, feature_masks, tag).train()
