import functools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pivot_vfl import phe
from pivot_vfl.harness.data import synth, vsplit
from pivot_vfl.mpc import MPCEngine
from pivot_vfl.runtime import Federation
from pivot_vfl.tree import CLASSIFICATION, encode_labels, encode_matrix

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

TEST_KEY_BITS = 256


@functools.lru_cache(maxsize=None)
def shared_keys(parties=3, bits=TEST_KEY_BITS, seed=7):
    return phe.keygen(bits, parties, seed=seed, test_mode=True)


@pytest.fixture(scope="session")
def keys3():
    return shared_keys(3)


@pytest.fixture
def engine():
    return MPCEngine(3, seed=11)


def make_fed(parts, labels=None, parties=None, seed=0, **kw):
    m = parties or len(parts)
    pk, keys = shared_keys(m)
    return Federation(pk, keys, parts, labels, seed=seed, **kw)


def dataset(n, d, parties=3, task=CLASSIFICATION, n_classes=2, seed=0, params=None):
    """Fixed-point partitions and labels for a synthetic dataset."""
    x, y = synth(n, d, n_classes, task, seed)
    parts = vsplit(encode_matrix(x), parties)
    if params is None:
        labels = np.asarray(y).astype(np.int64) if task == CLASSIFICATION else encode_labels(y, _reg_params())
    else:
        labels = encode_labels(y, params)
    return parts, labels


def _reg_params():
    from pivot_vfl.tree import TreeParams
    return TreeParams("regression")


def decrypt_all(fed, cts):
    return [phe.decrypt_int(fed.pk, c, [p.key for p in fed.parties]) for c in cts]


def gain_margins(parts, labels, params):
    """Gap between the best and second-best fixed-point gain at every split node of the oracle tree."""
    from pivot_vfl.tree import SplitTable, cart_train, enumerate_candidates, fixed_gains, label_stats
    tables = [SplitTable.build(p, params.max_splits) for p in parts]
    cands = enumerate_candidates(tables)
    beta = label_stats(labels, params)
    n = len(labels)
    model = cart_train(parts, labels, params)
    out = []

    def walk(nid, alpha):
        nd = model.nodes[nid]
        if nd.leaf:
            return
        gam = [b * alpha for b in beta]
        stats = []
        for i, j, s in cands:
            left = tables[i].indicators[j][:, s]
            stats.append((int(alpha[left].sum()), int(alpha[~left].sum()),
                          [int(g[left].sum()) for g in gam], [int(g[~left].sum()) for g in gam]))
        gains = sorted(fixed_gains(stats, (int(alpha.sum()), [int(g.sum()) for g in gam]), params, n))
        out.append(gains[-1] - gains[-2] if len(gains) > 1 else 1 << params.frac_bits)
        left = tables[nd.party].indicators[nd.feature][:, nd.split].astype(np.int64)
        walk(nd.left, alpha * left)
        walk(nd.right, alpha * (1 - left))

    walk(0, np.ones(n, dtype=np.int64))
    return out


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
