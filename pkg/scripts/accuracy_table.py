"""Accuracy of the federated tree against the fixed-point oracle, its float twin and sklearn."""
import argparse

import numpy as np
from sklearn.datasets import load_breast_cancer
from sklearn.tree import DecisionTreeClassifier

from pivot_vfl import phe
from pivot_vfl.harness.data import accuracy, synth, vsplit
from pivot_vfl.protocol.basic import train_basic
from pivot_vfl.protocol.predict import predict_basic_rows
from pivot_vfl.runtime import Federation
from pivot_vfl.tree import TreeParams, cart_train, encode_matrix, predict_rows


def evaluate(name, x, y, keys, params, parties, seed):
    perm = np.random.default_rng(seed).permutation(len(y))
    cut = int(0.7 * len(y))
    tr, te = perm[:cut], perm[cut:]
    parts, test = vsplit(encode_matrix(x[tr]), parties), vsplit(encode_matrix(x[te]), parties)
    fed = Federation(*keys, parts, y[tr], seed=seed)
    model = train_basic(fed, params)
    proto = accuracy(predict_basic_rows(fed, model, test), y[te])
    oracle = accuracy(predict_rows(cart_train(parts, y[tr], params), test), y[te])
    twin = cart_train(vsplit(x[tr], parties), y[tr], params, arithmetic="float")
    flt = accuracy(predict_rows(twin, vsplit(x[te], parties)), y[te])
    sk = DecisionTreeClassifier(max_depth=params.max_depth, min_samples_split=params.min_split_samples,
                                random_state=0).fit(x[tr], y[tr]).score(x[te], y[te])
    print(f"{name:<16} {len(y):>5} {proto:>9.4f} {oracle:>9.4f} {flt:>9.4f} {sk:>9.4f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--parties", type=int, default=3)
    ap.add_argument("--depth", type=int, default=4)
    ap.add_argument("--splits", type=int, default=8)
    ap.add_argument("--key-bits", type=int, default=256)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    keys = phe.keygen(args.key_bits, args.parties, seed=args.seed, test_mode=True)
    params = TreeParams(max_depth=args.depth, max_splits=args.splits)
    print(f"{'dataset':<16} {'rows':>5} {'protocol':>9} {'oracle':>9} {'float':>9} {'sklearn':>9}")
    x, y = load_breast_cancer(return_X_y=True)
    evaluate("breast_cancer", x, y, keys, params, args.parties, args.seed)
    for k in range(3):
        x, y = synth(300, 6, 2 + k, seed=k)
        evaluate(f"synth c={2 + k}", x, y, keys, TreeParams(n_classes=2 + k, max_depth=args.depth,
                                                           max_splits=args.splits), args.parties, args.seed)


if __name__ == "__main__":
    main()
