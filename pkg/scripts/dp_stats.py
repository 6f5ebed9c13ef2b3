"""Statistical checks of the shared Laplace sampler and exponential mechanism, plus accuracy versus epsilon."""
import argparse

import numpy as np
from scipy import stats

from pivot_vfl import fixedpoint as fp
from pivot_vfl import phe
from pivot_vfl.dp import dp_train, exp_mech_select, mech_weights_plain, sample_laplace_shared
from pivot_vfl.harness.data import accuracy, synth, vsplit
from pivot_vfl.harness.transport import Transcript
from pivot_vfl.mpc import MPCEngine
from pivot_vfl.runtime import Federation
from pivot_vfl.tree import TreeParams, encode_matrix, predict_rows

F = fp.FRAC_BITS


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--draws", type=int, default=10_000)
    ap.add_argument("--scale", type=float, default=1.0)
    ap.add_argument("--epsilons", type=float, nargs="+", default=[0.1, 1.0, 10.0, 1e6])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    e = MPCEngine(3, transcript=Transcript(level="reveals"), seed=args.seed)
    x = np.array([int(v) for v in e.reconstruct(sample_laplace_shared(e, 0.0, args.scale, args.draws))]) / 2 ** F
    ks = stats.kstest(x, stats.laplace(0, args.scale).cdf)
    print(f"laplace b={args.scale}: mean {x.mean():+.4f} var {x.var():.4f} (target {2 * args.scale ** 2:.4f}) "
          f"KS p={ks.pvalue:.3f}")

    scores = [0.0, 1.0, -0.5, 2.0, 0.25, 1.5, -1.0, 0.75]
    e = MPCEngine(3, transcript=Transcript(level="reveals"), seed=args.seed + 1)
    idx, _ = exp_mech_select(e, e.share(0, [fp.encode(s) for s in scores], F), 1.0, 1.0, draws=args.draws)
    counts = np.bincount([int(v) for v in e.reconstruct(idx)], minlength=len(scores))
    w = np.array(mech_weights_plain([fp.encode(s) for s in scores], 1.0, 1.0), dtype=float)
    chi = stats.chisquare(counts, w / w.sum() * args.draws)
    print(f"exponential mechanism: counts {counts.tolist()} chi-square p={chi.pvalue:.3f}")

    xs, ys = synth(300, 6, 2, seed=args.seed)
    parts, test = vsplit(encode_matrix(xs[:200]), 3), vsplit(encode_matrix(xs[200:]), 3)
    keys = phe.keygen(256, 3, seed=args.seed, test_mode=True)
    params = TreeParams(max_depth=3, max_splits=4)
    for eps in args.epsilons:
        model, budget = dp_train(Federation(*keys, parts, ys[:200], seed=args.seed), params, eps)
        acc = accuracy(predict_rows(model, test), ys[200:])
        print(f"epsilon {eps:g}: total budget {budget.total:g}, test accuracy {acc:.3f}")


if __name__ == "__main__":
    main()
