"""Command line entry point: ``pivot-vfl <subcommand>`` (or ``python -m pivot_vfl``)."""
import argparse
import json
import sys

from .. import phe
from ..errors import ConfigError, PivotError, VerificationError
from . import data, runner, serialize
from .config import RunConfig


def _config(args):
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "dp_epsilon", None) is not None:
        d = cfg.to_dict()
        d["dp_epsilon"] = args.dp_epsilon
        cfg = RunConfig.from_dict(d)
    return cfg


def _keys(args, cfg):
    if getattr(args, "keys", None):
        return serialize.load_keys(args.keys, cfg.parties)
    return runner.make_keys(cfg)


def cmd_keygen(args):
    pk, keys = phe.keygen(args.bits, args.parties, seed=args.seed, test_mode=args.test_mode)
    serialize.save_keys(args.out, pk, keys)
    print(f"wrote {args.parties} partial keys and public key ({pk.n.bit_length()} bits) to {args.out}")


def cmd_vsplit(args):
    for p in data.vsplit_file(args.data, args.parties, args.super_index, args.out):
        print(p)


def cmd_synth(args):
    x, y = data.synth(args.n, args.d, args.classes, args.task, args.seed)
    data.write_csv(args.out, [f"x{j}" for j in range(args.d)], x, y)
    print(f"wrote {args.n} rows to {args.out}")


def cmd_train(args):
    cfg = _config(args)
    parts, labels = data.load_partitions(args.data)
    _, manifest, _ = runner.run_parties(cfg, parts, labels, args.out, _keys(args, cfg))
    print(json.dumps({"out": args.out, "counters": manifest["counters"], "wall_time_s": manifest["wall_time_s"],
                      **({"dp": manifest["dp"]} if "dp" in manifest else {})}, indent=1))


def cmd_predict(args):
    cfg = _config(args)
    parts, _ = data.load_partitions(args.data)
    model = serialize.load_model(args.model)
    preds, _ = runner.predict_model(cfg, model, parts, _keys(args, cfg))
    lines = ["prediction"] + [str(p) for p in preds]
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    else:
        print("\n".join(lines))


def cmd_eval(args):
    cfg = _config(args)
    parts, labels = data.load_partitions(args.data)
    if labels is None:
        raise ConfigError("evaluation needs a partition with a label column")
    model = serialize.load_model(args.model)
    preds, _ = runner.predict_model(cfg, model, parts, _keys(args, cfg))
    if cfg.task == "classification":
        metrics = {"accuracy": data.accuracy(preds, labels.astype(int))}
    else:
        metrics = {"mse": data.mse(preds, labels)}
    metrics["n"] = len(preds)
    print(json.dumps(metrics))


def cmd_reveal(args):
    cfg = _config(args)
    model = serialize.load_model(args.model)
    plain = runner.reveal_model(model, _keys(args, cfg))
    text = serialize.dumps(serialize.model_to_dict(plain))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_counters_check(args):
    manifest = serialize.load_json(args.manifest)
    cfg = RunConfig.load(args.config) if args.config else None
    ok, lines = runner.counters_check(manifest, cfg)
    for ln in lines if args.verbose else [ln for ln in lines if ln.startswith("FAIL")]:
        print(ln)
    print(f"{len(lines)} checks, {'all pass' if ok else 'FAILURES'}")
    if not ok:
        raise VerificationError("counter laws violated")


def build_parser():
    ap = argparse.ArgumentParser(prog="pivot-vfl", description="Vertical federated tree training")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="dealer key generation")
    p.add_argument("--bits", type=int, default=phe.PRODUCTION_KEY_BITS)
    p.add_argument("--parties", type=int, default=3)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--test-mode", action="store_true", help="allow keys below 1024 bits")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("vsplit", help="partition a CSV by columns")
    p.add_argument("data")
    p.add_argument("--parties", type=int, default=3)
    p.add_argument("--super-index", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_vsplit)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--d", type=int, default=6)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--task", choices=["classification", "regression"], default="classification")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    def common(p, model=True):
        p.add_argument("--config")
        p.add_argument("--keys", help="key directory; default derives keys from the config seed")
        if model:
            p.add_argument("--model", required=True)

    p = sub.add_parser("train", help="run the federated training protocol")
    common(p, model=False)
    p.add_argument("--data", nargs="+", required=True, help="one CSV per party, in party order")
    p.add_argument("--dp-epsilon", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="federated prediction")
    common(p)
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="accuracy or MSE on labelled partitions")
    common(p)
    p.add_argument("--data", nargs="+", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("reveal", help="decrypt a hidden model (testing only)")
    common(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_reveal)

    p = sub.add_parser("counters-check", help="check a manifest against the cost laws")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_counters_check)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except PivotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())

