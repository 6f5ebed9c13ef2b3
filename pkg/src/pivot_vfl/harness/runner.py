"""Orchestration: data preparation, training runs, prediction, reveal and the counter-law check."""
import hashlib
import os
import time

import numpy as np

from .. import fixedpoint as fp
from .. import phe
from ..dp import dp_train
from ..ensemble import (Booster, BoostParams, Forest, ForestParams, gbdt_predict, gbdt_train, rf_predict,
                        rf_train)
from ..errors import ConfigError
from ..mpc import seed_int
from ..protocol.basic import train_basic
from ..protocol.enhanced import train_enhanced
from ..protocol.predict import SharedTree, predict_basic_rows, predict_hidden_rows
from ..runtime import Federation
from ..tree import CLASSIFICATION, REGRESSION, Node, TreeModel, encode_labels, encode_matrix
from . import counters as laws
from .serialize import dumps, model_to_dict, save_json

MANIFEST_FORMAT = "pivot-manifest/1"


def seeds_for(config):
    s = config.seed
    return {"run": s, "keys": seed_int("keys", s), "dealer": seed_int("dealer", s),
            "mpc": seed_int("mpc", s), "forest": s}


def make_keys(config):
    return phe.keygen(config.key_bits, config.parties, seed=seeds_for(config)["keys"], test_mode=config.test_mode)


def prepare(config, parts, labels=None):
    """Float partitions and labels -> fixed-point integers."""
    if len(parts) != config.parties:
        raise ConfigError(f"{len(parts)} partitions for {config.parties} parties")
    enc_parts = [encode_matrix(p, config.frac_bits) for p in parts]
    if labels is None:
        return enc_parts, None
    y = np.asarray(labels)
    if config.task == CLASSIFICATION:
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise ConfigError("classification labels must be integers")
        if y.min() < 0 or y.max() >= config.n_classes:
            raise ConfigError(f"labels outside 0..{config.n_classes - 1}")
    return enc_parts, encode_labels(y, config.tree_params())


def federation(config, pk, keys, parts, labels=None):
    return Federation(pk, keys, parts, labels, config.super_index, config.field_params(), config.seed,
                      config.transcript_level, timeout=config.timeout)


def train_model(config, fed):
    """Returns (model, extra manifest fields)."""
    params = config.tree_params()
    if config.dp_epsilon is not None:
        model, budget = dp_train(fed, params, config.dp_epsilon)
        return model, {"dp": budget.as_dict()}
    if config.ensemble == "rf":
        fp_ = ForestParams(config.n_trees, config.max_features, config.seed)
        return rf_train(fed, params, fp_), {}
    if config.ensemble == "gbdt":
        return gbdt_train(fed, params, BoostParams(config.n_trees, config.learning_rate)), {}
    if config.protocol == "enhanced":
        return train_enhanced(fed, params), {}
    return train_basic(fed, params), {}


def node_log_dicts(fed):
    return [{"tree": r.tree, "node": r.node, "depth": r.depth, "leaf": r.leaf, "evaluated": r.evaluated,
             "n_splits": r.n_splits, "decryptions": r.delta.decryptions, "comparisons": r.delta.comparisons,
             "triples": r.delta.triples} for r in fed.node_log]


def run_parties(config, parts, labels, outdir=None, keys=None):
    """Train per ``config`` on float partitions; optionally write model, manifest, transcript and dealer state."""
    pk, sks = keys if keys is not None else make_keys(config)
    enc_parts, enc_labels = prepare(config, parts, labels)
    if enc_labels is None:
        raise ConfigError("training needs the super client's labels")
    fed = federation(config, pk, sks, enc_parts, enc_labels)
    start = time.time()
    model, extra = train_model(config, fed)
    wall = time.time() - start
    model_text = dumps(model_to_dict(model))
    manifest = {
        "format": MANIFEST_FORMAT,
        "config": config.to_dict(),
        "seeds": seeds_for(config),
        "n_samples": fed.n_samples,
        "dims": [int(p.shape[1]) for p in enc_parts],
        "public_key": pk.fingerprint,
        "counters": fed.counters.as_dict(),
        "node_log": node_log_dicts(fed),
        "dealer": fed.dealer.state(),
        "transcript": {"level": config.transcript_level, "entries": len(fed.transcript.entries)},
        "model_sha256": hashlib.sha256(model_text.encode()).hexdigest(),
        "wall_time_s": round(wall, 3),
    }
    manifest.update(extra)
    if outdir is not None:
        os.makedirs(outdir, exist_ok=True)
        with open(os.path.join(outdir, "model.json"), "w") as fh:
            fh.write(model_text)
        save_json(os.path.join(outdir, "manifest.json"), manifest)
        save_json(os.path.join(outdir, "dealer.json"), fed.dealer.state())
        fed.transcript.dump(os.path.join(outdir, "transcript.jsonl"))
    return model, manifest, fed


def _decode(values, scale):
    return [float(fp.to_float(v, scale)) for v in values]


def predict_model(config, model, parts, keys, fed_labels=None):
    """Federated predictions for float partitions: class ids, or decoded regression values."""
    pk, sks = keys
    enc_parts, _ = prepare(config, parts)
    fed = federation(config, pk, sks, enc_parts, fed_labels)
    n = len(enc_parts[0])
    rows = [[p[r] for p in enc_parts] for r in range(n)]
    if isinstance(model, TreeModel):
        if model.hidden:
            out = predict_hidden_rows(fed, SharedTree(fed, model), enc_parts)
        else:
            out = predict_basic_rows(fed, model, enc_parts)
        scale = model.params.label_scale
    elif isinstance(model, Forest):
        out = [rf_predict(fed, model, r) for r in rows]
        scale = model.output_scale
    elif isinstance(model, Booster):
        out = gbdt_predict(fed, model, rows)
        scale = model.output_scale
    else:
        raise ConfigError(f"cannot predict with {type(model).__name__}")
    preds = [int(v) for v in out] if scale == 0 else _decode(out, scale)
    return preds, fed


def reveal_model(model, keys):
    """Jointly decrypt every concealed field of a hidden tree (test comparison only)."""
    pk, sks = keys
    if not isinstance(model, TreeModel):
        raise ConfigError("reveal applies to single tree models")

    def plain(v):
        return phe.decrypt_int(pk, v, sks) if isinstance(v, phe.Ciphertext) else v

    nodes = [Node(nd.id, nd.depth, nd.leaf, nd.party, nd.feature, nd.split, plain(nd.threshold),
                  plain(nd.label), nd.left, nd.right, nd.dummy) for nd in model.nodes]
    return TreeModel(model.params, nodes, hidden=False)


def counters_check(manifest, config=None):
    """Compare each node's recorded decryptions and comparisons with the closed-form laws.

    Returns (ok, report lines).
    """
    cfg = manifest["config"] if config is None else config.to_dict()
    n = manifest["n_samples"]
    task, c = cfg["task"], cfg["n_classes"]
    dp_run = cfg.get("dp_epsilon") is not None
    enhanced = cfg["protocol"] == "enhanced"
    lines, ok = [], True
    trees = {}
    for rec in manifest["node_log"]:
        trees.setdefault(rec["tree"], []).append(rec)
    for tree, recs in trees.items():
        # boosting rounds after the first fit regression trees on encrypted targets
        tree_task = REGRESSION if cfg["ensemble"] == "gbdt" else task
        for rec in recs:
            split = not rec["leaf"]
            if enhanced:
                want_d = laws.enhanced_node_decryptions(tree_task, c, rec["n_splits"], rec["evaluated"], split, n)
            else:
                want_d = laws.basic_node_decryptions(tree_task, c, rec["n_splits"], rec["evaluated"])
            checks = [("decryptions", rec["decryptions"], want_d)]
            if not dp_run:
                want_c = laws.basic_node_comparisons(tree_task, c, rec["n_splits"], rec["evaluated"], rec["leaf"],
                                                     n, rec["depth"] < cfg["max_depth"])
                if enhanced:
                    want_c += laws.enhanced_node_extra_comparisons(split, cfg["max_splits"])
                checks.append(("comparisons", rec["comparisons"], want_c))
            for name, got, want in checks:
                good = got == want
                ok &= good
                lines.append(f"{'PASS' if good else 'FAIL'} {tree} node {rec['node']} {name}: "
                             f"observed {got}, law {want}")
    return ok, lines
