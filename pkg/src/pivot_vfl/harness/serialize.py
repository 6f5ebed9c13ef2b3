"""Model, manifest and key files as canonical JSON / text."""
from dataclasses import asdict
import json
import os

from .. import phe
from ..ensemble import Booster, BoostParams, Forest, ForestParams
from ..errors import ConfigError
from ..tree import Node, TreeModel, TreeParams

TREE_FORMAT = "pivot-tree/1"
FOREST_FORMAT = "pivot-forest/1"
GBDT_FORMAT = "pivot-gbdt/1"


def _state(value, scale):
    if value is None:
        return None
    if isinstance(value, phe.Ciphertext):
        return {"state": "encrypted", "value": str(value.value), "scale": value.scale}
    return {"state": "plain", "value": int(value), "scale": scale}


def _unstate(obj):
    if obj is None:
        return None
    if obj["state"] == "encrypted":
        return phe.Ciphertext(int(obj["value"]), int(obj["scale"]))
    if obj["state"] == "plain":
        return int(obj["value"])
    raise ConfigError(f"unknown value state {obj['state']!r}")


def tree_to_dict(model):
    p = model.params
    nodes = []
    for nd in model.nodes:
        nodes.append({
            "id": nd.id, "depth": nd.depth, "kind": "leaf" if nd.leaf else "split",
            "party": nd.party, "feature": nd.feature, "split": nd.split,
            "threshold": _state(nd.threshold, p.frac_bits),
            "label": _state(nd.label, p.label_scale),
            "left": nd.left, "right": nd.right,
        })
    return {"format": TREE_FORMAT, "params": asdict(p), "hidden": model.hidden, "nodes": nodes}


def tree_from_dict(data):
    if data.get("format") != TREE_FORMAT:
        raise ConfigError(f"not a tree model (format {data.get('format')!r})")
    params = TreeParams(**data["params"])
    nodes = [Node(id=d["id"], depth=d["depth"], leaf=d["kind"] == "leaf", party=d["party"],
                  feature=d["feature"], split=d["split"], threshold=_unstate(d["threshold"]),
                  label=_unstate(d["label"]), left=d["left"], right=d["right"]) for d in data["nodes"]]
    return TreeModel(params, nodes, data.get("hidden", False))


def model_to_dict(model):
    if isinstance(model, TreeModel):
        return tree_to_dict(model)
    if isinstance(model, Forest):
        meta = asdict(model.forest) if model.forest else None
        return {"format": FOREST_FORMAT, "params": asdict(model.params), "forest": meta,
                "trees": [tree_to_dict(t) for t in model.trees]}
    if isinstance(model, Booster):
        return {"format": GBDT_FORMAT, "params": asdict(model.params), "boost": asdict(model.boost),
                "trees": [[tree_to_dict(t) for t in rnd] for rnd in model.trees]}
    raise TypeError(f"cannot serialise {type(model).__name__}")


def model_from_dict(data):
    fmt = data.get("format")
    if fmt == TREE_FORMAT:
        return tree_from_dict(data)
    if fmt == FOREST_FORMAT:
        meta = data.get("forest")
        return Forest(TreeParams(**data["params"]), [tree_from_dict(t) for t in data["trees"]],
                      forest=ForestParams(**meta) if meta else None)
    if fmt == GBDT_FORMAT:
        return Booster(TreeParams(**data["params"]), BoostParams(**data["boost"]),
                       [[tree_from_dict(t) for t in rnd] for rnd in data["trees"]])
    raise ConfigError(f"unknown model format {fmt!r}")


def dumps(obj):
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def save_json(path, obj):
    with open(path, "w") as fh:
        fh.write(dumps(obj))


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def save_model(path, model):
    save_json(path, model_to_dict(model))


def load_model(path):
    return model_from_dict(load_json(path))


# -- keys -------------------------------------------------------------------------------

def save_keys(outdir, pk, keys):
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "public.key"), "w") as fh:
        fh.write(phe.dump_public_key(pk))
    for k in keys:
        with open(os.path.join(outdir, f"party{k.index}.key"), "w") as fh:
            fh.write(phe.dump_partial_key(k))


def load_keys(keydir, parties):
    try:
        with open(os.path.join(keydir, "public.key")) as fh:
            pk = phe.load_key(fh.read())
        keys = []
        for i in range(parties):
            with open(os.path.join(keydir, f"party{i}.key")) as fh:
                keys.append(phe.load_key(fh.read()))
    except OSError as exc:
        raise ConfigError(f"cannot read keys from {keydir}: {exc}") from exc
    if any(k.n != pk.n for k in keys):
        raise ConfigError("partial keys do not match the public key")
    return pk, keys
