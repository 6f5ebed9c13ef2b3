"""Run configuration, stored as JSON."""
from dataclasses import asdict, dataclass, fields
import json

from ..errors import ConfigError
from ..fixedpoint import FRAC_BITS
from ..mpc import Q, FieldParams
from ..tree import CLASSIFICATION, REGRESSION, TreeParams

PROTOCOLS = ("basic", "enhanced")
ENSEMBLES = ("none", "rf", "gbdt")


@dataclass
class RunConfig:
    parties: int = 3
    super_index: int = 0
    task: str = CLASSIFICATION
    n_classes: int = 2
    max_depth: int = 4
    max_splits: int = 8
    min_split_samples: int = 5
    key_bits: int = 1024
    frac_bits: int = FRAC_BITS
    modulus: int = Q
    protocol: str = "basic"
    ensemble: str = "none"
    n_trees: int = 4
    learning_rate: float = 0.1
    max_features: object = "sqrt"
    dp_epsilon: float = None
    seed: int = 0
    test_mode: bool = True
    transcript_level: str = "full"
    timeout: float = 5.0

    def __post_init__(self):
        if self.parties < 2:
            raise ConfigError("at least two parties are required")
        if not 0 <= self.super_index < self.parties:
            raise ConfigError("super_index out of range")
        if self.task not in (CLASSIFICATION, REGRESSION):
            raise ConfigError(f"unknown task {self.task!r}")
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}")
        if self.ensemble not in ENSEMBLES:
            raise ConfigError(f"ensemble must be one of {ENSEMBLES}")
        if self.ensemble != "none" and self.protocol != "basic":
            raise ConfigError("ensembles are built from basic-protocol trees")
        if self.dp_epsilon is not None:
            if self.dp_epsilon <= 0:
                raise ConfigError("dp_epsilon must be positive")
            if self.protocol != "basic" or self.ensemble != "none":
                raise ConfigError("differential privacy wraps single basic-protocol trees only")
        if self.transcript_level not in ("full", "reveals"):
            raise ConfigError("transcript_level must be 'full' or 'reveals'")
        self.tree_params()
        self.field_params()

    def tree_params(self):
        return TreeParams(self.task, self.n_classes, self.max_depth, self.max_splits,
                          self.min_split_samples, self.frac_bits)

    def field_params(self):
        return FieldParams(q=self.modulus, frac_bits=self.frac_bits)

    def to_dict(self):
        return asdict(self)

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)
