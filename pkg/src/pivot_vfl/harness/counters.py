"""Operation counters and the closed-form per-node cost laws they are checked against."""
from dataclasses import asdict, dataclass, fields


@dataclass
class OpCounters:
    encryptions: int = 0
    hom_ops: int = 0
    decryptions: int = 0
    partial_decryptions: int = 0
    comparisons: int = 0
    triples: int = 0
    bit_triples: int = 0
    opens: int = 0
    rounds: int = 0
    messages: int = 0
    bytes_sent: int = 0

    def snapshot(self):
        return OpCounters(**asdict(self))

    def __sub__(self, other):
        return OpCounters(**{f.name: getattr(self, f.name) - getattr(other, f.name) for f in fields(self)})

    def __add__(self, other):
        return OpCounters(**{f.name: getattr(self, f.name) + getattr(other, f.name) for f in fields(self)})

    def as_dict(self):
        return asdict(self)


def effective_classes(task, n_classes):
    """Number of label statistics per branch (2 for regression: sum and sum of squares)."""
    return 2 if task == "regression" else n_classes


def basic_node_decryptions(task, n_classes, n_splits, evaluated):
    """Threshold decryptions at one node of the basic protocol.

    Every node converts its sample count and class totals; a node that goes on
    to the split search also converts (2c+2) statistics per candidate split.
    """
    c = effective_classes(task, n_classes)
    total = 1 + c
    if evaluated:
        total += (2 * c + 2) * n_splits
    return total


def enhanced_node_decryptions(task, n_classes, n_splits, evaluated, split, n_samples):
    """Basic count plus the n decryptions of the secure split-indicator product."""
    extra = n_samples if split else 0
    return basic_node_decryptions(task, n_classes, n_splits, evaluated) + extra


def enhanced_node_extra_comparisons(split, max_splits):
    """Selector construction: one equality test (two comparisons) per padded slot."""
    return 2 * max_splits if split else 0


def basic_predict_rounds(parties):
    return parties


def basic_node_comparisons(task, n_classes, n_splits, evaluated, leaf, n_samples, below_max_depth):
    """Secure comparisons at one node of the basic protocol.

    hi = bit length of n bounds every sample count, and each reciprocal costs
    hi normalisation comparisons.  Classification always runs the class argmax
    (c-1).  Nodes above the depth limit test the prune condition (count, plus
    purity for classification).  A candidate search costs the parent
    reciprocal, then per split two emptiness tests, two reciprocals and one
    argmax step, and finally the positive-gain test.  A regression leaf
    divides once.
    """
    hi = max(1, int(n_samples).bit_length())
    classification = task != "regression"
    total = n_classes - 1 if classification else 0
    if below_max_depth:
        total += 2 if classification else 1
    if evaluated:
        total += hi + n_splits * (3 + 2 * hi) + 1
    if leaf and not classification:
        total += hi
    return total
