"""CSV datasets, vertical partitioning, synthetic generators and evaluation metrics."""
import csv
import os

import numpy as np

from ..errors import ConfigError
from ..tree import CLASSIFICATION, REGRESSION

LABEL = "label"


def read_csv(path):
    """Return (feature names, float matrix, labels or None)."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ConfigError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    try:
        data = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(len(body), len(header))
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric or ragged row ({exc})") from exc
    if LABEL in header:
        k = header.index(LABEL)
        labels = data[:, k]
        keep = [i for i in range(len(header)) if i != k]
        return [header[i] for i in keep], data[:, keep], labels
    return header, data, None


def write_csv(path, names, matrix, labels=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(names) + ([LABEL] if labels is not None else []))
        for r, row in enumerate(np.asarray(matrix)):
            vals = [repr(float(v)) for v in row]
            if labels is not None:
                lab = labels[r]
                vals.append(str(int(lab)) if float(lab).is_integer() else repr(float(lab)))
            w.writerow(vals)


def column_ranges(d, m):
    """Contiguous column blocks, sizes differing by at most one (earlier parties get more)."""
    if m < 1:
        raise ConfigError("need at least one party")
    if d < m:
        raise ConfigError(f"cannot split {d} features across {m} parties")
    base, extra = divmod(d, m)
    out, start = [], 0
    for i in range(m):
        size = base + (1 if i < extra else 0)
        out.append((start, start + size))
        start += size
    return out


def vsplit(matrix, m):
    return [matrix[:, a:b] for a, b in column_ranges(matrix.shape[1], m)]


def vsplit_file(path, m, super_index, outdir):
    """Write party{i}.csv files; only the super client's file keeps the label column."""
    names, x, y = read_csv(path)
    if not 0 <= super_index < m:
        raise ConfigError("super index out of range")
    os.makedirs(outdir, exist_ok=True)
    paths = []
    for i, (a, b) in enumerate(column_ranges(x.shape[1], m)):
        p = os.path.join(outdir, f"party{i}.csv")
        write_csv(p, names[a:b], x[:, a:b], y if i == super_index else None)
        paths.append(p)
    return paths


def load_partitions(paths):
    """Read party files; returns (float parts, labels from whichever file holds them)."""
    parts, labels = [], None
    for p in paths:
        _, x, y = read_csv(p)
        if y is not None:
            if labels is not None:
                raise ConfigError("more than one partition carries labels")
            labels = y
        parts.append(x)
    if len({len(x) for x in parts}) != 1:
        raise ConfigError("partitions disagree on the number of rows")
    return parts, labels


def synth(n, d, n_classes=2, task=CLASSIFICATION, seed=0, separation=2.0, noise=0.3):
    """Gaussian class blobs, or a linear target plus Gaussian noise."""
    if n < 1 or d < 1:
        raise ConfigError("n and d must be positive")
    rng = np.random.default_rng(seed)
    if task == CLASSIFICATION:
        centers = rng.normal(0.0, separation, size=(n_classes, d))
        y = rng.integers(0, n_classes, size=n)
        x = centers[y] + rng.normal(size=(n, d))
        return np.round(x, 4), y.astype(np.int64)
    if task == REGRESSION:
        x = rng.uniform(-2.0, 2.0, size=(n, d))
        w = rng.normal(size=d)
        y = x @ w + noise * rng.normal(size=n)
        return np.round(x, 4), np.round(y, 4)
    raise ConfigError(f"unknown task {task!r}")


def accuracy(pred, truth):
    pred, truth = np.asarray(pred), np.asarray(truth)
    return float(np.mean(pred == truth)) if len(truth) else 0.0


def mse(pred, truth):
    pred, truth = np.asarray(pred, dtype=float), np.asarray(truth, dtype=float)
    return float(np.mean((pred - truth) ** 2)) if len(truth) else 0.0
