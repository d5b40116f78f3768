"""Dataset ingestion, standardization and one-class splits.

Splits are driven by a Fisher-Yates shuffle whose draws come from the raw
64-bit output of PCG64 (numpy's ``PCG64`` seeded through ``SeedSequence``):
for ``i = n-1 .. 1`` swap position ``i`` with ``j = next_u64() mod (i+1)``.
"""
import csv
import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import EmptyDatasetError, ParameterError, ParseError

BUILTIN = {"iris": ("iris.csv", "species"), "glass": ("glass.csv", "type")}


@dataclass(eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    name: str = ""
    feature_names: list = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim == 1:
            self.features = self.features.reshape(-1, 1)
        self.labels = np.asarray(self.labels, dtype=object)
        if self.features.shape[0] != self.labels.shape[0]:
            raise ParameterError(f"{self.features.shape[0]} feature rows but "
                                 f"{self.labels.shape[0]} labels")
        if not np.all(np.isfinite(self.features)):
            raise ParameterError("features contain non-finite values")
        if self.feature_names is None:
            self.feature_names = [f"x{i}" for i in range(self.features.shape[1])]

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    def classes(self):
        # first-appearance order, so class listings are stable across runs
        seen = {}
        for lab in self.labels:
            seen.setdefault(lab, None)
        return list(seen)


def _parse_float(cell, line, col):
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"non-numeric feature value {cell!r} in column {col}", line) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite feature value {cell!r} in column {col}", line)
    return value


def load_csv(path, label_column=-1, has_header=True, name=None):
    """Read a rectangular CSV file.

    ``label_column`` is a header name, a column index (negative counts from
    the end) or None for an unlabeled file.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            rows.append((reader.line_num, row))
    if has_header:
        if not rows:
            raise EmptyDatasetError(f"{path}: file is empty")
        header = [c.strip() for c in rows[0][1]]
        rows = rows[1:]
    else:
        header = None
    if not rows:
        raise EmptyDatasetError(f"{path}: no data rows")

    width = len(rows[0][1]) if header is None else len(header)
    if label_column is None:
        label_idx = None
    elif isinstance(label_column, str):
        if header is None or label_column not in header:
            raise ParseError(f"label column {label_column!r} not found in header", 1)
        label_idx = header.index(label_column)
    else:
        label_idx = int(label_column)
        if not -width <= label_idx < width:
            raise ParseError(f"label column index {label_column} out of range for {width} columns",
                             rows[0][0])
        label_idx %= width

    feats, labels = [], []
    for line, row in rows:
        if len(row) != width:
            raise ParseError(f"expected {width} columns, found {len(row)}", line)
        values = []
        for col, cell in enumerate(row):
            if col == label_idx:
                labels.append(cell.strip())
            else:
                values.append(_parse_float(cell.strip(), line, col))
        feats.append(values)
    if label_idx is None:
        labels = [""] * len(feats)
    names = None
    if header is not None:
        names = [h for i, h in enumerate(header) if i != label_idx]
    return Dataset(np.array(feats, dtype=np.float64), np.array(labels, dtype=object),
                   name=name or str(path), feature_names=names)


def save_csv(dataset, path, label_name="label"):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(dataset.feature_names) + [label_name])
        for row, lab in zip(dataset.features, dataset.labels):
            w.writerow([repr(float(v)) for v in row] + [lab])


def load_libsvm(path, name=None):
    """Read sparse ``label index:value ...`` lines (1-based indices) into a dense matrix."""
    labels, entries = [], []
    dim = 0
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            row = {}
            for tok in tokens[1:]:
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise ParseError(f"malformed index:value pair {tok!r}", line_no)
                try:
                    idx = int(idx_s)
                except ValueError:
                    raise ParseError(f"malformed feature index {idx_s!r}", line_no) from None
                if idx < 1:
                    raise ParseError(f"feature index {idx} is not 1-based", line_no)
                if idx in row:
                    raise ParseError(f"duplicate feature index {idx}", line_no)
                row[idx] = _parse_float(val_s, line_no, idx)
                dim = max(dim, idx)
            labels.append(tokens[0])
            entries.append(row)
    if not entries:
        raise EmptyDatasetError(f"{path}: no data rows")
    X = np.zeros((len(entries), dim))
    for r, row in enumerate(entries):
        for idx, val in row.items():
            X[r, idx - 1] = val
    return Dataset(X, np.array(labels, dtype=object), name=name or str(path))


def load_builtin(name):
    """Bundled UCI tables: ``iris`` (150 x 4, 3 classes) and ``glass`` (214 x 9, 6 classes)."""
    if name not in BUILTIN:
        raise ParameterError(f"unknown builtin dataset {name!r}; choose from {sorted(BUILTIN)}")
    fname, label = BUILTIN[name]
    with resources.as_file(resources.files("bayesdd") / "datasets" / fname) as p:
        return load_csv(p, label_column=label, has_header=True, name=name)


def load_dataset(source, fmt=None, label_column=-1, has_header=True):
    """Builtin name, CSV or libsvm file, picked by ``fmt`` or the file extension."""
    if fmt in (None, "builtin") and source in BUILTIN:
        return load_builtin(source)
    if fmt is None:
        fmt = "libsvm" if str(source).endswith((".libsvm", ".svm", ".txt")) else "csv"
    if fmt == "csv":
        return load_csv(source, label_column=label_column, has_header=has_header)
    if fmt == "libsvm":
        return load_libsvm(source)
    raise ParameterError(f"unknown dataset format {fmt!r}")


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    def transform(self, X):
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.scale


def standardize(train, others=()):
    """Z-score ``train`` and each matrix in ``others`` with the training statistics.

    Constant features are centered and left unscaled.
    """
    train = np.asarray(train, dtype=np.float64)
    if train.ndim != 2 or train.shape[0] == 0:
        raise EmptyDatasetError("cannot standardize an empty training matrix")
    mean = train.mean(axis=0)
    std = train.std(axis=0)
    scale = np.where(std > 0.0, std, 1.0)
    record = Standardizer(mean=mean, scale=scale)
    return record.transform(train), [record.transform(o) for o in others], record


def shuffled_indices(n, seed):
    bits = np.random.PCG64(seed)
    perm = np.arange(n)
    if n > 1:
        draws = bits.random_raw(n - 1)
        for k, i in enumerate(range(n - 1, 0, -1)):
            j = int(draws[k]) % (i + 1)
            perm[i], perm[j] = perm[j], perm[i]
    return perm


@dataclass(eq=False)
class OneClassSplit:
    train_targets: np.ndarray
    test_features: np.ndarray
    test_is_target: np.ndarray
    unlabeled_pool: np.ndarray
    target_class: str
    seed: int
    train_index: np.ndarray = None
    test_index: np.ndarray = None
    unlabeled_index: np.ndarray = None
    unlabeled_mix: dict = field(default_factory=dict)

    def manifest(self):
        return {
            "target_class": self.target_class,
            "seed": self.seed,
            "train_index": [int(i) for i in self.train_index],
            "test_index": [int(i) for i in self.test_index],
            "unlabeled_index": [int(i) for i in self.unlabeled_index],
            "unlabeled_mix": dict(self.unlabeled_mix),
        }

    def write_manifest(self, path):
        with open(path, "w") as fh:
            json.dump(self.manifest(), fh, indent=1)


def make_one_class_split(dataset, target_class, seed, unlabeled_fraction=0.0):
    """Half of the target class (seeded) trains; the other half and all outliers test.

    With ``unlabeled_fraction = f > 0`` the training half is divided into a
    labeled part (fraction ``1 - f``) and an unlabeled pool of
    ``f / (1 - f)`` times the labeled size; ``f = 2/3`` gives an unlabeled
    set twice the labeled one. Training targets that do not fit either part
    return to the test set. If the training half is too small, the pool is
    topped up with outliers, which then leave the test set.
    """
    if not 0.0 <= unlabeled_fraction < 1.0:
        raise ParameterError(f"unlabeled_fraction must lie in [0, 1), got {unlabeled_fraction}")
    target = str(target_class)
    labels = np.array([str(v) for v in dataset.labels], dtype=object)
    targets = np.flatnonzero(labels == target)
    outliers = np.flatnonzero(labels != target)
    if targets.size < 2:
        raise ParameterError(f"target class {target!r} has {targets.size} samples; need >= 2")

    order = targets[shuffled_indices(targets.size, seed)]
    half = targets.size // 2
    pool, rest = order[:half], order[half:]
    unlabeled_outliers = np.zeros(0, dtype=int)
    if unlabeled_fraction > 0.0:
        n_lab = max(1, int(math.floor(half * (1.0 - unlabeled_fraction) + 1e-9)))
        n_unl = int(round(n_lab * unlabeled_fraction / (1.0 - unlabeled_fraction)))
        train_idx = pool[:n_lab]
        unl_targets = pool[n_lab:n_lab + n_unl]
        rest = np.concatenate((pool[n_lab + n_unl:], rest))
        short = n_unl - unl_targets.size
        if short > 0:
            if short >= outliers.size:
                raise ParameterError("not enough samples to fill the unlabeled pool")
            shuffled_out = outliers[shuffled_indices(outliers.size, seed + 1)]
            unlabeled_outliers = shuffled_out[:short]
            outliers = np.setdiff1d(outliers, unlabeled_outliers)
        unl_idx = np.concatenate((unl_targets, unlabeled_outliers))
    else:
        train_idx = pool
        unl_idx = np.zeros(0, dtype=int)

    test_idx = np.concatenate((rest, outliers))
    X = dataset.features
    return OneClassSplit(
        train_targets=X[train_idx],
        test_features=X[test_idx],
        test_is_target=(labels[test_idx] == target).astype(bool),
        unlabeled_pool=X[unl_idx] if unl_idx.size else np.zeros((0, X.shape[1])),
        target_class=target,
        seed=int(seed),
        train_index=train_idx,
        test_index=test_idx,
        unlabeled_index=unl_idx,
        unlabeled_mix={"target": int(unl_idx.size - unlabeled_outliers.size),
                       "outlier": int(unlabeled_outliers.size)},
    )
