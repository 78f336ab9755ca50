"""Datasets, label splits, error metrics and CSV ingestion."""

import csv
from dataclasses import dataclass

import numpy as np

from ._validation import check_features, check_positive
from .align import LabelSet
from .exceptions import ConfigurationError, InvalidParameterError, ParseError
from .graph import Graph

__all__ = [
    "LabeledDataset",
    "ExperimentSplit",
    "PRESETS",
    "synth_gaussian_pair",
    "make_preset",
    "sample_split",
    "misclassification_rate",
    "rms_error",
    "load_csv_features",
    "load_labels",
    "write_csv_features",
    "write_labels",
]


@dataclass(frozen=True)
class LabeledDataset:
    """Samples on one domain, as coordinates, a graph, or both."""

    labels: np.ndarray
    features: np.ndarray = None
    graph: Graph = None
    task: str = "classification"

    def __post_init__(self):
        if self.features is None and self.graph is None:
            raise InvalidParameterError("a dataset needs features or a graph")
        labels = np.asarray(self.labels)
        n = labels.shape[0]
        if labels.ndim != 1:
            raise InvalidParameterError("labels must be a vector")
        if self.features is not None and self.features.shape[0] != n:
            raise InvalidParameterError(
                f"{self.features.shape[0]} feature rows but {n} labels"
            )
        if self.graph is not None and self.graph.n != n:
            raise InvalidParameterError(f"graph has {self.graph.n} nodes but {n} labels")
        if self.task not in ("classification", "regression"):
            raise InvalidParameterError(f"unknown task {self.task!r}")
        object.__setattr__(self, "labels", labels)

    @property
    def n(self):
        return self.labels.shape[0]

    @property
    def classes(self):
        return np.unique(self.labels)


@dataclass(frozen=True)
class ExperimentSplit:
    known: LabelSet
    hidden: np.ndarray
    label_ratio: float
    seed: int


# source class means; targets mirror the y coordinate
PRESETS = {
    "synth1": {"means": ((2.0, 2.0, 0.0), (2.0, -2.0, 0.0)), "variance": 1.0},
    "synth2": {"means": ((2.0, 2.0, 0.0), (2.0, -2.0, 0.0)), "variance": 2.25},
}


def synth_gaussian_pair(n_per_class, class_means_source, variance, seed):
    """Two-class Gaussian clouds in R^3 for a source and a mirrored target.

    Target class means equal the source means with the y coordinate negated.
    Labels are ``0`` and ``1``; samples are ordered class by class.
    """
    check_positive(n_per_class, "n_per_class", integer=True)
    means = np.asarray(class_means_source, dtype=np.float64)
    if means.shape != (2, 3):
        raise InvalidParameterError("expected two class means in R^3")
    if not np.isfinite(variance) or variance <= 0:
        raise InvalidParameterError(f"variance must be positive, got {variance}")
    rng = np.random.default_rng(seed)
    mirror = np.array([1.0, -1.0, 1.0])
    std = np.sqrt(variance)
    out = []
    for m in (means, means * mirror):
        X = np.concatenate([c + std * rng.standard_normal((n_per_class, 3)) for c in m])
        y = np.repeat(np.arange(2), n_per_class)
        out.append(LabeledDataset(y, X))
    return tuple(out)


def make_preset(name, seed, n_per_class=100):
    try:
        cfg = PRESETS[name]
    except KeyError:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return synth_gaussian_pair(n_per_class, cfg["means"], cfg["variance"], seed)


def sample_split(dataset, label_ratio, seed, encoding=None):
    """Reveal a stratified random fraction of the labels.

    For classification each class contributes ``round(ratio * size)`` labels,
    at least one; a ratio too small for that raises ``ConfigurationError``
    naming the class. Regression tasks draw uniformly without
    stratification.
    """
    if not 0 < label_ratio <= 1:
        raise InvalidParameterError(f"label_ratio must be in (0, 1], got {label_ratio}")
    rng = np.random.default_rng(seed)
    n = dataset.n
    y = dataset.labels
    if dataset.task == "regression":
        m = max(1, int(round(label_ratio * n)))
        known = np.sort(rng.choice(n, size=m, replace=False))
        encoding = encoding or "regression"
    else:
        total = int(round(label_ratio * n))
        classes = np.unique(y)
        if total < classes.size:
            raise ConfigurationError(
                f"label ratio {label_ratio} yields {total} labels, fewer than the "
                f"{classes.size} classes; class {classes[total].item()!r} would get none"
            )
        parts = []
        for c in classes:
            members = np.flatnonzero(y == c)
            m = max(1, int(round(label_ratio * members.size)))
            parts.append(rng.choice(members, size=m, replace=False))
        known = np.sort(np.concatenate(parts))
        encoding = encoding or ("binary" if classes.size == 2 else "one-vs-all")
    hidden = np.setdiff1d(np.arange(n), known)
    return ExperimentSplit(LabelSet(known, y[known].astype(np.float64), encoding),
                           hidden, label_ratio, seed)


def _evaluated(predicted, truth, evaluated_indices):
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise InvalidParameterError("prediction and truth shapes differ")
    idx = np.arange(truth.shape[0]) if evaluated_indices is None else np.asarray(evaluated_indices)
    if idx.size == 0:
        raise InvalidParameterError("no indices to evaluate")
    return predicted[idx], truth[idx]


def misclassification_rate(predicted, truth, evaluated_indices=None):
    """Fraction of evaluated nodes whose predicted label is wrong."""
    p, t = _evaluated(predicted, truth, evaluated_indices)
    return float(np.mean(p != t))


def rms_error(predicted, truth, evaluated_indices=None):
    p, t = _evaluated(predicted, truth, evaluated_indices)
    d = p.astype(np.float64) - t.astype(np.float64)
    return float(np.sqrt(np.mean(d * d)))


def _read_rows(path, header, keep_blank=False):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    start = 1 if header else 0
    return [(k + 1, r) for k, r in enumerate(rows)
            if k >= start and (keep_blank or any(c.strip() for c in r))]


def load_csv_features(path, header=False):
    """Read one sample per CSV row; all rows must have the same width."""
    rows = _read_rows(path, header)
    if not rows:
        raise ParseError(f"{path} contains no samples")
    width = len(rows[0][1])
    out = np.empty((len(rows), width))
    for k, (lineno, r) in enumerate(rows):
        if len(r) != width:
            raise ParseError(f"row has {len(r)} columns, expected {width}", lineno)
        try:
            out[k] = [float(c) for c in r]
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    if not np.all(np.isfinite(out)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(out), axis=1))[0])
        raise ParseError("non-finite value", rows[bad][0])
    return check_features(out)


def load_labels(path, header=False):
    """Read one label per line (first CSV column) as floats; an empty cell
    means unknown and becomes NaN."""
    out = []
    for lineno, r in _read_rows(path, header, keep_blank=True):
        cell = r[0].strip() if r else ""
        try:
            out.append(float(cell) if cell else np.nan)
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    return np.asarray(out, dtype=np.float64)


def write_csv_features(X, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(X, dtype=np.float64):
            w.writerow([repr(float(v)) for v in row])


def write_labels(y, path):
    y = np.asarray(y)
    with open(path, "w", newline="") as fh:
        for v in y:
            if np.issubdtype(y.dtype, np.integer):
                fh.write(f"{int(v)}\n")
            else:
                fh.write("\n" if np.isnan(v) else f"{float(v)!r}\n")
