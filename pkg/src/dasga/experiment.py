"""Trial execution for the batch harness: data loading, label splits,
fitting each method, scoring, and deterministic CSV output."""

import csv
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .align import AlignmentParams
from .baselines import nearest_neighbor, ssl_gaussian_fields, ssl_one_vs_all
from .data import (
    LabeledDataset,
    load_csv_features,
    load_labels,
    make_preset,
    misclassification_rate,
    rms_error,
    sample_split,
)
from .estimator import DASGAClassifier, DASGARegressor
from .exceptions import ConfigurationError, InvalidParameterError, NumericalFailure, ParseError
from .graph import build_knn_graph, laplacian, load_edge_list
from .spectral import eigendecompose, spectrum_report

__all__ = [
    "RESULT_COLUMNS",
    "TrialSpec",
    "TrialOutcome",
    "load_domains",
    "run_trial",
    "run_trials",
    "write_results_csv",
    "write_history_csv",
    "sweep_tables",
    "label_spectra",
]

RESULT_COLUMNS = ("method", "label_ratio", "seed", "misclassification", "rms", "runtime_ms",
                  "objective_final", "outer_iters", "status")

# failures that flag a trial instead of aborting the whole run
_TRIAL_ERRORS = (NumericalFailure, ConfigurationError, InvalidParameterError, np.linalg.LinAlgError)


@dataclass(frozen=True)
class TrialSpec:
    """One (method, label ratio, seed) cell, with optional parameter overrides
    (``mu1``, ``mu2``, ``k``, ``R``) used by sweeps."""

    method: str
    label_ratio: float
    seed: int
    overrides: tuple = ()

    @property
    def name(self):
        parts = [self.method, f"r{self.label_ratio:g}", f"s{self.seed}"]
        parts += [f"{k}{v:g}" for k, v in self.overrides]
        return "_".join(parts)


@dataclass
class TrialOutcome:
    spec: TrialSpec
    misclassification: float = float("nan")
    rms: float = float("nan")
    runtime_ms: float = float("nan")
    objective_final: float = None
    outer_iters: int = None
    status: str = "ok"
    history: list = field(default_factory=list)

    @property
    def failed(self):
        return self.status != "ok"


_FILE_CACHE = {}


def _load_domain(files, task):
    key = (files, task)
    if key not in _FILE_CACHE:
        labels = load_labels(files.labels)
        if task == "classification" and not np.all(labels == np.rint(labels)):
            raise ParseError(f"{files.labels}: classification labels must be integers")
        if np.isnan(labels).any():
            raise ParseError(f"{files.labels}: ground-truth labels may not be blank")
        features = load_csv_features(files.features) if files.features else None
        graph = load_edge_list(files.edges, n_nodes=labels.size) if files.edges else None
        if task == "classification":
            labels = labels.astype(np.int64)
        _FILE_CACHE[key] = LabeledDataset(labels, features, graph, task)
    return _FILE_CACHE[key]


def load_domains(cfg, seed):
    """Source and target datasets for a trial; presets are redrawn per seed."""
    d = cfg.data
    if d.source is None:
        src, tgt = make_preset(d.preset, seed, d.n_per_class)
        if d.task == "regression":
            src = replace(src, task="regression")
            tgt = replace(tgt, task="regression")
        return src, tgt
    return _load_domain(d.source, d.task), _load_domain(d.target, d.task)


def _graph(ds, k, kernel_scale):
    if ds.graph is not None:
        return ds.graph
    return build_knn_graph(ds.features, k, kernel_scale)


def _align_params(cfg, overrides):
    a = cfg.align
    o = dict(overrides)
    return AlignmentParams(
        mu1=o.get("mu1", a.mu1), mu2=o.get("mu2", a.mu2), sigma=a.sigma, R=int(o.get("R", a.R)),
        max_outer_iters=a.max_outer_iters, outer_tol=a.outer_tol, n_pairs=a.n_pairs,
        transform_starts=a.transform_starts,
    )


def _estimator(cls, params, seed):
    return cls(
        n_components=params.R, mu1=params.mu1, mu2=params.mu2, sigma=params.sigma,
        affinity="precomputed", n_pairs=params.n_pairs, max_iter=params.max_outer_iters,
        tol=params.outer_tol, transform_starts=params.transform_starts, random_state=seed,
    )


def _predict(cfg, spec, src, tgt, split_s, split_t):
    """Return (prediction over all target nodes, objective, outer iterations, history)."""
    o = dict(spec.overrides)
    k = int(o.get("k", cfg.graph.k))
    regression = tgt.task == "regression"
    if spec.method == "nn":
        if src.features is None or tgt.features is None:
            raise ConfigurationError("method nn needs features on both domains")
        train_X = np.vstack([src.features[split_s.known.indices],
                             tgt.features[split_t.known.indices]])
        train_y = np.concatenate([split_s.known.values, split_t.known.values])
        return nearest_neighbor(train_X, train_y, tgt.features), None, None, []

    gt = _graph(tgt, k, cfg.graph.kernel_scale)
    if spec.method == "ssl":
        if regression:
            return ssl_gaussian_fields(gt, split_t.known).f, None, None, []
        classes = np.unique(tgt.labels)
        scores = ssl_one_vs_all(gt, split_t.known, classes)
        return classes[np.argmax(scores, axis=1)], None, None, []

    gs = _graph(src, k, cfg.graph.kernel_scale)
    params = _align_params(cfg, spec.overrides)
    known_t, known_s = split_t.known.indices, split_s.known.indices
    if regression:
        y = np.full(tgt.n, np.nan)
        y_src = np.full(src.n, np.nan)
        y[known_t] = tgt.labels[known_t]
        y_src[known_s] = src.labels[known_s]
        est = _estimator(DASGARegressor, params, spec.seed).fit(gt, y, gs, y_src)
        results = [est.result_]
        pred = est.transduction_
    else:
        # -1 means unlabeled to the estimator, so classes become codes 0..C-1
        classes, codes_t = np.unique(tgt.labels, return_inverse=True)
        codes_s = np.searchsorted(classes, src.labels)
        if np.any(classes[np.minimum(codes_s, classes.size - 1)] != src.labels):
            raise ConfigurationError("source labels contain classes absent from the target")
        y = np.full(tgt.n, -1)
        y_src = np.full(src.n, -1)
        y[known_t] = codes_t[known_t]
        y_src[known_s] = codes_s[known_s]
        est = _estimator(DASGAClassifier, params, spec.seed).fit(gt, y, gs, y_src)
        results = est.results_
        pred = classes[est.transduction_]
    objective = float(sum(r.history[-1] for r in results))
    iters = max(r.iterations for r in results)
    history = [(c, step, v) for c, r in enumerate(results) for step, v in enumerate(r.history)]
    return pred, objective, iters, history


def run_trial(cfg, spec):
    """Run one trial; numerical or configuration problems specific to the
    trial are recorded in ``status`` rather than raised."""
    out = TrialOutcome(spec)
    start = time.perf_counter()
    try:
        src, tgt = load_domains(cfg, spec.seed)
        split_t = sample_split(tgt, spec.label_ratio, spec.seed)
        if cfg.data.source_label_ratio < 1:
            split_s = sample_split(src, cfg.data.source_label_ratio, [spec.seed, 1])
        else:
            split_s = sample_split(src, 1.0, spec.seed)
        pred, out.objective_final, out.outer_iters, out.history = _predict(
            cfg, spec, src, tgt, split_s, split_t
        )
        hidden = split_t.hidden
        if hidden.size:
            if tgt.task == "regression":
                out.misclassification = misclassification_rate(np.rint(pred), tgt.labels, hidden)
            else:
                out.misclassification = misclassification_rate(pred, tgt.labels, hidden)
            out.rms = rms_error(pred, tgt.labels, hidden)
    except _TRIAL_ERRORS as exc:
        out.status = f"failed: {type(exc).__name__}: {exc}"
    out.runtime_ms = 1000.0 * (time.perf_counter() - start)
    return out


def _run_pair(args):
    return run_trial(*args)


def run_trials(cfg, specs, parallel=1):
    """Run trials, in worker processes when ``parallel > 1``; the output
    order always matches ``specs``."""
    specs = list(specs)
    if parallel <= 1 or len(specs) <= 1:
        return [run_trial(cfg, s) for s in specs]
    with ProcessPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(_run_pair, [(cfg, s) for s in specs]))


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_results_csv(outcomes, path, timing=False):
    """Write one row per trial. ``runtime_ms`` is left blank unless
    ``timing`` is set, keeping the file byte-identical across reruns."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for o in outcomes:
            s = o.spec
            w.writerow([s.method, _fmt(s.label_ratio), str(s.seed), _fmt(o.misclassification),
                        _fmt(o.rms), _fmt(o.runtime_ms) if timing else "",
                        _fmt(o.objective_final), _fmt(o.outer_iters), o.status])


def write_history_csv(outcome, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["class_run", "step", "objective"])
        for c, step, v in outcome.history:
            w.writerow([c, step, repr(float(v))])


def _cell_mean(outcomes):
    vals = [o.misclassification for o in outcomes if not o.failed]
    return float(np.mean(vals)) if vals else float("nan")


def sweep_tables(cfg, parallel=1):
    """Run the configured sweeps with DASGA and average over seeds.

    Returns ``(tables, outcomes)`` where ``tables`` maps an output file name
    to its rows (header first).
    """
    sw = cfg.sweep
    ratio = sw.label_ratio if sw.label_ratio is not None else cfg.label_ratios[0]
    grids = {}
    mu1s = sw.mu1 or (cfg.align.mu1,)
    mu2s = sw.mu2 or (cfg.align.mu2,)
    if sw.mu1 or sw.mu2:
        grids["sweep_mu.csv"] = [(("mu1", a), ("mu2", b)) for a in mu1s for b in mu2s]
    if sw.k:
        grids["sweep_k.csv"] = [(("k", k),) for k in sw.k]
    if sw.R:
        grids["sweep_r.csv"] = [(("R", r),) for r in sw.R]
    if not grids:
        raise ConfigurationError("sweep needs at least one of sweep.mu1, mu2, k or R")

    specs = [TrialSpec("dasga", ratio, seed, cell)
             for cells in grids.values() for cell in cells for seed in cfg.seeds]
    outcomes = run_trials(cfg, specs, parallel)
    by_cell = {}
    for o in outcomes:
        by_cell.setdefault(o.spec.overrides, []).append(o)

    tables = {}
    for name, cells in grids.items():
        if name == "sweep_mu.csv":
            rows = [["mu1\\mu2"] + [_fmt(b) for b in mu2s]]
            for a in mu1s:
                rows.append([_fmt(a)] + [_fmt(_cell_mean(by_cell[(("mu1", a), ("mu2", b))]))
                                         for b in mu2s])
        else:
            key = cells[0][0][0]
            rows = [[key, "mean_misclassification", "n_trials"]]
            for c in cells:
                done = [o for o in by_cell[c] if not o.failed]
                rows.append([_fmt(c[0][1]), _fmt(_cell_mean(by_cell[c])), str(len(done))])
        tables[name] = rows
    return tables, outcomes


def _label_signal(labels):
    classes = np.unique(labels)
    if classes.size == 2:
        return np.where(labels == classes[1], 1.0, -1.0)
    return labels.astype(np.float64)


def label_spectra(cfg, seed):
    """``{"source": report, "target": report}`` with ``(lambda, |coef|)`` pairs
    of the ground-truth label functions (two classes map to -1/+1)."""
    out = {}
    for name, ds in zip(("source", "target"), load_domains(cfg, seed)):
        g = _graph(ds, cfg.graph.k, cfg.graph.kernel_scale)
        basis = eigendecompose(laplacian(g), min(cfg.spectra_components, g.n))
        out[name] = spectrum_report(basis, _label_signal(ds.labels))
    return out


def write_table(rows, path):
    with open(path, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
