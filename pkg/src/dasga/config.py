"""Experiment configuration: a YAML file with nested sections, validated
before any compute starts."""

import os
from dataclasses import asdict, dataclass, field, fields, replace

import yaml

from .data import PRESETS
from .exceptions import ConfigurationError

__all__ = [
    "DataConfig",
    "GraphConfig",
    "AlignConfig",
    "ExperimentConfig",
    "METHODS",
    "load_config",
    "config_from_dict",
    "DEFAULTS_HELP",
]

METHODS = ("dasga", "ssl", "nn")


@dataclass(frozen=True)
class DomainFiles:
    features: str = None
    labels: str = None
    edges: str = None


@dataclass(frozen=True)
class DataConfig:
    """Either a synthetic ``preset`` or explicit files for both domains.

    With a preset the datasets are regenerated for every trial seed.
    """

    preset: str = "synth1"
    n_per_class: int = 100
    task: str = "classification"
    source: DomainFiles = None
    target: DomainFiles = None
    source_label_ratio: float = 1.0


@dataclass(frozen=True)
class GraphConfig:
    k: int = 25
    kernel_scale: object = "auto"


@dataclass(frozen=True)
class AlignConfig:
    mu1: float = 0.1
    mu2: float = 1.0
    sigma: float = None
    R: int = 9
    max_outer_iters: int = 50
    outer_tol: float = 1e-6
    n_pairs: int = None
    transform_starts: int = 4


@dataclass(frozen=True)
class SweepConfig:
    mu1: tuple = ()
    mu2: tuple = ()
    k: tuple = ()
    R: tuple = ()
    label_ratio: float = None


@dataclass(frozen=True)
class ExperimentConfig:
    data: DataConfig = field(default_factory=DataConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    align: AlignConfig = field(default_factory=AlignConfig)
    methods: tuple = ("dasga", "ssl")
    label_ratios: tuple = (0.05,)
    seeds: tuple = tuple(range(5))
    sweep: SweepConfig = field(default_factory=SweepConfig)
    spectra_components: int = 20
    history: bool = True
    out: str = "results"

    def with_seeds(self, n):
        if n < 1:
            raise ConfigurationError("--seeds must be at least 1")
        return replace(self, seeds=tuple(range(n)))

    def to_dict(self):
        return asdict(self)


DEFAULTS_HELP = """\
configuration file (YAML); every key is optional:
  data:
    preset: synth1            # synth1 | synth2, ignored when files are given
    n_per_class: 100
    task: classification      # classification | regression
    source: {features: PATH, labels: PATH, edges: PATH}
    target: {features: PATH, labels: PATH, edges: PATH}
    source_label_ratio: 1.0
  graph: {k: 25, kernel_scale: auto}
  align:
    mu1: 0.1
    mu2: 1.0
    sigma: null               # null means R / 4
    R: 9
    max_outer_iters: 50
    outer_tol: 1.0e-6
    n_pairs: null             # null means 2 per class
    transform_starts: 4
  methods: [dasga, ssl]       # any of dasga, ssl, nn
  label_ratios: [0.05]
  seeds: [0, 1, 2, 3, 4]      # or an integer N meaning 0..N-1
  sweep: {mu1: [], mu2: [], k: [], R: [], label_ratio: null}
  spectra_components: 20
  history: true               # write history_<trial>.csv for dasga trials
  out: results
"""


def _section(cls, raw, where):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{where} must be a mapping")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigurationError(f"unknown key(s) in {where}: {', '.join(map(str, unknown))}")
    return cls(**raw)


def _number(value, where, integer=False, positive=True, allow_none=False):
    if value is None and allow_none:
        return None
    if isinstance(value, str) and not integer:
        # YAML 1.1 reads exponents without a decimal point (1e-4) as strings
        try:
            value = float(value)
        except ValueError:
            pass
    ok = isinstance(value, int) if integer else isinstance(value, (int, float))
    if isinstance(value, bool) or not ok:
        kind = "an integer" if integer else "a number"
        raise ConfigurationError(f"{where} must be {kind}, got {value!r}")
    if positive and not value > 0:
        raise ConfigurationError(f"{where} must be positive, got {value!r}")
    return value if integer else float(value)


def _number_list(values, where, integer=False):
    if not isinstance(values, (list, tuple)):
        raise ConfigurationError(f"{where} must be a list")
    return tuple(_number(v, f"{where} entry", integer) for v in values)


def _domain(raw, where, base_dir):
    files = _section(DomainFiles, raw, where)
    resolved = {}
    for f in fields(DomainFiles):
        path = getattr(files, f.name)
        if path is None:
            continue
        path = os.path.join(base_dir, path) if not os.path.isabs(path) else path
        if not os.path.isfile(path):
            raise ConfigurationError(f"{where}.{f.name}: file {path!r} does not exist")
        resolved[f.name] = path
    files = DomainFiles(**resolved)
    if files.labels is None:
        raise ConfigurationError(f"{where}.labels is required")
    if files.features is None and files.edges is None:
        raise ConfigurationError(f"{where} needs features or edges")
    return files


def config_from_dict(raw, base_dir="."):
    """Validate a parsed configuration mapping; relative paths resolve
    against ``base_dir``."""
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigurationError("configuration must be a mapping")
    unknown = sorted(set(raw) - {f.name for f in fields(ExperimentConfig)})
    if unknown:
        raise ConfigurationError(f"unknown top-level key(s): {', '.join(map(str, unknown))}")

    data_raw = dict(raw.get("data") or {})
    src, tgt = data_raw.pop("source", None), data_raw.pop("target", None)
    data = _section(DataConfig, data_raw, "data")
    if (src is None) != (tgt is None):
        raise ConfigurationError("data.source and data.target must be given together")
    if src is not None:
        data = replace(data, source=_domain(src, "data.source", base_dir),
                       target=_domain(tgt, "data.target", base_dir), preset=None)
    elif data.preset not in PRESETS:
        raise ConfigurationError(
            f"data.preset {data.preset!r} is unknown; choose from {sorted(PRESETS)}"
        )
    if data.task not in ("classification", "regression"):
        raise ConfigurationError("data.task must be classification or regression")
    _number(data.n_per_class, "data.n_per_class", integer=True)
    srat = _number(data.source_label_ratio, "data.source_label_ratio")
    if srat > 1:
        raise ConfigurationError("data.source_label_ratio must be in (0, 1]")

    graph = _section(GraphConfig, raw.get("graph"), "graph")
    _number(graph.k, "graph.k", integer=True)
    if graph.kernel_scale != "auto":
        _number(graph.kernel_scale, "graph.kernel_scale")

    align = _section(AlignConfig, raw.get("align"), "align")
    align = replace(
        align,
        mu1=_number(align.mu1, "align.mu1"),
        mu2=_number(align.mu2, "align.mu2"),
        sigma=_number(align.sigma, "align.sigma", allow_none=True),
        outer_tol=_number(align.outer_tol, "align.outer_tol"),
    )
    if _number(align.R, "align.R", integer=True) < 2:
        raise ConfigurationError("align.R must be at least 2")
    _number(align.max_outer_iters, "align.max_outer_iters", integer=True)
    _number(align.n_pairs, "align.n_pairs", integer=True, allow_none=True)
    _number(align.transform_starts, "align.transform_starts", integer=True, positive=False)

    methods = raw.get("methods", ExperimentConfig.methods)
    if not isinstance(methods, (list, tuple)) or not methods:
        raise ConfigurationError("methods must be a nonempty list")
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise ConfigurationError(f"unknown method(s) {bad}; choose from {list(METHODS)}")
    if "nn" in methods and data.source is not None and data.target.features is None:
        raise ConfigurationError("method nn needs target features")
    if len(set(methods)) != len(methods):
        raise ConfigurationError("methods must not repeat")

    ratios = _number_list(raw.get("label_ratios", ExperimentConfig.label_ratios), "label_ratios")
    if not ratios or any(r > 1 for r in ratios):
        raise ConfigurationError("label_ratios must be a nonempty list of values in (0, 1]")

    seeds = raw.get("seeds", ExperimentConfig.seeds)
    if isinstance(seeds, int) and not isinstance(seeds, bool):
        seeds = tuple(range(_number(seeds, "seeds", integer=True)))
    else:
        if not isinstance(seeds, (list, tuple)):
            raise ConfigurationError("seeds must be a list or an integer")
        seeds = tuple(_number(s, "seeds entry", integer=True, positive=False) for s in seeds)
    if not seeds:
        raise ConfigurationError("seeds must be nonempty")

    sweep = _section(SweepConfig, raw.get("sweep"), "sweep")
    sweep = replace(
        sweep,
        mu1=_number_list(sweep.mu1, "sweep.mu1"),
        mu2=_number_list(sweep.mu2, "sweep.mu2"),
        k=_number_list(sweep.k, "sweep.k", integer=True),
        R=_number_list(sweep.R, "sweep.R", integer=True),
        label_ratio=_number(sweep.label_ratio, "sweep.label_ratio", allow_none=True),
    )
    if any(r < 2 for r in sweep.R):
        raise ConfigurationError("sweep.R entries must be at least 2")

    spectra = _number(raw.get("spectra_components", 20), "spectra_components", integer=True)
    history = raw.get("history", True)
    if not isinstance(history, bool):
        raise ConfigurationError("history must be true or false")
    out = raw.get("out", ExperimentConfig.out)
    if not isinstance(out, str) or not out:
        raise ConfigurationError("out must be a nonempty path")

    return ExperimentConfig(data, graph, align, tuple(methods), ratios, seeds, sweep,
                            spectra, history, out)


def load_config(path):
    """Read and validate a YAML configuration file."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path!r}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config {path!r} is not valid YAML: {exc}") from None
    return config_from_dict(raw, base_dir=os.path.dirname(os.path.abspath(path)))
