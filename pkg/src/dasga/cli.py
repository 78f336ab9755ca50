"""Command-line batch harness.

Subcommands ``run``, ``sweep``, ``spectra`` and ``synth``; see ``dasga
<command> --help``. Exit status is 0 when every trial completed, 1 when a
trial was flagged as failed (unless ``--allow-failures``), and 2 for an
invalid configuration or input file.
"""

import argparse
import logging
import os
import sys
import warnings

from .config import DEFAULTS_HELP, ExperimentConfig, load_config
from .data import PRESETS, make_preset, write_csv_features, write_labels
from .exceptions import ConfigurationError, InvalidParameterError, NumericalFailure, ParseError
from .experiment import (
    TrialSpec,
    ensure_dir,
    label_spectra,
    run_trials,
    sweep_tables,
    write_history_csv,
    write_results_csv,
    write_table,
)
from .spectral import write_spectrum_csv

logger = logging.getLogger("dasga")


def _common(p):
    p.add_argument("--config", metavar="PATH", help="YAML experiment configuration")
    p.add_argument("--out", metavar="DIR", help="output directory (overrides the config)")
    p.add_argument("--seeds", type=int, metavar="N", help="use seeds 0..N-1")
    p.add_argument("--parallel", type=int, default=1, metavar="N",
                   help="worker processes for independent trials (default 1)")
    p.add_argument("--allow-failures", action="store_true",
                   help="exit 0 even when some trials are flagged as failed")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dasga",
        description="Graph-spectral domain adaptation experiments.",
        epilog=DEFAULTS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.RawDescriptionHelpFormatter

    p = sub.add_parser("run", help="evaluate methods over label ratios and seeds",
                       epilog=DEFAULTS_HELP, formatter_class=fmt)
    _common(p)
    p.add_argument("--timing", action="store_true",
                   help="fill runtime_ms (makes results.csv differ between reruns)")

    p = sub.add_parser("sweep", help="mean DASGA error over parameter grids",
                       epilog=DEFAULTS_HELP, formatter_class=fmt)
    _common(p)

    p = sub.add_parser("spectra", help="label-function spectra of both domains",
                       epilog=DEFAULTS_HELP, formatter_class=fmt)
    _common(p)

    p = sub.add_parser("synth", help="write a synthetic dataset pair as CSV files")
    p.add_argument("--preset", default="synth1", choices=sorted(PRESETS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-per-class", type=int, default=100)
    p.add_argument("--out", metavar="DIR", default=".")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _config(args):
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seeds is not None:
        cfg = cfg.with_seeds(args.seeds)
    if args.parallel < 1:
        raise ConfigurationError("--parallel must be at least 1")
    return cfg, ensure_dir(args.out or cfg.out)


def _report(outcomes, allow_failures):
    failed = [o for o in outcomes if o.failed]
    for o in failed:
        logger.error("trial %s %s", o.spec.name, o.status)
    if failed and not allow_failures:
        print(f"{len(failed)} of {len(outcomes)} trials failed", file=sys.stderr)
        return 1
    return 0


def cmd_run(args):
    cfg, out = _config(args)
    specs = [TrialSpec(m, r, s) for m in cfg.methods for r in cfg.label_ratios for s in cfg.seeds]
    outcomes = run_trials(cfg, specs, args.parallel)
    write_results_csv(outcomes, os.path.join(out, "results.csv"), timing=args.timing)
    if cfg.history:
        for o in outcomes:
            if o.history:
                write_history_csv(o, os.path.join(out, f"history_{o.spec.name}.csv"))
    return _report(outcomes, args.allow_failures)


def cmd_sweep(args):
    cfg, out = _config(args)
    tables, outcomes = sweep_tables(cfg, args.parallel)
    for name, rows in tables.items():
        write_table(rows, os.path.join(out, name))
    return _report(outcomes, args.allow_failures)


def cmd_spectra(args):
    cfg, out = _config(args)
    for name, report in label_spectra(cfg, cfg.seeds[0]).items():
        write_spectrum_csv(report, os.path.join(out, f"spectra_{name}.csv"))
    return 0


def cmd_synth(args):
    out = ensure_dir(args.out)
    for name, ds in zip(("source", "target"), make_preset(args.preset, args.seed,
                                                         args.n_per_class)):
        write_csv_features(ds.features, os.path.join(out, f"{name}_features.csv"))
        write_labels(ds.labels, os.path.join(out, f"{name}_labels.csv"))
    return 0


_COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "spectra": cmd_spectra, "synth": cmd_synth}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore")
    try:
        return _COMMANDS[args.command](args)
    except (ConfigurationError, InvalidParameterError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
