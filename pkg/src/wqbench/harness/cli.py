"""Command line interface.

Verbs::

    wqbench run --config plan.json [--seed N] [--jobs N] [--out DIR]
                [--formats json,csv]
    wqbench synth --out corpus_dir [--seed N] [--basins N] [--years N]
                  [--variables a,b] [--config plan.json]
    wqbench validate-config --config plan.json
    wqbench report --report report.json --out DIR [--formats csv]

Flag precedence for the output directory: --out beats the WQBENCH_OUT
environment variable, which beats the config file value, which beats
the built-in default.  --seed beats the config file seed.  Exit codes:
0 success, 2 configuration error, 3 stage or emission failure.
"""

import argparse
import dataclasses
import json
import os
import sys

from ..dataio import SynthConfig, SynthVariable, synthesize, write_csv
from ..errors import ConfigurationError, WqbenchError
from .config import load_config, validate_config
from .report import emit, load_report
from .runner import run
from .seeding import seed_stream

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3


def _parser():
    parser = argparse.ArgumentParser(
        prog="wqbench",
        description="trustworthiness benchmark for water-quality models")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="execute an experiment plan")
    p_run.add_argument("--config", required=True, help="plan JSON file")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the master seed")
    p_run.add_argument("--jobs", type=int, default=1,
                       help="max parallel jobs")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--formats", default="json,csv",
                       help="comma-separated output formats")

    p_synth = sub.add_parser("synth",
                             help="write a synthetic corpus directory")
    p_synth.add_argument("--out", required=True,
                         help="corpus directory to write")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--basins", type=int, default=4)
    p_synth.add_argument("--years", type=int, default=4)
    p_synth.add_argument("--start-year", type=int, default=2000)
    p_synth.add_argument("--variables", default="conc",
                         help="comma-separated variable names")
    p_synth.add_argument("--config", default=None,
                         help="take the synth source from this plan")

    p_val = sub.add_parser("validate-config",
                           help="check a plan and print its hash")
    p_val.add_argument("--config", required=True)

    p_rep = sub.add_parser("report",
                           help="re-render CSV tables from a report JSON")
    p_rep.add_argument("--report", required=True)
    p_rep.add_argument("--out", required=True)
    p_rep.add_argument("--formats", default="csv")
    return parser


def _formats(arg):
    formats = tuple(f for f in arg.split(",") if f)
    unknown = sorted(set(formats) - {"json", "csv"})
    if unknown:
        raise ConfigurationError(
            "unknown format(s): %s" % ", ".join(unknown))
    if not formats:
        raise ConfigurationError("--formats must not be empty")
    return formats


def _cmd_run(args):
    config = load_config(args.config)
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigurationError(
                "--seed must fit an unsigned 64-bit integer")
        config = dataclasses.replace(config, seed=args.seed)
    if args.jobs < 1:
        raise ConfigurationError("--jobs must be at least 1")
    formats = _formats(args.formats)
    out = (args.out or os.environ.get("WQBENCH_OUT") or config.out)
    report = run(config, jobs=args.jobs)
    written = emit(report, out, formats)
    print("config %s" % report.config_hash)
    print("completed: %s" % " ".join(report.completed))
    for table in sorted(report.tables):
        print("%s: %d rows" % (table, len(report.tables[table])))
    print("wrote %d file(s) under %s" % (len(written), out))
    if report.failed:
        for failure in report.failures:
            print("FAILED %(stage)s [%(job)s]: %(error)s" % failure,
                  file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


def _cmd_synth(args):
    if args.config:
        config = load_config(args.config)
        synth_config = config.synth_config()
    else:
        names = [n for n in args.variables.split(",") if n]
        if not names:
            raise ConfigurationError("--variables must name a variable")
        synth_config = SynthConfig(
            n_basins=args.basins, n_years=args.years,
            start_year=args.start_year,
            variables=tuple(SynthVariable(name) for name in names))
    dataset = synthesize(synth_config,
                         seed=seed_stream(args.seed, ["data", "synth"]))
    write_csv(dataset, args.out)
    rows = sum(b.dynamics.shape[0] for b in dataset.basins)
    print("wrote %s (%d basins, %d rows)" % (args.out,
                                             len(dataset.basins), rows))
    return EXIT_OK


def _cmd_validate(args):
    config = load_config(args.config)
    print("ok %s" % config.config_hash)
    return EXIT_OK


def _cmd_report(args):
    report = load_report(args.report)
    written = emit(report, args.out, _formats(args.formats))
    print("wrote %d file(s) under %s" % (len(written), args.out))
    return EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    handlers = {"run": _cmd_run, "synth": _cmd_synth,
                "validate-config": _cmd_validate, "report": _cmd_report}
    try:
        return handlers[args.verb](args)
    except ConfigurationError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, WqbenchError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
