"""Command line front end: run one experiment config, or the whole
verification suite, emitting deterministic CSV rows and JSON summaries.

Exit codes: 0 success, 2 invalid configuration (including inadmissible
noise-regularity targets), 3 numerical failure.
"""

import argparse
import json
import os
import sys
import tempfile

from .errors import NumericalFailure
from .experiments import (CSV_COLUMNS, DESCRIPTIONS, EXPERIMENT_KINDS,
                          ExperimentConfig, run_experiment)

VERIFY_ALL_SUITE = (
    {"experiment": "trace_identity"},
    {"experiment": "aq_check"},
    {"experiment": "holder"},
    {"experiment": "det_semigroup"},
    {"experiment": "temporal_weak", "scheme": "backward_euler", "n_paths": 10_000},
    {"experiment": "temporal_weak", "scheme": "crank_nicolson"},
    {"experiment": "temporal_strong", "scheme": "backward_euler", "n_paths": 10_000},
    {"experiment": "temporal_strong", "scheme": "crank_nicolson"},
    {"experiment": "full_weak", "scheme": "backward_euler"},
    {"experiment": "full_weak", "scheme": "crank_nicolson"},
    {"experiment": "full_strong", "scheme": "backward_euler"},
    {"experiment": "full_strong", "scheme": "crank_nicolson"},
    {"experiment": "chc_weak"},
    {"experiment": "heat_weak"},
    {"experiment": "representation"},
)


def _fmt(value):
    if value == "" or value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_outputs(result, prefix):
    lines = [",".join(CSV_COLUMNS)]
    for row in result.rows:
        lines.append(",".join(_fmt(row[c]) for c in CSV_COLUMNS))
    _atomic_write(prefix + ".csv", "\n".join(lines) + "\n")
    _atomic_write(prefix + ".json",
                  json.dumps(result.summary(), indent=2, sort_keys=True) + "\n")


def cmd_run(args):
    try:
        with open(args.config, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = ExperimentConfig.from_dict(raw)
    except (TypeError, ValueError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    if cfg.out is None:
        print("config needs an 'out' path prefix", file=sys.stderr)
        return 2
    try:
        result = run_experiment(cfg)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    write_outputs(result, cfg.out)
    status = {"True": "pass", "False": "FAIL", "None": "n/a"}[str(result.passed)]
    print(f"{cfg.experiment}: {status} -> {cfg.out}.csv / .json")
    return 0


def cmd_verify_all(args):
    os.makedirs(args.out, exist_ok=True)
    overall = []
    code = 0
    for spec_dict in VERIFY_ALL_SUITE:
        raw = dict(spec_dict)
        if args.seed is not None:
            raw["seed"] = args.seed
        cfg = ExperimentConfig.from_dict(raw)
        try:
            result = run_experiment(cfg)
        except NumericalFailure as exc:
            print(f"numerical failure in {cfg.experiment}: {exc}", file=sys.stderr)
            return 3
        tag = cfg.experiment
        if cfg.experiment in ("temporal_weak", "temporal_strong",
                              "full_weak", "full_strong"):
            tag = f"{cfg.experiment}_{cfg.scheme}"
        prefix = os.path.join(args.out, tag)
        write_outputs(result, prefix)
        overall.append({"experiment": tag, "pass": result.passed,
                        "claim": result.claim})
        status = {"True": "pass", "False": "FAIL", "None": "n/a"}[str(result.passed)]
        print(f"{tag}: {status}")
        if result.passed is False:
            code = 1
    _atomic_write(os.path.join(args.out, "verify_all.json"),
                  json.dumps({"results": overall}, indent=2, sort_keys=True) + "\n")
    return code


def cmd_list(_args):
    for kind in EXPERIMENT_KINDS:
        print(f"{kind:16s} {DESCRIPTIONS[kind]}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ratelab",
        description="convergence-rate experiments for linear SPDE discretizations")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one experiment config (JSON)")
    p_run.add_argument("config")
    p_run.set_defaults(func=cmd_run)
    p_all = sub.add_parser("verify-all", help="run the default verification suite")
    p_all.add_argument("--out", required=True, help="output directory")
    p_all.add_argument("--seed", type=int, default=None)
    p_all.set_defaults(func=cmd_verify_all)
    p_list = sub.add_parser("list-experiments", help="list experiment kinds")
    p_list.set_defaults(func=cmd_list)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
