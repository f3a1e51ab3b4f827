"""Command line interface.

Subcommands::

    ricci-lab flow run --config FILE [--out DIR]
    ricci-lab moser verify --seeds N --seed S [--out DIR]
    ricci-lab sobolev estimate --config FILE [--out DIR]
    ricci-lab scan concentration --config FILE [--out DIR]
    ricci-lab calibrate --suite FILE [--out DIR]
    ricci-lab report --in DIR

Exit codes: 0 success, 1 invariant violation, 2 configuration error,
3 runtime stop.  Failures print one JSON object on stderr with the keys
``error``, ``message`` and ``details``.  Without ``--out`` outputs go under
``$RICCI_LAB_OUTPUT`` (default ``./ricci_lab_runs``).
"""

from __future__ import annotations

import argparse
import json
import sys

from ricci_smoothing.harness.config import SCHEMA_VERSION, ConfigError, load_config, validate
from ricci_smoothing.harness.experiments import InvariantViolation, RuntimeStop, report, run_experiment
from ricci_smoothing.harness.records import jsonable

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError("<args>", message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ricci-lab", description="Ricci-flow smoothing laboratory")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    flow = sub.add_parser("flow").add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = flow.add_parser("run", help="integrate the flow for a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out")

    moser = sub.add_parser("moser").add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = moser.add_parser("verify", help="run the heat-inequality suite")
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")

    sob = sub.add_parser("sobolev").add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = sob.add_parser("estimate", help="estimate the Sobolev constant of a tube")
    p.add_argument("--config", required=True)
    p.add_argument("--out")

    scan = sub.add_parser("scan").add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = scan.add_parser("concentration", help="scan curvature concentration")
    p.add_argument("--config", required=True)
    p.add_argument("--out")

    p = sub.add_parser("calibrate", help="measure the regression constants of a suite")
    p.add_argument("--suite", required=True)
    p.add_argument("--out")

    p = sub.add_parser("report", help="re-render plots and print a run summary")
    p.add_argument("--in", dest="directory", required=True)
    return parser


def _load(path: str, kind: str):
    cfg = load_config(path)
    if cfg.kind != kind:
        raise ConfigError("kind", f"this subcommand needs kind {kind!r}, got {cfg.kind!r}")
    return cfg


def _dispatch(args) -> dict:
    if args.command == "report":
        return report(args.directory)
    if args.command == "moser":
        if args.seeds < 1:
            raise ConfigError("--seeds", "must be at least 1")
        cfg = validate({"schema_version": SCHEMA_VERSION, "kind": "moser_verify",
                        "suite": {"seed": args.seed, "size": args.seeds}})
    elif args.command == "calibrate":
        cfg = _load(args.suite, "calibrate")
    else:
        kind = {"flow": "flow", "sobolev": "sobolev", "scan": "scan"}[args.command]
        cfg = _load(args.config, kind)
    out, summary = run_experiment(cfg, args.out)
    return {"output_dir": str(out), "summary": summary}


def _fail(code: int, error: str, message: str, details=None) -> int:
    record = {"error": error, "message": message, "details": jsonable(details or {})}
    print(json.dumps(record, sort_keys=True, default=str), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        result = _dispatch(args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc), {"key": exc.key})
    except InvariantViolation as exc:
        return _fail(EXIT_INVARIANT, "invariant", str(exc), exc.details)
    except RuntimeStop as exc:
        return _fail(EXIT_RUNTIME, "runtime_stop", str(exc), exc.details)
    except (FileNotFoundError, KeyError, ValueError) as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    print(json.dumps(jsonable(result), sort_keys=True, indent=2))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
