"""``crforge`` command line: ``list``, ``run`` and ``explain``.

Exit codes: 0 all checks pass, 1 a check failed, 2 invalid configuration,
3 a check raised while evaluating.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys

from .errors import CRForgeError
from .models import default_registry
from .suite import (
    CATALOGUE,
    SUITES,
    ConfigError,
    EvaluationError,
    SuiteConfig,
    explain,
    parse_tolerances,
    run_suite,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_EVAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors, which matches the config-error code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="crforge", description="Verify CR geometry identities numerically on builtin or user models.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ls = sub.add_parser("list", help="list registered models")
    ls.add_argument("--json", action="store_true", help="machine-readable output")

    run = sub.add_parser("run", help="run a verification suite")
    run.add_argument("--model", required=True)
    run.add_argument("--map", default=None, help="map model with --model as its source")
    run.add_argument("--suite", default="all", choices=SUITES)
    run.add_argument("--points", type=int, default=3)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--order", type=int, default=4, help="jet order K")
    run.add_argument("--json", action="store_true", help="emit the JSON report")
    run.add_argument("--tol", action="append", default=[], metavar="KEY=VAL",
                     help="tolerance override for a check id, a group or '*'; repeatable")

    ex = sub.add_parser("explain", help="describe a check")
    ex.add_argument("check_id")
    return p


def _cmd_list(args) -> int:
    rows = default_registry().listing()
    if args.json:
        print(json.dumps(rows, indent=2))
        return EXIT_OK
    for r in rows:
        if r["category"] == "map":
            extra = f"{r['source']} -> {r['target']} ({r['kind']})"
        elif r["category"] == "bundle":
            extra = f"base {r['base']}, rank {r['rank']}"
        else:
            extra = f"dim {r['dimension']}, m0 {r['m0']}, codim {r['codimension']}"
        print(f"{r['name']:<22} {r['category']:<17} {extra}")
    return EXIT_OK


def _format_text(report: dict) -> str:
    lines = []
    for c in report["checks"]:
        status = "PASS" if c["pass"] else "FAIL"
        lines.append(f"{status}  {c['id']:<34} {c['max_residual']:.3e} <= {c['tolerance']:.1e}  ({c['points']} pts)")
    s = report["summary"]
    lines.append(f"{s['passed']}/{s['total']} checks passed")
    return "\n".join(lines)


def _cmd_run(args) -> int:
    try:
        cfg = SuiteConfig(
            model=args.model,
            map=args.map,
            suite=args.suite,
            points=args.points,
            seed=args.seed,
            order=args.order,
            tolerances=parse_tolerances(args.tol),
        )
        report = run_suite(cfg)
    except ConfigError as exc:
        print(f"crforge: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EvaluationError as exc:
        print(f"crforge: {exc}", file=sys.stderr)
        if args.json:
            print(json.dumps({"error": "evaluation", "check": exc.check_id, "message": str(exc.cause)}, indent=2))
        return EXIT_EVAL
    except CRForgeError as exc:
        print(f"crforge: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        print(_format_text(report))
    return EXIT_OK if report["summary"]["failed"] == 0 else EXIT_FAIL


def _cmd_explain(args) -> int:
    try:
        print(explain(args.check_id))
    except KeyError:
        print(f"crforge: unknown check id {args.check_id!r}; valid ids:", file=sys.stderr)
        print("\n".join(f"  {c}" for c in sorted(CATALOGUE)), file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"list": _cmd_list, "run": _cmd_run, "explain": _cmd_explain}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
