"""Command-line front door: validate, eval, classify, resolve, enumerate,
attribute, sweep, serve.

Machine-readable output goes to stdout, diagnostics to stderr. Exit codes:
0 success, 1 domain error, 2 usage error. Identical invocations (including
--seed) produce identical output.
"""

from __future__ import annotations

import argparse
import os
import sys

from .afformat import SourceDocument, serialize_framework, try_parse_framework
from .analysis import (
    ExactShapley,
    PermutationSampling,
    Scenario,
    attribution_to_csv,
    base_score_sweep,
    distribution_to_csv,
    enumerate_decisions,
    relation_attribution,
    sweep_to_csv,
)
from .corpus import list_corpora, load_corpus
from .errors import GradargError
from .model import Framework, active_subframework, validate_structure
from .preferences import classify
from .resolver import Lexicographic, mupcr
from .semantics import SemanticsKind, evaluate


def _add_framework_args(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--framework", help="path to an .af file")
    source.add_argument("--corpus", help="bundled corpus name (e.g. frailty_scenario1)")
    parser.add_argument(
        "--activate", action="append", default=[], metavar="ID", help="activate an argument"
    )
    parser.add_argument(
        "--deactivate", action="append", default=[], metavar="ID", help="deactivate an argument"
    )
    parser.add_argument("--activate-all", action="store_true", help="activate every argument")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--semantics", default="qe", help="qe | dfquad | euler")
    parser.add_argument("--precision", type=int, default=6, help="printed decimal places")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gradarg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="structural validation of an .af file")
    p.add_argument("--framework", required=True)

    p = sub.add_parser("eval", help="print final strengths")
    _add_framework_args(p)
    _add_common(p)

    p = sub.add_parser("classify", help="classify the preference profile")
    _add_framework_args(p)

    p = sub.add_parser("resolve", help="run conflict resolution")
    _add_framework_args(p)
    _add_common(p)

    p = sub.add_parser("enumerate", help="exhaustive activation enumeration")
    p.add_argument("--scenario", required=True, help="corpus scenario name")
    p.add_argument(
        "--filter",
        choices=["all", "t1-active", "no-risk"],
        default="all",
        help="which distribution row to compute",
    )
    p.add_argument("--all-filters", action="store_true", help="emit all three rows")
    p.add_argument("--require-active", metavar="ID", help="explicit activation filter")
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    _add_common(p)

    p = sub.add_parser("attribute", help="relation attribution table")
    _add_framework_args(p)
    p.add_argument("--method", choices=["exact", "sampling"], default="sampling")
    p.add_argument("--samples", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    _add_common(p)

    p = sub.add_parser("sweep", help="base-score sensitivity sweep")
    p.add_argument("--scenario", required=True)
    p.add_argument("--target", required=True, metavar="ID")
    p.add_argument("--points", type=int, default=11)
    p.add_argument("--out", help="write CSV here instead of stdout")
    _add_common(p)

    p = sub.add_parser("serve", help="start the session service")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--sessions-dir", help="journal directory (default: in-memory)")
    p.add_argument("--ui-dir", help="static workbench files to mount at /ui")

    sub.add_parser("corpora", help="list bundled corpora")
    return parser


def _load(args) -> Framework:
    if args.corpus:
        framework, _ = load_corpus(args.corpus)
    else:
        framework, errors = try_parse_framework(SourceDocument.from_file(args.framework))
        if framework is None:
            for err in errors:
                print(f"{args.framework}:{err}", file=sys.stderr)
            raise GradargError("framework file is invalid")
    overrides = {}
    if args.activate_all:
        overrides = {
            aid: True for aid in framework.arguments if not framework.is_option(aid)
        }
    for aid in args.activate:
        overrides[aid] = True
    for aid in args.deactivate:
        overrides[aid] = False
    if overrides:
        framework = active_subframework(framework, overrides)
    return framework


def _scenario(name: str) -> Scenario:
    _, scenario = load_corpus(name)
    return scenario


def _write(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _cmd_validate(args) -> int:
    framework, errors = try_parse_framework(SourceDocument.from_file(args.framework))
    if framework is None:
        for err in errors:
            print(f"{args.framework}:{err}", file=sys.stderr)
        return 1
    report = validate_structure(framework)
    for issue in report.warnings:
        print(f"warning: {issue.code}: {issue.message}", file=sys.stderr)
    if report.errors:
        for issue in report.errors:
            print(f"error: {issue.code}: {issue.message}", file=sys.stderr)
        return 1
    print(f"ok: {len(framework.arguments)} arguments, {len(framework.relations)} relations")
    return 0


def _cmd_eval(args) -> int:
    framework = _load(args)
    strengths = evaluate(framework, SemanticsKind.from_token(args.semantics))
    for aid in sorted(strengths):
        print(f"{aid}={strengths[aid]:.{args.precision}f}")
    if not strengths.converged:
        print("warning: NOT_CONVERGED", file=sys.stderr)
    return 0


def _cmd_classify(args) -> int:
    framework = _load(args)
    result = classify(framework.total_preferences())
    print(f"labels={','.join(sorted(result.labels))} overall={result.overall.value}")
    return 0


def _cmd_resolve(args) -> int:
    framework = _load(args)
    decision = mupcr(framework, SemanticsKind.from_token(args.semantics), Lexicographic())
    parts = [f"decision={decision.selected}"]
    parts += [
        f"σ({oid})={decision.strengths[oid]:.{args.precision}f}" for oid in framework.options
    ]
    parts += [f"branch={decision.branch}", f"tie={'true' if decision.tie else 'false'}"]
    print(" ".join(parts))
    return 0


def _cmd_enumerate(args) -> int:
    scenario = _scenario(args.scenario)
    kind = SemanticsKind.from_token(args.semantics)
    jobs = max(1, args.jobs)
    selections = []
    filters = ["all", "t1-active", "no-risk"] if args.all_filters else [args.filter]
    for name in filters:
        if args.require_active:
            selections.append(dict(require_active=args.require_active))
        elif name == "all":
            selections.append(dict())
        elif name == "t1-active":
            roots = scenario.risk_roots
            selections.append(dict(require_active=roots[0] if roots else "T1"))
        else:
            selections.append(dict(without_risk=True))
    tables = [
        enumerate_decisions(scenario, kind, jobs=jobs, **selection) for selection in selections
    ]
    _write(distribution_to_csv(tables), args.out)
    return 0


def _cmd_attribute(args) -> int:
    framework = _load(args)
    method = (
        ExactShapley()
        if args.method == "exact"
        else PermutationSampling(samples=args.samples, seed=args.seed)
    )
    table = relation_attribution(
        framework, method, kind=SemanticsKind.from_token(args.semantics)
    )
    _write(attribution_to_csv(table), args.out)
    return 0


def _cmd_sweep(args) -> int:
    scenario = _scenario(args.scenario)
    if args.points < 2:
        raise GradargError("--points must be at least 2")
    grid = [i / (args.points - 1) for i in range(args.points)]
    result = base_score_sweep(
        scenario, args.target, grid, SemanticsKind.from_token(args.semantics)
    )
    _write(sweep_to_csv(result), args.out)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import SessionStore, create_app

    store = SessionStore(directory=args.sessions_dir)
    app = create_app(store, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _cmd_corpora(args) -> int:
    for name in list_corpora():
        print(name)
    return 0


_COMMANDS = {
    "validate": _cmd_validate,
    "eval": _cmd_eval,
    "classify": _cmd_classify,
    "resolve": _cmd_resolve,
    "enumerate": _cmd_enumerate,
    "attribute": _cmd_attribute,
    "sweep": _cmd_sweep,
    "serve": _cmd_serve,
    "corpora": _cmd_corpora,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except GradargError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
