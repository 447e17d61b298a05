"""``xttc`` command line.

Exit codes: 0 success, 1 model or semantic error, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys

from .analysis import DEFAULT_STATE_BOUND, AnalysisError, analyze_table, check_reachability
from .bpmn import export_bpmn_rulelevel, export_bpmn_tablemap
from .drools import export_drools, write_bundle
from .engine import render_valuation, run_forward, run_goal_driven
from .model import Diagnostic, XttError, error, parse_model, validate_model

COMMANDS = ("validate", "run", "analyze", "export-drools", "export-bpmn")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="xttc", description="XTT2 rulebase compiler and inference tool")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("model_path", metavar="modelPath")
    p.add_argument("--set", dest="sets", action="append", default=[], metavar="ATTR=VALUE")
    p.add_argument("--goal")
    p.add_argument("--trace", action="store_true")
    p.add_argument("--out", dest="out_dir")
    p.add_argument("--out-file")
    p.add_argument("--scenario", choices=("table-map", "rule-level"))
    p.add_argument("--table", dest="table_name")
    p.add_argument("--plot-dir", help="analyze: also write one coverage figure per table here")
    return p


def _check_usage(p: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    if (args.scenario or args.table_name) and args.command != "export-bpmn":
        p.error("--scenario/--table only apply to export-bpmn")
    if args.goal and args.command != "run":
        p.error("--goal only applies to run")
    if args.sets and args.command != "run":
        p.error("--set only applies to run")
    if args.scenario == "rule-level" and not args.table_name:
        p.error("--scenario rule-level needs --table")
    if args.command == "export-drools" and not args.out_dir:
        p.error("export-drools needs --out")
    for s in args.sets:
        if "=" not in s:
            p.error(f"--set expects ATTR=VALUE, got {s!r}")


def _report(diagnostics: list[Diagnostic]) -> None:
    for d in diagnostics:
        print(d, file=sys.stderr)


def _bindings(model, sets: list[str]) -> dict:
    out, problems = {}, []
    for s in sets:
        name, _, text = s.partition("=")
        attr = model.attribute(name)
        if attr is None:
            problems.append(error("unknown-attribute", f"unknown attribute {name!r}", f"--set {s}"))
            continue
        try:
            out[name] = attr.domain.parse_value(text)
        except ValueError:
            problems.append(error("value-out-of-domain", f"{text!r} is not in the domain of {name}", f"--set {s}"))
    if problems:
        raise XttError(problems)
    return out


def _state_bound() -> int:
    raw = os.environ.get("XTTC_STATE_BOUND")
    return int(raw) if raw else DEFAULT_STATE_BOUND


def dispatch(args: argparse.Namespace) -> int:
    try:
        with open(args.model_path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"xttc: cannot read {args.model_path}: {exc.strerror}", file=sys.stderr)
        return 2

    try:
        model = parse_model(text)
        if args.command == "validate":
            diags = validate_model(model)
            for d in diags:
                print(d)
            return 1 if any(d.is_error for d in diags) else 0

        errors = [d for d in validate_model(model) if d.is_error]
        if errors:
            raise XttError(errors)

        if args.command == "run":
            initial = _bindings(model, args.sets)
            if args.goal:
                result = run_goal_driven(model, args.goal, initial)
            else:
                result = run_forward(model, initial)
            sys.stdout.write(render_valuation(result.final))
            if args.trace:
                sys.stdout.write(result.trace.render())
            _report(result.diagnostics)
            return 0 if result.ok else 1

        if args.command == "analyze":
            bound = _state_bound()
            defects = 0
            for t in model.tables:
                report = analyze_table(t, model, bound)
                for line in report.lines():
                    print(line)
                defects += len(report.lines())
            for name in check_reachability(model):
                print(f"{name} unreachable -")
                defects += 1
            if args.plot_dir:
                from .plots import plot_model_coverage

                plot_model_coverage(model, args.plot_dir, bound)
            return 1 if defects else 0

        if args.command == "export-drools":
            bundle = export_drools(model)
            if not bundle.ok:
                _report(list(bundle.diagnostics))
                return 1
            write_bundle(bundle, model.name, args.out_dir)
            return 0

        # export-bpmn
        if args.scenario == "rule-level":
            doc = export_bpmn_rulelevel(model, args.table_name)
            default_name = f"{model.name}_{args.table_name}.bpmn"
        else:
            doc = export_bpmn_tablemap(model)
            default_name = f"{model.name}.bpmn"
        path = args.out_file or os.path.join(args.out_dir or ".", default_name)
        if os.path.dirname(path):
            os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(doc.to_xml())
        return 0
    except (XttError, AnalysisError) as exc:
        _report(exc.diagnostics)
        return 1


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _check_usage(parser, args)
    return dispatch(args)


if __name__ == "__main__":
    sys.exit(main())
