"""``probpol`` command line.

Exit status: 0 success, 1 error diagnostics / failed tests / conflicts,
2 usage or I/O problems.  ``PROBPOL_DIM`` overrides the embedding dimension.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any, Sequence

from . import conflicts as cf
from .constructs import PolicyError, lower
from .diagnostics import ERROR, WARNING, Diagnostic, ParseError, apply_fixes
from .emit import CompileRefused, SchemaViolation, compile, decompile, dumps
from .engine import MODES, VORONOI, ProviderError, Router, embedding_dim, run_tests, simulate
from .geometry import DegenerateCentroidError, Embedder
from .nodes import Program, describe_action
from .parser import parse
from .printer import print_program
from .validator import validate

OK, FAIL, USAGE = 0, 1, 2
MAX_FIX_ROUNDS = 8


class UsageError(Exception):
    """Bad input that is not a diagnostic: unreadable file, malformed JSON."""


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"{path}: cannot read: {exc}") from exc


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"{path}: cannot write: {exc}") from exc


def _embedder(program: Program) -> Embedder:
    env = os.environ.get("PROBPOL_DIM")
    if env is None:
        return Embedder(embedding_dim(program))
    try:
        dim = int(env)
    except ValueError:
        raise UsageError(f"PROBPOL_DIM must be an integer, got {env!r}") from None
    if dim < 2:
        raise UsageError("PROBPOL_DIM must be at least 2")
    return Embedder(dim)


def _attrs(value: str | None) -> dict[str, Any]:
    if value is None:
        return {}
    text = value if value.lstrip().startswith("{") else _read(value)
    try:
        attrs = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"--attrs: not JSON: {exc}") from exc
    if not isinstance(attrs, dict):
        raise UsageError("--attrs must be a JSON object")
    return attrs


def _queries(path: str) -> list[str]:
    return [line for line in _read(path).splitlines() if line.strip()]


def _load(path: str) -> tuple[Program | None, list[Diagnostic]]:
    """Parse and validate; the program is None on a syntax error."""
    try:
        program = parse(_read(path), file=path)
    except ParseError as exc:
        return None, exc.diagnostics
    return program, validate(program)


def _report(diags: list[Diagnostic], stream=None) -> None:
    stream = stream or sys.stderr
    for d in diags:
        print(d.format(), file=stream)


def _valid_program(path: str) -> Program | None:
    """Load for the analysis commands; prints errors and returns None if invalid."""
    program, diags = _load(path)
    errors = [d for d in diags if d.severity == ERROR]
    if program is None or errors:
        _report(errors)
        return None
    return program


# -- check ------------------------------------------------------------------


def _fix_file(path: str) -> None:
    for _ in range(MAX_FIX_ROUNDS):
        source = _read(path)
        try:
            diags = validate(parse(source, file=path))
        except ParseError:
            return
        fixes = [d.fix for d in diags if d.fix is not None]
        if not fixes:
            return
        fixed = apply_fixes(source, fixes)
        if fixed == source:
            return
        _write(path, fixed)


def cmd_check(args: argparse.Namespace) -> int:
    status = OK
    collected: list[Diagnostic] = []
    for path in args.files:
        try:
            if args.fix:
                _fix_file(path)
            _, diags = _load(path)
        except UsageError as exc:
            print(exc, file=sys.stderr)
            status = USAGE
            continue
        collected += diags
        if args.format == "text":
            _report(diags, sys.stdout)
    if args.format == "json":
        print(json.dumps([d.to_json() for d in collected], indent=2))
    if status == USAGE:
        return USAGE
    failing = {ERROR, WARNING} if args.strict else {ERROR}
    return FAIL if any(d.severity in failing for d in collected) else OK


# -- compile / decompile -----------------------------------------------------


def cmd_compile(args: argparse.Namespace) -> int:
    try:
        program = parse(_read(args.file), file=args.file)
        doc = compile(program)
    except (ParseError, CompileRefused) as exc:
        _report([d for d in exc.diagnostics if d.severity == ERROR])
        return FAIL
    _write(args.out, dumps(doc))
    return OK


def cmd_decompile(args: argparse.Namespace) -> int:
    text = _read(args.file)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.file}: not JSON: {exc}") from exc
    try:
        program = decompile(doc)
    except SchemaViolation as exc:
        print(f"{args.file}: schema violation at {exc.pointer or '/'}: {exc.message}",
              file=sys.stderr)
        return FAIL
    _write(args.out, print_program(program))
    return OK


# -- test -------------------------------------------------------------------


def cmd_test(args: argparse.Namespace) -> int:
    results = []
    for path in args.files:
        program = _valid_program(path)
        if program is None:
            return FAIL
        if not program.tests:
            print(f"{path}: no TEST blocks", file=sys.stderr)
            return USAGE
        kw = {"embedder": _embedder(program), "attributes": _attrs(args.attrs)}
        results += run_tests(program, **kw)
    print(f"1..{len(results)}")
    for i, r in enumerate(results, 1):
        got = r.actual or "<none>"
        if r.passed:
            print(f"ok {i} - {r.query} -> {got}")
        else:
            print(f"not ok {i} - {r.query} -> {got}")
            print(f"  # {r.test}: expected {r.expected}, got {got}")
    return OK if all(r.passed for r in results) else FAIL


# -- conflicts --------------------------------------------------------------

FAILING_KINDS = set(cf.TAXONOMY) - {cf.CALIBRATION_SUSPECT}


def _format_report(r: cf.ConflictReport) -> str:
    ev = r.to_json()["evidence"]
    detail = ", ".join(
        f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}" for k, v in ev.items()
    )
    routes = " > ".join(r.routes) if r.routes else "-"
    return f"  [{r.tier}] {routes}: {detail}"


def cmd_conflicts(args: argparse.Namespace) -> int:
    corpus = _queries(args.corpus) if args.corpus else None
    if corpus is not None and not corpus:
        raise UsageError(f"{args.corpus}: corpus is empty")
    reports: list[cf.ConflictReport] = []
    notes: list[str] = []
    for path in args.files:
        program = _valid_program(path)
        if program is None:
            return FAIL
        kw = {"embedder": _embedder(program), "attributes": _attrs(args.attrs)}
        reports += cf.analyze(program, corpus, **kw)
    if corpus is None:
        notes.append("soft shadowing skipped: no --corpus given")
    reports.sort(key=lambda r: cf.TAXONOMY.index(r.kind))
    if args.format == "json":
        print(json.dumps({"reports": [r.to_json() for r in reports], "notes": notes}, indent=2))
    else:
        for kind in cf.TAXONOMY:
            block = [r for r in reports if r.kind == kind]
            if not block:
                continue
            n = cf.TAXONOMY.index(kind) + 1
            head = f"{kind} (type {n})" if n <= 6 else kind
            print(f"{head}: {len(block)}")
            for r in block:
                print(_format_report(r))
        for note in notes:
            print(f"note: {note}")
    return FAIL if any(r.kind in FAILING_KINDS for r in reports) else OK


# -- simulate / explain -----------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> int:
    program = _valid_program(args.file)
    if program is None:
        return FAIL
    queries = _queries(args.trace)
    if not queries:
        raise UsageError(f"{args.trace}: trace is empty")
    summary = simulate(program, queries, mode=args.mode, embedder=_embedder(program),
                       attributes=_attrs(args.attrs))
    _write(args.out, json.dumps(summary.to_json(), indent=2, sort_keys=True) + "\n")
    return OK


def explain_text(program: Program, query: str, **router_kw: Any) -> str:
    router = Router(program, **router_kw)
    decision = router.route(query)
    s = decision.scores
    width = max([len(x.name) for x in router.program.signals] + [6])
    lines = [f"query: {query}", ""]
    lines.append(f"{'signal':<{width}}  {'type':<10}  {'raw':>7}  {'norm':>7}  fired  group")
    for sig in router.program.signals:
        n = sig.name
        lines.append(
            f"{n:<{width}}  {sig.signal_type:<10}  {s.raw[n]:7.4f}  {s.normalized[n]:7.4f}  "
            f"{'yes' if n in s.fired else 'no':<5}  {s.grouped.get(n, '-')}"
        )
    for g in router.program.groups:
        total = sum(s.normalized[m] for m in g.members if m in s.normalized)
        lines.append(f"group {g.name}: normalized sum {total:.6f}, T={g.temperature}, theta={g.threshold}")
    lines += ["", "trace:"]
    for t in decision.trace:
        tier = f" tier {t.tier}" if t.tier is not None else ""
        lines.append(f"  {t.route} (priority {t.priority}{tier}): "
                     f"{'match' if t.matched else 'no match'}, confidence {t.confidence:.4f}, {t.reason}")
    chosen = decision.route or "<none>"
    lines += ["", f"route: {chosen} -> {describe_action(decision.action)}"]
    return "\n".join(lines) + "\n"


def cmd_explain(args: argparse.Namespace) -> int:
    program = _valid_program(args.file)
    if program is None:
        return FAIL
    sys.stdout.write(explain_text(program, args.query, mode=args.mode,
                                  embedder=_embedder(program), attributes=_attrs(args.attrs)))
    return OK


def cmd_lower(args: argparse.Namespace) -> int:
    program = _valid_program(args.file)
    if program is None:
        return FAIL
    _write(args.out, print_program(lower(program)))
    return OK


# -- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="probpol", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="parse and validate DSL files")
    p.add_argument("files", nargs="+")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--strict", action="store_true", help="warnings also fail")
    p.add_argument("--fix", action="store_true", help="apply suggested fixes in place")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("compile", help="emit the flat JSON config")
    p.add_argument("file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("decompile", help="JSON config back to DSL source")
    p.add_argument("file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_decompile)

    p = sub.add_parser("test", help="run TEST blocks (TAP output)")
    p.add_argument("files", nargs="+")
    p.add_argument("--attrs")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("conflicts", help="static and corpus conflict analysis")
    p.add_argument("files", nargs="+")
    p.add_argument("--corpus", help="query trace, one per line")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--attrs")
    p.set_defaults(func=cmd_conflicts)

    p = sub.add_parser("simulate", help="route a query trace and summarize")
    p.add_argument("file")
    p.add_argument("--trace", required=True, help="query trace, one per line")
    p.add_argument("--mode", choices=MODES, default=VORONOI)
    p.add_argument("--out")
    p.add_argument("--attrs")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("explain", help="score table and routing trace for one query")
    p.add_argument("file")
    p.add_argument("query")
    p.add_argument("--attrs")
    p.add_argument("--mode", choices=MODES, default=VORONOI)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("lower", help="print the program with trees and policies compiled to routes")
    p.add_argument("file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_lower)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"probpol: {exc}", file=sys.stderr)
        return USAGE
    except (ProviderError, DegenerateCentroidError, PolicyError, ValueError) as exc:
        print(f"probpol: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
