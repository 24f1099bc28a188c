"""Canonical pretty-printer: the inverse of :func:`probpol.parser.parse` up to spans."""

from __future__ import annotations

import re
from typing import Any

from .nodes import (
    Action,
    AlgebraExpr,
    And,
    Atom,
    Block,
    Condition,
    DecisionTreeDecl,
    DefaultLeaf,
    ExclusiveUnion,
    GlobalDecl,
    Leaf,
    Model,
    Not,
    OpaqueDecl,
    Plugin,
    PolicyDecl,
    PolicyRef,
    Program,
    RouteDecl,
    Sequential,
    SignalDecl,
    SignalGroupDecl,
    TestDecl,
)
from .parser import RESERVED

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
INDENT = "  "


def quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def format_number(x: int | float) -> str:
    if isinstance(x, bool):
        raise TypeError("booleans are not DSL numbers")
    if isinstance(x, int):
        return str(x)
    text = repr(float(x))
    if "e" in text or "E" in text:
        text = f"{x:.20f}".rstrip("0")
        if text.endswith("."):
            text += "0"
    return text


def format_name(v: str) -> str:
    """Bare identifier when lexically possible, quoted otherwise."""
    if _IDENT.match(v) and v not in RESERVED:
        return v
    return quote(v)


def format_value(v: Any) -> str:
    if isinstance(v, str):
        return quote(v)
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return format_number(v)
    if isinstance(v, list):
        return "[" + ", ".join(format_value(x) for x in v) + "]"
    if isinstance(v, dict):
        if not v:
            return "{}"
        return "{ " + ", ".join(f"{k}: {format_value(x)}" for k, x in v.items()) + " }"
    raise TypeError(f"cannot print config value {v!r}")


def format_condition(cond: Condition, top: bool = True) -> str:
    """Binary sub-expressions are parenthesized everywhere except at the top level."""
    if isinstance(cond, Atom):
        return f"{cond.signal_type}({quote(cond.name)})"
    if isinstance(cond, Not):
        inner = format_condition(cond.operand, top=False)
        return f"NOT {inner}"
    op = "AND" if isinstance(cond, And) else "OR"
    text = f"{format_condition(cond.left, False)} {op} {format_condition(cond.right, False)}"
    return text if top else f"({text})"


def format_action(action: Action) -> str:
    if isinstance(action, Model):
        return f"MODEL {quote(action.model)}"
    if isinstance(action, Plugin):
        if action.config:
            return f"PLUGIN {action.name} {format_value(action.config)}"
        return f"PLUGIN {action.name}"
    assert isinstance(action, Block)
    return "BLOCK"


def _fields(config: dict[str, Any], depth: int = 1) -> list[str]:
    pad = INDENT * depth
    return [f"{pad}{k}: {format_value(v)}" for k, v in config.items()]


def print_signal(s: SignalDecl) -> str:
    return "\n".join([f"SIGNAL {s.signal_type} {s.name} {{", *_fields(s.config), "}"])


def print_route(r: RouteDecl) -> str:
    lines = [f"ROUTE {r.name} {{", f"{INDENT}PRIORITY {r.priority}"]
    if r.tier is not None:
        lines.append(f"{INDENT}TIER {r.tier}")
    lines.append(f"{INDENT}WHEN {format_condition(r.condition)}")
    if r.action is not None:
        lines.append(f"{INDENT}{format_action(r.action)}")
    lines.append("}")
    return "\n".join(lines)


def print_group(g: SignalGroupDecl) -> str:
    lines = [
        f"SIGNAL_GROUP {g.name} {{",
        f"{INDENT}semantics: {format_name(g.semantics)}",
        f"{INDENT}temperature: {format_number(g.temperature)}",
        f"{INDENT}members: [{', '.join(format_name(m) for m in g.members)}]",
    ]
    if g.default is not None:
        lines.append(f"{INDENT}default: {format_name(g.default)}")
    lines += [f"{INDENT}threshold: {format_number(g.threshold)}", "}"]
    return "\n".join(lines)


def print_test(t: TestDecl) -> str:
    lines = [f"TEST {t.name} {{"]
    lines += [f"{INDENT}{quote(c.query)} -> {c.expected_route}" for c in t.cases]
    lines.append("}")
    return "\n".join(lines)


def print_tree(t: DecisionTreeDecl) -> str:
    lines = [f"DECISION_TREE {t.name} {{"]
    for i, b in enumerate(t.branches):
        head = "IF" if i == 0 else "ELSE IF"
        lines += [
            f"{INDENT}{head} {format_condition(b.condition)} {{",
            f"{INDENT * 2}{format_action(b.action)}",
            f"{INDENT}}}",
        ]
    if t.else_action is not None:
        lines += [f"{INDENT}ELSE {{", f"{INDENT * 2}{format_action(t.else_action)}", f"{INDENT}}}"]
    lines.append("}")
    return "\n".join(lines)


def _target(action: Action) -> str:
    return quote(action.model) if isinstance(action, Model) else format_action(action)


def _union_operands(expr: AlgebraExpr) -> list[AlgebraExpr]:
    if isinstance(expr, ExclusiveUnion):
        return _union_operands(expr.left) + [expr.right]
    return [expr]


def _seq_operands(expr: AlgebraExpr) -> list[AlgebraExpr]:
    if isinstance(expr, Sequential):
        return _seq_operands(expr.left) + [expr.right]
    return [expr]


def format_term(expr: AlgebraExpr) -> str:
    if isinstance(expr, Leaf):
        return f"{format_condition(expr.condition)} -> {_target(expr.action)}"
    if isinstance(expr, DefaultLeaf):
        return f"DEFAULT -> {_target(expr.action)}"
    if isinstance(expr, PolicyRef):
        return expr.name
    return f"({format_algebra(expr)})"


def format_algebra(expr: AlgebraExpr) -> str:
    # left-nested chains flatten; a right operand of the same operator keeps its parens
    if isinstance(expr, Sequential):
        parts = _seq_operands(expr)
        return " >> ".join(
            format_term(p) if not isinstance(p, ExclusiveUnion) else format_algebra(p)
            for p in parts
        )
    if isinstance(expr, ExclusiveUnion):
        return " (+) ".join(format_term(p) for p in _union_operands(expr))
    return format_term(expr)


def print_policy(p: PolicyDecl) -> str:
    expr = p.expr
    lines = [f"POLICY {p.name} {{"]
    if isinstance(expr, ExclusiveUnion):
        ops = _union_operands(expr)
        lines.append(f"{INDENT}{format_term(ops[0])}")
        lines += [f"{INDENT}(+) {format_term(o)}" for o in ops[1:]]
    else:
        lines.append(f"{INDENT}{format_algebra(expr)}")
    lines.append("}")
    return "\n".join(lines)


def print_opaque(o: OpaqueDecl) -> str:
    return "\n".join([f"{o.keyword} {o.name} {{", *_fields(o.config), "}"])


def print_global(g: GlobalDecl) -> str:
    return "\n".join(["GLOBAL {", *_fields(g.config), "}"])


def _layout(program: Program) -> list[tuple[str, int]]:
    counts = {
        "signals": len(program.signals), "routes": len(program.routes),
        "groups": len(program.groups), "tests": len(program.tests),
        "trees": len(program.trees), "policies": len(program.policies),
        "opaque": len(program.opaque), "global": 1 if program.global_config else 0,
    }
    expected = sorted((k, i) for k, n in counts.items() for i in range(n))
    if sorted(program.layout) == expected:
        return list(program.layout)
    order = ["global", "opaque", "signals", "groups", "routes", "trees", "policies", "tests"]
    return [(k, i) for k in order for i in range(counts[k])]


def print_program(program: Program) -> str:
    """Canonical DSL text; blocks in declaration order, blank line between blocks."""
    printers = {
        "signals": lambda i: print_signal(program.signals[i]),
        "routes": lambda i: print_route(program.routes[i]),
        "groups": lambda i: print_group(program.groups[i]),
        "tests": lambda i: print_test(program.tests[i]),
        "trees": lambda i: print_tree(program.trees[i]),
        "policies": lambda i: print_policy(program.policies[i]),
        "opaque": lambda i: print_opaque(program.opaque[i]),
        "global": lambda i: print_global(program.global_config),
    }
    blocks = [printers[k](i) for k, i in _layout(program)]
    return "\n\n".join(blocks) + ("\n" if blocks else "")
