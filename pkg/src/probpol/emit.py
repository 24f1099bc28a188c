"""Flat JSON config: compile a validated Program, decompile a document back.

Conditions are prefix trees ``{"op": "and"|"or"|"not", "args": [...]}`` with
atoms ``{"type": ..., "name": ...}``.  Actions are ``{"kind": "model", ...}``,
``{"kind": "plugin", ...}`` or ``{"kind": "block"}``.  Policy expressions use
``op`` values ``leaf``, ``default``, ``ref``, ``union`` and ``seq``.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from typing import Any

import jsonschema

from .diagnostics import Diagnostic, has_errors
from .nodes import (
    And,
    Atom,
    Block,
    Branch,
    DecisionTreeDecl,
    DefaultLeaf,
    ExclusiveUnion,
    GlobalDecl,
    Leaf,
    Model,
    Not,
    OpaqueDecl,
    Or,
    Plugin,
    PolicyDecl,
    PolicyRef,
    Program,
    RouteDecl,
    Sequential,
    SignalDecl,
    SignalGroupDecl,
    TestCase,
    TestDecl,
)

VERSION = 1


class CompileRefused(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        errors = [d for d in diagnostics if d.severity == "error"]
        super().__init__(f"compile refused: {len(errors)} validation error(s)")
        self.diagnostics = diagnostics


class SchemaViolation(ValueError):
    """Document does not match the config schema; ``pointer`` locates the fault."""

    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer
        self.message = message


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict[str, Any]:
    text = resources.files("probpol.schema").joinpath(name).read_text("utf-8")
    return json.loads(text)


def json_pointer(path) -> str:
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in path)


def validate_json(doc: Any, schema_name: str) -> None:
    validator = jsonschema.Draft202012Validator(load_schema(schema_name))
    err = jsonschema.exceptions.best_match(validator.iter_errors(doc))
    if err is not None:
        raise SchemaViolation(json_pointer(err.absolute_path), err.message)


# -- encoding ---------------------------------------------------------------


def encode_condition(cond) -> dict[str, Any]:
    if isinstance(cond, Atom):
        return {"type": cond.signal_type, "name": cond.name}
    if isinstance(cond, Not):
        return {"op": "not", "args": [encode_condition(cond.operand)]}
    op = "and" if isinstance(cond, And) else "or"
    return {"op": op, "args": [encode_condition(cond.left), encode_condition(cond.right)]}


def encode_action(action) -> dict[str, Any] | None:
    if action is None:
        return None
    if isinstance(action, Model):
        return {"kind": "model", "model": action.model}
    if isinstance(action, Plugin):
        return {"kind": "plugin", "name": action.name, "config": action.config}
    return {"kind": "block"}


def encode_algebra(expr) -> dict[str, Any]:
    if isinstance(expr, Leaf):
        return {"op": "leaf", "condition": encode_condition(expr.condition),
                "action": encode_action(expr.action)}
    if isinstance(expr, DefaultLeaf):
        return {"op": "default", "action": encode_action(expr.action)}
    if isinstance(expr, PolicyRef):
        return {"op": "ref", "name": expr.name}
    op = "union" if isinstance(expr, ExclusiveUnion) else "seq"
    return {"op": op, "args": [encode_algebra(expr.left), encode_algebra(expr.right)]}


def to_doc(program: Program) -> dict[str, Any]:
    """Serialize without validating first; :func:`compile` is the checked entry point.

    Sections beyond the five core arrays are written only when non-empty.
    """
    doc = {
        "version": VERSION,
        "signals": [
            {"name": s.name, "signal_type": s.signal_type, "config": s.config}
            for s in program.signals
        ],
        "routes": [
            {
                "name": r.name,
                "priority": r.priority,
                "tier": r.tier,
                "condition": encode_condition(r.condition),
                "action": encode_action(r.action),
            }
            for r in program.routes
        ],
        "groups": [
            {
                "name": g.name,
                "semantics": g.semantics,
                "temperature": g.temperature,
                "members": list(g.members),
                "default": g.default,
                "threshold": g.threshold,
            }
            for g in program.groups
        ],
        "tests": [
            {"name": t.name,
             "cases": [{"query": c.query, "expected_route": c.expected_route} for c in t.cases]}
            for t in program.tests
        ],
        "decision_trees": [
            {
                "name": t.name,
                "branches": [
                    {"condition": encode_condition(b.condition), "action": encode_action(b.action)}
                    for b in t.branches
                ],
                "else_action": encode_action(t.else_action),
            }
            for t in program.trees
        ],
        "policies": [{"name": p.name, "expr": encode_algebra(p.expr)} for p in program.policies],
        "opaque": [
            {"keyword": o.keyword, "name": o.name, "config": o.config} for o in program.opaque
        ],
        "global": program.global_config.config if program.global_config else None,
    }
    for key in ("decision_trees", "policies", "opaque"):
        if not doc[key]:
            del doc[key]
    if doc["global"] is None:
        del doc["global"]
    return doc


def compile(program: Program) -> dict[str, Any]:  # noqa: A001
    from .validator import validate

    diags = validate(program)
    if has_errors(diags):
        raise CompileRefused(diags)
    return to_doc(program)


def dumps(doc: dict[str, Any]) -> str:
    """Canonical bytes: sorted keys, two-space indent, trailing newline."""
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


# -- decoding ---------------------------------------------------------------


def decode_condition(obj: dict[str, Any]):
    if "op" not in obj:
        return Atom(obj["type"], obj["name"])
    args = [decode_condition(a) for a in obj["args"]]
    if obj["op"] == "not":
        return Not(args[0])
    return And(*args) if obj["op"] == "and" else Or(*args)


def decode_action(obj: dict[str, Any] | None):
    if obj is None:
        return None
    if obj["kind"] == "model":
        return Model(obj["model"])
    if obj["kind"] == "plugin":
        return Plugin(obj["name"], dict(obj.get("config", {})))
    return Block()


def decode_algebra(obj: dict[str, Any]):
    op = obj["op"]
    if op == "leaf":
        return Leaf(decode_condition(obj["condition"]), decode_action(obj["action"]))
    if op == "default":
        return DefaultLeaf(decode_action(obj["action"]))
    if op == "ref":
        return PolicyRef(obj["name"])
    left, right = (decode_algebra(a) for a in obj["args"])
    return ExclusiveUnion(left, right) if op == "union" else Sequential(left, right)


def decompile(doc: Any) -> Program:
    validate_json(doc, "config.v1.json")
    glob = doc.get("global")
    program = Program(
        signals=tuple(SignalDecl(s["name"], s["signal_type"], s["config"]) for s in doc["signals"]),
        routes=tuple(
            RouteDecl(r["name"], r["priority"], decode_condition(r["condition"]),
                      decode_action(r.get("action")), r.get("tier"))
            for r in doc["routes"]
        ),
        groups=tuple(
            SignalGroupDecl(g["name"], g["temperature"], tuple(g["members"]), g.get("default"),
                            g["semantics"], g.get("threshold", 0.5))
            for g in doc["groups"]
        ),
        tests=tuple(
            TestDecl(t["name"], tuple(TestCase(c["query"], c["expected_route"]) for c in t["cases"]))
            for t in doc["tests"]
        ),
        trees=tuple(
            DecisionTreeDecl(
                t["name"],
                tuple(Branch(decode_condition(b["condition"]), decode_action(b["action"]))
                      for b in t["branches"]),
                decode_action(t.get("else_action")),
            )
            for t in doc.get("decision_trees", [])
        ),
        policies=tuple(PolicyDecl(p["name"], decode_algebra(p["expr"]))
                       for p in doc.get("policies", [])),
        opaque=tuple(OpaqueDecl(o["keyword"], o["name"], o["config"]) for o in doc.get("opaque", [])),
        global_config=GlobalDecl(glob) if glob is not None else None,
    )
    return program


def loads(text: str) -> Program:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation("", f"not JSON: {exc}") from exc
    return decompile(doc)
