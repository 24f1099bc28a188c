"""Typed AST for the routing-policy DSL.

Every node carries a :class:`Span`.  Spans are excluded from equality, so
``==`` on two programs compares semantic content only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator, Union

SIGNAL_TYPES = (
    "keyword",
    "embedding",
    "domain",
    "complexity",
    "jailbreak",
    "pii",
    "authz",
    "context",
)

# Decidability kind of each signal type.
CRISP = "crisp"
GEOMETRIC = "geometric"
CLASSIFIER = "classifier"

SIGNAL_KINDS = {
    "keyword": CRISP,
    "authz": CRISP,
    "context": CRISP,
    "embedding": GEOMETRIC,
    "domain": CLASSIFIER,
    "complexity": CLASSIFIER,
    "jailbreak": CLASSIFIER,
    "pii": CLASSIFIER,
}

KIND_RANK = {CRISP: 0, GEOMETRIC: 1, CLASSIFIER: 2}


@dataclass(frozen=True)
class Span:
    file: str = "<input>"
    line: int = 1
    column: int = 1
    offset: int = 0
    length: int = 0

    @property
    def end(self) -> int:
        return self.offset + self.length

    def contains(self, other: Span) -> bool:
        return self.offset <= other.offset and other.end <= self.end

    def cover(self, other: Span) -> Span:
        """Smallest span starting at ``self`` and reaching the end of ``other``."""
        return Span(self.file, self.line, self.column, self.offset, other.end - self.offset)


NOSPAN = Span()


def _span() -> Any:
    return field(default=NOSPAN, compare=False, repr=False)


# ---------------------------------------------------------------------------
# Conditions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    signal_type: str
    name: str
    span: Span = _span()

    @property
    def key(self) -> tuple[str, str]:
        return (self.signal_type, self.name)

    @property
    def kind(self) -> str:
        return SIGNAL_KINDS[self.signal_type]


@dataclass(frozen=True)
class Not:
    operand: Condition
    span: Span = _span()


@dataclass(frozen=True)
class And:
    left: Condition
    right: Condition
    span: Span = _span()


@dataclass(frozen=True)
class Or:
    left: Condition
    right: Condition
    span: Span = _span()


Condition = Union[Atom, Not, And, Or]


def atoms(cond: Condition) -> Iterator[Atom]:
    """Yield every atom occurrence, left to right."""
    if isinstance(cond, Atom):
        yield cond
    elif isinstance(cond, Not):
        yield from atoms(cond.operand)
    else:
        yield from atoms(cond.left)
        yield from atoms(cond.right)


def literals(cond: Condition, positive: bool = True) -> Iterator[tuple[Atom, bool]]:
    """Yield ``(atom, polarity)`` pairs; polarity flips under each NOT."""
    if isinstance(cond, Atom):
        yield cond, positive
    elif isinstance(cond, Not):
        yield from literals(cond.operand, not positive)
    else:
        yield from literals(cond.left, positive)
        yield from literals(cond.right, positive)


def positive_atoms(cond: Condition) -> list[Atom]:
    seen: dict[tuple[str, str], Atom] = {}
    for atom, pol in literals(cond):
        if pol:
            seen.setdefault(atom.key, atom)
    return list(seen.values())


def negated_atom_keys(cond: Condition) -> set[tuple[str, str]]:
    """Keys of atoms that appear directly under a NOT somewhere in ``cond``."""
    out: set[tuple[str, str]] = set()
    stack: list[Condition] = [cond]
    while stack:
        node = stack.pop()
        if isinstance(node, Not):
            if isinstance(node.operand, Atom):
                out.add(node.operand.key)
            stack.append(node.operand)
        elif isinstance(node, (And, Or)):
            stack.extend((node.left, node.right))
    return out


def conjoin(conds: list[Condition]) -> Condition:
    out = conds[0]
    for c in conds[1:]:
        out = And(out, c)
    return out


def disjoin(conds: list[Condition]) -> Condition:
    out = conds[0]
    for c in conds[1:]:
        out = Or(out, c)
    return out


# ---------------------------------------------------------------------------
# Actions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Model:
    model: str
    span: Span = _span()


@dataclass(frozen=True)
class Plugin:
    name: str
    config: dict[str, Any] = field(default_factory=dict)
    span: Span = _span()


@dataclass(frozen=True)
class Block:
    span: Span = _span()


Action = Union[Model, Plugin, Block]


def describe_action(action: Action | None) -> str:
    if action is None:
        return "<none>"
    if isinstance(action, Model):
        return f'MODEL "{action.model}"'
    if isinstance(action, Plugin):
        return f"PLUGIN {action.name}"
    return "BLOCK"


# ---------------------------------------------------------------------------
# Blocks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SignalDecl:
    name: str
    signal_type: str
    config: dict[str, Any] = field(default_factory=dict)
    span: Span = _span()

    @property
    def kind(self) -> str:
        return SIGNAL_KINDS[self.signal_type]


@dataclass(frozen=True)
class RouteDecl:
    name: str
    priority: int
    condition: Condition
    action: Action | None = None
    tier: int | None = None
    span: Span = _span()


@dataclass(frozen=True)
class SignalGroupDecl:
    name: str
    temperature: float
    members: tuple[str, ...]
    default: str | None = None
    semantics: str = "softmax_exclusive"
    threshold: float = 0.5
    span: Span = _span()

    @property
    def exclusive_names(self) -> tuple[str, ...]:
        """Members plus the default: at most one of these is ever active."""
        if self.default and self.default not in self.members:
            return self.members + (self.default,)
        return self.members


@dataclass(frozen=True)
class TestCase:
    query: str
    expected_route: str
    span: Span = _span()


@dataclass(frozen=True)
class TestDecl:
    name: str
    cases: tuple[TestCase, ...]
    span: Span = _span()

    __test__ = False


@dataclass(frozen=True)
class Branch:
    condition: Condition
    action: Action
    span: Span = _span()


@dataclass(frozen=True)
class DecisionTreeDecl:
    name: str
    branches: tuple[Branch, ...]
    else_action: Action | None = None
    span: Span = _span()


# Policy algebra ------------------------------------------------------------


@dataclass(frozen=True)
class Leaf:
    condition: Condition
    action: Action
    span: Span = _span()


@dataclass(frozen=True)
class DefaultLeaf:
    """Catch-all operand of an exclusive union: fires when no sibling does."""

    action: Action
    span: Span = _span()


@dataclass(frozen=True)
class PolicyRef:
    name: str
    span: Span = _span()


@dataclass(frozen=True)
class ExclusiveUnion:
    left: AlgebraExpr
    right: AlgebraExpr
    span: Span = _span()


@dataclass(frozen=True)
class Sequential:
    left: AlgebraExpr
    right: AlgebraExpr
    span: Span = _span()


AlgebraExpr = Union[Leaf, DefaultLeaf, PolicyRef, ExclusiveUnion, Sequential]


@dataclass(frozen=True)
class PolicyDecl:
    name: str
    expr: AlgebraExpr
    span: Span = _span()


@dataclass(frozen=True)
class OpaqueDecl:
    """BACKEND / PLUGIN blocks: config passed through untouched."""

    keyword: str
    name: str
    config: dict[str, Any] = field(default_factory=dict)
    span: Span = _span()


@dataclass(frozen=True)
class GlobalDecl:
    config: dict[str, Any] = field(default_factory=dict)
    span: Span = _span()


# ---------------------------------------------------------------------------
# Program
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Program:
    signals: tuple[SignalDecl, ...] = ()
    routes: tuple[RouteDecl, ...] = ()
    groups: tuple[SignalGroupDecl, ...] = ()
    tests: tuple[TestDecl, ...] = ()
    trees: tuple[DecisionTreeDecl, ...] = ()
    policies: tuple[PolicyDecl, ...] = ()
    opaque: tuple[OpaqueDecl, ...] = ()
    global_config: GlobalDecl | None = None
    # Source order of blocks as (collection, index); printing only.
    layout: tuple[tuple[str, int], ...] = field(default=(), compare=False, repr=False)
    span: Span = _span()

    def signal(self, name: str) -> SignalDecl | None:
        for s in self.signals:
            if s.name == name:
                return s
        return None

    def route_named(self, name: str) -> RouteDecl | None:
        for r in self.routes:
            if r.name == name:
                return r
        return None

    def policy(self, name: str) -> PolicyDecl | None:
        for p in self.policies:
            if p.name == name:
                return p
        return None

    def group_of(self, signal_name: str) -> SignalGroupDecl | None:
        for g in self.groups:
            if signal_name in g.exclusive_names:
                return g
        return None

    def share_group(self, a: str, b: str) -> bool:
        return any(a in g.exclusive_names and b in g.exclusive_names for g in self.groups)

    @property
    def globals(self) -> dict[str, Any]:
        return self.global_config.config if self.global_config else {}


def equivalent(a: Program, b: Program) -> bool:
    """True iff the programs agree on everything except spans and layout."""
    return a == b


def walk_conditions(program: Program) -> Iterator[Condition]:
    for r in program.routes:
        yield r.condition
    for t in program.trees:
        for b in t.branches:
            yield b.condition
    for p in program.policies:
        yield from _algebra_conditions(p.expr)


def _algebra_conditions(expr: AlgebraExpr) -> Iterator[Condition]:
    if isinstance(expr, Leaf):
        yield expr.condition
    elif isinstance(expr, (ExclusiveUnion, Sequential)):
        yield from _algebra_conditions(expr.left)
        yield from _algebra_conditions(expr.right)
