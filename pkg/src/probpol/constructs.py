"""Conflict freedom by construction: decision trees and the exclusive-union algebra."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

from .boolean import UniverseOverflow, build_universe, program_universe, satisfiable
from .diagnostics import Diagnostic, diag
from .geometry import Embedder, SphericalCap, caps_intersect
from .nodes import (
    GEOMETRIC,
    KIND_RANK,
    Action,
    AlgebraExpr,
    And,
    Condition,
    DecisionTreeDecl,
    DefaultLeaf,
    ExclusiveUnion,
    Leaf,
    Not,
    PolicyDecl,
    PolicyRef,
    Program,
    RouteDecl,
    Sequential,
    Span,
    atoms,
    conjoin,
    disjoin,
)

PRIORITY_STEP = 10

# ---------------------------------------------------------------------------
# Decision trees
# ---------------------------------------------------------------------------


def branch_conditions(tree: DecisionTreeDecl) -> list[Condition]:
    """Branch i guarded by the negation of every earlier branch."""
    out = []
    for i, b in enumerate(tree.branches):
        out.append(conjoin([b.condition] + [Not(p.condition) for p in tree.branches[:i]]))
    return out


def else_condition(tree: DecisionTreeDecl) -> Condition:
    return conjoin([Not(b.condition) for b in tree.branches])


def check_tree(tree: DecisionTreeDecl, program: Program) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    if tree.else_action is None:
        out.append(diag("PP701", tree.span,
                        f"DECISION_TREE '{tree.name}' has no ELSE branch; a catch-all is required"))
    universe = program_universe(program, [b.condition for b in tree.branches])
    for i, (b, cond) in enumerate(zip(tree.branches, branch_conditions(tree))):
        try:
            reachable = satisfiable(cond, universe)
        except UniverseOverflow as exc:
            out.append(diag("PP901", tree.span,
                            f"reachability of DECISION_TREE '{tree.name}' not checked: {exc}"))
            break
        if not reachable:
            out.append(diag("PP702", b.span,
                            f"branch {i + 1} of DECISION_TREE '{tree.name}' is unreachable: "
                            "earlier branches cover its condition"))
    return out


def compile_tree(tree: DecisionTreeDecl) -> list[RouteDecl]:
    n = len(tree.branches)
    routes = [
        RouteDecl(f"{tree.name}_{i + 1}", (n - i) * PRIORITY_STEP, cond, b.action, span=b.span)
        for i, (b, cond) in enumerate(zip(tree.branches, branch_conditions(tree)))
    ]
    if tree.else_action is not None:
        routes.append(RouteDecl(f"{tree.name}_else", 0, else_condition(tree), tree.else_action,
                                span=tree.span))
    return routes


def walk_tree(tree: DecisionTreeDecl, fired: frozenset[str] | set[str]) -> Action | None:
    from .engine import holds

    for b in tree.branches:
        if holds(b.condition, fired):
            return b.action
    return tree.else_action


# ---------------------------------------------------------------------------
# Policy algebra
# ---------------------------------------------------------------------------

SAT_UNSAT = "sat_unsat"
CAPS_DISJOINT = "caps_disjoint"
GROUP_EXCLUSIVE = "group_exclusive"
METHOD_RANK = {SAT_UNSAT: 0, CAPS_DISJOINT: 1, GROUP_EXCLUSIVE: 2}


class PolicyError(Exception):
    def __init__(self, code: str, span: Span, message: str):
        super().__init__(message)
        self.diagnostic = diag(code, span, message)


class PolicyTypeError(PolicyError):
    """An exclusive union whose operands cannot be proven disjoint (PP801)."""

    def __init__(self, span: Span, message: str):
        super().__init__("PP801", span, message)


@dataclass(frozen=True)
class EffectiveLeaf:
    condition: Condition
    action: Action
    span: Span = field(default=Span(), compare=False)


@dataclass(frozen=True)
class DisjointnessCertificate:
    method: str
    details: dict[str, Any] = field(default_factory=dict)
    pairs: tuple[DisjointnessCertificate, ...] = ()


def resolve(expr: AlgebraExpr, program: Program, stack: tuple[str, ...] = ()) -> AlgebraExpr:
    """Inline policy references; rejects unknown names and cycles."""
    if isinstance(expr, PolicyRef):
        if expr.name in stack:
            raise PolicyError("PP802", expr.span,
                              f"policy '{expr.name}' refers to itself via {' -> '.join(stack)}")
        target = program.policy(expr.name)
        if target is None:
            raise PolicyError("PP104", expr.span, f"unresolved policy reference '{expr.name}'")
        return resolve(target.expr, program, stack + (expr.name,))
    if isinstance(expr, (ExclusiveUnion, Sequential)):
        return replace(expr, left=resolve(expr.left, program, stack),
                       right=resolve(expr.right, program, stack))
    return expr


def union_operands(expr: AlgebraExpr) -> list[AlgebraExpr]:
    if isinstance(expr, ExclusiveUnion):
        return union_operands(expr.left) + union_operands(expr.right)
    return [expr]


def effective_leaves(expr: AlgebraExpr) -> list[EffectiveLeaf]:
    """Leaves in declaration order; DEFAULT operands become the negated disjunction of siblings."""
    if isinstance(expr, Leaf):
        return [EffectiveLeaf(expr.condition, expr.action, expr.span)]
    if isinstance(expr, DefaultLeaf):
        raise PolicyTypeError(expr.span, "DEFAULT is only meaningful as an exclusive-union operand")
    if isinstance(expr, Sequential):
        return effective_leaves(expr.left) + effective_leaves(expr.right)
    if isinstance(expr, PolicyRef):
        raise PolicyError("PP104", expr.span, f"unresolved policy reference '{expr.name}'")
    return [leaf for group in _union_leaf_groups(expr) for leaf in group]


def _union_leaf_groups(expr: ExclusiveUnion) -> list[list[EffectiveLeaf]]:
    ops = union_operands(expr)
    groups: list[list[EffectiveLeaf] | None] = [
        None if isinstance(o, DefaultLeaf) else effective_leaves(o) for o in ops
    ]
    sibling_conds = [leaf.condition for g in groups if g for leaf in g]
    for i, o in enumerate(ops):
        if isinstance(o, DefaultLeaf):
            if not sibling_conds:
                raise PolicyTypeError(o.span, "DEFAULT needs at least one non-default sibling")
            groups[i] = [EffectiveLeaf(Not(disjoin(sibling_conds)), o.action, o.span)]
    return [g for g in groups if g is not None]


def _geometric_exclusions(conds: list[Condition], program: Program,
                          embedder: Embedder) -> tuple[list[tuple[str, str]], list[dict[str, Any]]]:
    from .engine import signal_centroid, signal_threshold

    names = []
    for c in conds:
        for a in atoms(c):
            if a.name not in names:
                names.append(a.name)
    caps = {}
    for n in names:
        sig = program.signal(n)
        caps[n] = SphericalCap(signal_centroid(sig, embedder), signal_threshold(sig))
    pairs, evidence = [], []
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            rel = caps_intersect(caps[a], caps[b])
            if not rel.intersect:
                pairs.append((a, b))
                evidence.append({"signals": [a, b], "margin": rel.margin})
    return pairs, evidence


def certify_pair(x: Condition, y: Condition, program: Program,
                 embedder: Embedder | None = None) -> DisjointnessCertificate | None:
    both = And(x, y)
    if not satisfiable(both, build_universe([x, y])):
        return DisjointnessCertificate(SAT_UNSAT, {"reason": "conjunction is propositionally unsatisfiable"})
    if not satisfiable(both, program_universe(program, [x, y])):
        names = {a.name for a in atoms(both)}
        used = [g.name for g in program.groups if len(names & set(g.exclusive_names)) >= 2]
        return DisjointnessCertificate(GROUP_EXCLUSIVE, {"groups": used})
    kinds = {a.kind for a in atoms(both)}
    if kinds == {GEOMETRIC}:
        from .engine import embedding_dim

        embedder = embedder or Embedder(embedding_dim(program))
        pairs, evidence = _geometric_exclusions([x, y], program, embedder)
        if pairs and not satisfiable(both, program_universe(program, [x, y], extra=pairs)):
            return DisjointnessCertificate(CAPS_DISJOINT, {"caps": evidence})
    return None


def certify_disjoint(xs: list[EffectiveLeaf], ys: list[EffectiveLeaf], program: Program,
                     embedder: Embedder | None = None) -> DisjointnessCertificate:
    """Certify that no query fires a leaf of ``xs`` and a leaf of ``ys`` together."""
    from .printer import format_condition

    certs = []
    for lx in xs:
        for ly in ys:
            cert = certify_pair(lx.condition, ly.condition, program, embedder)
            if cert is None:
                kinds = sorted({a.kind for a in atoms(And(lx.condition, ly.condition))},
                               key=KIND_RANK.get)
                raise PolicyTypeError(
                    ly.span,
                    f"cannot certify disjointness of '{format_condition(lx.condition)}' and "
                    f"'{format_condition(ly.condition)}' (atom kinds: {', '.join(kinds)})",
                )
            certs.append(cert)
    method = max((c.method for c in certs), key=METHOD_RANK.get, default=SAT_UNSAT)
    return DisjointnessCertificate(method, {"leaf_pairs": len(certs)}, tuple(certs))


def certify_expr(expr: AlgebraExpr, program: Program,
                 embedder: Embedder | None = None) -> list[DisjointnessCertificate]:
    """Certify every exclusive union inside an already-resolved expression."""
    out: list[DisjointnessCertificate] = []
    if isinstance(expr, Sequential):
        out += certify_expr(expr.left, program, embedder)
        out += certify_expr(expr.right, program, embedder)
    elif isinstance(expr, ExclusiveUnion):
        ops = union_operands(expr)
        groups = _union_leaf_groups(expr)
        for op in ops:
            if isinstance(op, (Sequential, ExclusiveUnion)):
                out += certify_expr(op, program, embedder)
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                out.append(certify_disjoint(groups[i], groups[j], program, embedder))
    elif isinstance(expr, DefaultLeaf):
        effective_leaves(expr)
    return out


def check_policy(policy: PolicyDecl, program: Program,
                 embedder: Embedder | None = None) -> list[Diagnostic]:
    try:
        expr = resolve(policy.expr, program, (policy.name,))
        certify_expr(expr, program, embedder)
    except UniverseOverflow as exc:
        return [diag("PP901", policy.span, f"POLICY '{policy.name}' not certified: {exc}")]
    except PolicyError as exc:
        return [exc.diagnostic]
    return []


def compile_algebra(expr: AlgebraExpr, program: Program, name: str = "policy",
                    embedder: Embedder | None = None) -> list[RouteDecl]:
    """Leaves become routes with strictly decreasing priorities in evaluation order."""
    expr = resolve(expr, program, (name,))
    certify_expr(expr, program, embedder)
    leaves = effective_leaves(expr)
    n = len(leaves)
    return [
        RouteDecl(f"{name}_{i + 1}", (n - i) * PRIORITY_STEP, leaf.condition, leaf.action,
                  span=leaf.span)
        for i, leaf in enumerate(leaves)
    ]


def root_policies(program: Program) -> list[PolicyDecl]:
    referenced: set[str] = set()

    def refs(e: AlgebraExpr) -> None:
        if isinstance(e, PolicyRef):
            referenced.add(e.name)
        elif isinstance(e, (ExclusiveUnion, Sequential)):
            refs(e.left)
            refs(e.right)

    for p in program.policies:
        refs(p.expr)
    return [p for p in program.policies if p.name not in referenced]


def lower(program: Program, embedder: Embedder | None = None) -> Program:
    """Replace trees and root policies by their compiled routes."""
    routes = list(program.routes)
    for tree in program.trees:
        routes += compile_tree(tree)
    for p in root_policies(program):
        routes += compile_algebra(p.expr, program, p.name, embedder)
    names = [r.name for r in routes]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ValueError(f"compiled route names collide with declared routes: {dupes}")
    return replace(program, routes=tuple(routes), trees=(), policies=(), layout=())
