"""Ordered diagnostic passes over a parsed program.

Pass order: references, signal configuration, category overlap, guards,
groups, tests, tiers, decision trees, policies.  Within a pass diagnostics
are sorted by source position.  When references do not resolve, the passes
that need them are skipped and a PP105 note says so.
"""

from __future__ import annotations

from typing import Callable

from .boolean import UniverseOverflow, program_universe, satisfiable
from .constructs import check_policy, check_tree
from .diagnostics import Diagnostic, Fix, diag, has_errors
from .engine import embedding_dim, signal_centroid
from .geometry import DEFAULT_WARN_COSINE, DegenerateCentroidError, Embedder, centroid_separation_report
from .nodes import (
    CLASSIFIER,
    CRISP,
    And,
    Atom,
    Or,
    Program,
    RouteDecl,
    atoms,
    negated_atom_keys,
    positive_atoms,
    walk_conditions,
)
from .printer import format_condition


def _sorted(diags: list[Diagnostic]) -> list[Diagnostic]:
    return sorted(diags, key=lambda d: (d.span.offset, d.code))


# ---------------------------------------------------------------------------
# references and configuration
# ---------------------------------------------------------------------------


def check_references(program: Program) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    for label, items in (
        ("signal", program.signals), ("route", program.routes), ("group", program.groups),
        ("test", program.tests), ("decision tree", program.trees), ("policy", program.policies),
    ):
        seen: set[str] = set()
        for item in items:
            if item.name in seen:
                out.append(diag("PP102", item.span, f"duplicate {label} '{item.name}'"))
            seen.add(item.name)
    for cond in walk_conditions(program):
        for a in atoms(cond):
            sig = program.signal(a.name)
            if sig is None:
                out.append(diag("PP101", a.span, f"unresolved signal '{a.name}' in {a.signal_type}(...)"))
            elif sig.signal_type != a.signal_type:
                out.append(diag("PP103", a.span,
                                f"'{a.name}' is a {sig.signal_type} signal, referenced as {a.signal_type}"))
    return _sorted(out)


def _string_list(v: object) -> bool:
    return isinstance(v, list) and bool(v) and all(isinstance(x, str) for x in v)


def check_signal_config(program: Program) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    for s in program.signals:
        cfg = s.config
        if s.signal_type == "embedding":
            if not _string_list(cfg.get("candidates")):
                out.append(diag("PP106", s.span,
                                f"embedding signal '{s.name}' needs a non-empty 'candidates' list"))
            t = cfg.get("threshold")
            if isinstance(t, bool) or not isinstance(t, (int, float)) or not 0 < t < 1:
                out.append(diag("PP106", s.span,
                                f"embedding signal '{s.name}' needs 'threshold' in (0, 1)"))
        elif s.signal_type == "domain":
            if not _string_list(cfg.get("mmlu_categories")):
                out.append(diag("PP106", s.span,
                                f"domain signal '{s.name}' needs a non-empty 'mmlu_categories' list"))
        elif s.signal_type == "keyword":
            terms = cfg.get("keywords", cfg.get("terms"))
            if not _string_list(terms):
                out.append(diag("PP106", s.span,
                                f"keyword signal '{s.name}' needs a non-empty 'keywords' list"))
        if s.kind == CLASSIFIER and "threshold" in cfg:
            t = cfg["threshold"]
            if isinstance(t, bool) or not isinstance(t, (int, float)) or not 0 <= t <= 1:
                out.append(diag("PP106", s.span, f"signal '{s.name}' threshold must lie in [0, 1]"))
    try:
        embedding_dim(program)
    except ValueError as exc:
        out.append(diag("PP106", program.global_config.span, str(exc)))
    return out


# ---------------------------------------------------------------------------
# category overlap
# ---------------------------------------------------------------------------


def check_category_overlap(program: Program) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    owner: dict[str, str] = {}
    for s in program.signals:
        if s.signal_type != "domain":
            continue
        cats = s.config.get("mmlu_categories")
        if not isinstance(cats, list):
            continue
        seen_here: set[str] = set()
        for cat in cats:
            if not isinstance(cat, str):
                continue
            if cat in seen_here:
                out.append(diag("PP202", s.span,
                                f"domain('{s.name}') lists category '{cat}' more than once"))
                continue
            seen_here.add(cat)
            prev = owner.get(cat)
            if prev is not None and prev != s.name:
                out.append(diag("PP201", s.span,
                                f"domain('{s.name}') and domain('{prev}') both list category "
                                f"'{cat}'; split or rename it"))
            else:
                owner[cat] = s.name
    return _sorted(out)


# ---------------------------------------------------------------------------
# guards
# ---------------------------------------------------------------------------


def _ranked(routes: tuple[RouteDecl, ...]) -> list[RouteDecl]:
    return [r for _, r in sorted(enumerate(routes), key=lambda p: (-p[1].priority, p[0]))]


def guard_fix(route: RouteDecl, missing: list[Atom]) -> Fix:
    cond = route.condition
    base = format_condition(cond)
    if isinstance(cond, Or):
        base = f"({base})"
    guard = " AND ".join(f'NOT {a.signal_type}("{a.name}")' for a in missing)
    return Fix(cond.span, f"{base} AND {guard}")


def check_guards(program: Program) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    ranked = _ranked(program.routes)
    for i, hi in enumerate(ranked):
        hi_pos = positive_atoms(hi.condition)
        for lo in ranked[i + 1:]:
            lo_pos = positive_atoms(lo.condition)
            overlap = [
                (a, b) for a in hi_pos for b in lo_pos
                if a.signal_type == b.signal_type and a.name != b.name
                and not program.share_group(a.name, b.name)
            ]
            if not overlap:
                continue
            negated = negated_atom_keys(lo.condition)
            missing = [a for a in hi_pos if a.key not in negated]
            if not missing:
                continue
            try:
                universe = program_universe(program, [hi.condition, lo.condition])
                if not satisfiable(And(hi.condition, lo.condition), universe):
                    continue
            except UniverseOverflow:
                pass
            a, b = overlap[0]
            guard = " AND ".join(f'NOT {m.signal_type}("{m.name}")' for m in missing)
            out.append(diag(
                "PP301", lo.span,
                f"routes '{hi.name}' and '{lo.name}' both use {a.signal_type} signals "
                f"('{a.name}', '{b.name}') without a NOT guard; '{lo.name}' can never win "
                f"when both fire. Suggested fix: AND {guard}",
                fix=guard_fix(lo, missing),
            ))
    return _sorted(out)


# ---------------------------------------------------------------------------
# groups
# ---------------------------------------------------------------------------


def check_groups(program: Program, warn_cosine: float = DEFAULT_WARN_COSINE,
                 embedder: Embedder | None = None) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    membership: dict[str, str] = {}
    for g in program.groups:
        k = len(g.members)
        declared = [m for m in g.members if program.signal(m) is not None]
        for m in g.members:
            sig = program.signal(m)
            if sig is None:
                out.append(diag("PP401", g.span, f"SIGNAL_GROUP '{g.name}' names undeclared member '{m}'"))
            elif sig.kind == CRISP:
                out.append(diag("PP408", g.span,
                                f"'{m}' is a crisp {sig.signal_type} signal; softmax groups need "
                                "embedding or classifier members"))
        for name in g.exclusive_names:
            if name in membership and membership[name] != g.name:
                out.append(diag("PP409", g.span,
                                f"'{name}' belongs to groups '{membership[name]}' and '{g.name}'"))
            membership.setdefault(name, g.name)
        owner: dict[str, str] = {}
        for m in declared:
            sig = program.signal(m)
            cats = sig.config.get("mmlu_categories", [])
            for cat in cats if isinstance(cats, list) else []:
                if cat in owner and owner[cat] != m:
                    out.append(diag("PP402", g.span,
                                    f"members '{owner[cat]}' and '{m}' of SIGNAL_GROUP '{g.name}' "
                                    f"share category '{cat}'"))
                owner.setdefault(cat, m)
        if g.default is None:
            out.append(diag("PP403", g.span, f"SIGNAL_GROUP '{g.name}' has no default signal"))
        elif program.signal(g.default) is None:
            out.append(diag("PP403", g.span,
                            f"default '{g.default}' of SIGNAL_GROUP '{g.name}' is not a declared signal"))
        if g.temperature <= 0:
            out.append(diag("PP404", g.span,
                            f"SIGNAL_GROUP '{g.name}' temperature must be positive, got {g.temperature}"))
        if g.threshold <= 1.0 / k:
            out.append(diag("PP405", g.span,
                            f"group threshold {g.threshold} <= 1/{k}: more than one member of "
                            f"'{g.name}' can fire"))
        elif g.threshold < 0.5:
            out.append(diag("PP407", g.span,
                            f"group threshold {g.threshold} is above 1/{k} but below 1/2: two members "
                            f"of '{g.name}' can still both exceed it at finite temperature"))
        usable = [m for m in declared if program.signal(m).kind != CRISP]
        if len(usable) >= 2:
            embedder = embedder or Embedder(_safe_dim(program))
            try:
                cents = [signal_centroid(program.signal(m), embedder) for m in usable]
            except (DegenerateCentroidError, ValueError):
                continue
            for i, j, c in centroid_separation_report(cents, warn_cosine):
                out.append(diag("PP406", g.span,
                                f"centroids of '{usable[i]}' and '{usable[j]}' in '{g.name}' have "
                                f"cosine {c:.3f} >= {warn_cosine}; the partition boundary is ambiguous"))
    return _sorted(out)


def _safe_dim(program: Program) -> int:
    try:
        return embedding_dim(program)
    except ValueError:
        return 64


# ---------------------------------------------------------------------------
# tests and tiers
# ---------------------------------------------------------------------------


def check_tests(program: Program) -> list[Diagnostic]:
    from .constructs import compile_tree, root_policies

    known = {r.name for r in program.routes}
    for t in program.trees:
        known |= {r.name for r in compile_tree(t)}
    known |= {p.name for p in root_policies(program)}
    out: list[Diagnostic] = []
    for t in program.tests:
        for c in t.cases:
            if c.expected_route not in known and not _policy_route(program, c.expected_route):
                out.append(diag("PP501", c.span,
                                f"TEST '{t.name}' expects unknown route '{c.expected_route}'"))
            if not c.query.strip():
                out.append(diag("PP502", c.span, f"TEST '{t.name}' has an empty query"))
    return _sorted(out)


def _policy_route(program: Program, name: str) -> bool:
    head, _, idx = name.rpartition("_")
    return idx.isdigit() and program.policy(head) is not None


def check_tiers(program: Program) -> list[Diagnostic]:
    tiered = [r for r in program.routes if r.tier is not None]
    if not tiered:
        return []
    untiered = [r for r in program.routes if r.tier is None]
    if untiered:
        names = ", ".join(r.name for r in untiered)
        return [diag("PP601", untiered[0].span,
                     f"routes {names} have no TIER while others do; tiers are all-or-none")]
    tiers: dict[int, list[str]] = {}
    for r in tiered:
        tiers.setdefault(r.tier, []).append(r.name)
    text = "; ".join(f"tier {t}: {', '.join(n)}" for t, n in sorted(tiers.items()))
    return [diag("PP602", tiered[0].span, text)]


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def check_trees(program: Program) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    for t in program.trees:
        out += check_tree(t, program)
    return out


def check_policies(program: Program) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    for p in program.policies:
        out += check_policy(p, program)
    return _sorted(out)


Pass = Callable[[Program], list[Diagnostic]]

RESOLUTION_PASSES: list[tuple[str, Pass]] = [
    ("references", check_references),
    ("signal configuration", check_signal_config),
]
DEPENDENT_PASSES: list[tuple[str, Pass]] = [
    ("category overlap", check_category_overlap),
    ("guards", check_guards),
    ("groups", check_groups),
    ("tests", check_tests),
    ("tiers", check_tiers),
    ("decision trees", check_trees),
    ("policies", check_policies),
]
# passes that still run when references fail
_REFERENCE_FREE = {"category overlap", "tests", "tiers"}


def validate(program: Program) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    for _, p in RESOLUTION_PASSES:
        out += p(program)
    broken = any(d.code in ("PP101", "PP103", "PP102") for d in out)
    broken_config = any(d.code == "PP106" for d in out)
    skipped = []
    for name, p in DEPENDENT_PASSES:
        needs_refs = name not in _REFERENCE_FREE
        if (broken and needs_refs) or (broken_config and name in ("groups", "policies")):
            skipped.append(name)
            continue
        out += p(program)
    if skipped:
        out.append(diag("PP105", program.span,
                        f"skipped passes due to unresolved references or invalid signals: "
                        f"{', '.join(skipped)}"))
    return out


def error_free(program: Program) -> bool:
    return not has_errors(validate(program))
