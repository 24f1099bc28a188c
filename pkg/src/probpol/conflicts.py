"""Six-way conflict analysis, dispatched by atom kind.

=====================  =============================  ==============
kind                   decided by                     tier
=====================  =============================  ==============
Contradiction          enumeration (UNSAT)            crisp
Shadowing              enumeration (implication)      crisp
Redundancy             enumeration (equivalence)      crisp
ProbableConflict       spherical cap intersection     geometric
SoftShadowing          corpus estimate                by atom kinds
CalibrationSuspect     nothing; listed for TEST work  distributional
=====================  =============================  ==============
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any, Iterable, Sequence, Union

from .boolean import UniverseOverflow, build_universe, equivalent_cond, implies, program_universe, satisfiable
from .engine import (
    INDEPENDENT,
    embedding_dim,
    precedes,
    signal_centroid,
    signal_threshold,
    simulate,
)
from .geometry import Embedder, SphericalCap, caps_intersect
from .nodes import (
    CLASSIFIER,
    CRISP,
    GEOMETRIC,
    KIND_RANK,
    And,
    Program,
    RouteDecl,
    atoms,
    positive_atoms,
)

CONTRADICTION = "Contradiction"
SHADOWING = "Shadowing"
REDUNDANCY = "Redundancy"
PROBABLE_CONFLICT = "ProbableConflict"
SOFT_SHADOWING = "SoftShadowing"
CALIBRATION_SUSPECT = "CalibrationSuspect"
ANALYSIS_INCOMPLETE = "AnalysisIncomplete"

TAXONOMY = (
    CONTRADICTION,
    SHADOWING,
    REDUNDANCY,
    PROBABLE_CONFLICT,
    SOFT_SHADOWING,
    CALIBRATION_SUSPECT,
    ANALYSIS_INCOMPLETE,
)

TIER_CRISP = "crisp"
TIER_GEOMETRIC = "geometric"
TIER_DISTRIBUTIONAL = "distributional"
_TIER_OF_KIND = {CRISP: TIER_CRISP, GEOMETRIC: TIER_GEOMETRIC, CLASSIFIER: TIER_DISTRIBUTIONAL}

MIN_CO_FIRES = 5
MIN_INVERSION_RATE = 0.2


@dataclass(frozen=True)
class UnsatEvidence:
    atoms: int
    assignments_checked: int
    opaque_classifier_atoms: tuple[str, ...] = ()


@dataclass(frozen=True)
class ImplicationEvidence:
    direction: str  # "lower => higher" or "equivalent"
    opaque_classifier_atoms: tuple[str, ...] = ()


@dataclass(frozen=True)
class CapEvidence:
    signals: tuple[str, str]
    separation: float
    radius_sum: float
    margin: float


@dataclass(frozen=True)
class CorpusEvidence:
    co_fire_rate: float
    inversion_rate: float
    n: int
    co_fires: int


@dataclass(frozen=True)
class BoundaryEvidence:
    signals: tuple[str, str]
    signal_type: str
    hint: str


@dataclass(frozen=True)
class IncompleteEvidence:
    reason: str


Evidence = Union[UnsatEvidence, ImplicationEvidence, CapEvidence, CorpusEvidence,
                 BoundaryEvidence, IncompleteEvidence]

EVIDENCE_FOR = {
    CONTRADICTION: UnsatEvidence,
    SHADOWING: ImplicationEvidence,
    REDUNDANCY: ImplicationEvidence,
    PROBABLE_CONFLICT: CapEvidence,
    SOFT_SHADOWING: CorpusEvidence,
    CALIBRATION_SUSPECT: BoundaryEvidence,
    ANALYSIS_INCOMPLETE: IncompleteEvidence,
}


@dataclass(frozen=True)
class ConflictReport:
    kind: str
    routes: tuple[str, ...]  # (higher, lower), a single route, or empty
    evidence: Evidence
    tier: str

    def __post_init__(self) -> None:
        if not isinstance(self.evidence, EVIDENCE_FOR[self.kind]):
            raise TypeError(f"{self.kind} cannot carry {type(self.evidence).__name__}")

    @property
    def taxonomy_type(self) -> int | None:
        idx = TAXONOMY.index(self.kind) + 1
        return idx if idx <= 6 else None

    def to_json(self) -> dict[str, Any]:
        ev = asdict(self.evidence)
        return {
            "kind": self.kind,
            "type": self.taxonomy_type,
            "routes": list(self.routes),
            "tier": self.tier,
            "evidence": {k: list(v) if isinstance(v, tuple) else v for k, v in ev.items()},
        }


def _opaque(*conds) -> tuple[str, ...]:
    names = []
    for c in conds:
        for a in atoms(c):
            if a.kind == CLASSIFIER and a.name not in names:
                names.append(a.name)
    return tuple(names)


def _ordered_pairs(program: Program) -> list[tuple[RouteDecl, RouteDecl]]:
    """(higher, lower) route pairs with strict precedence and different actions."""
    routes = program.routes
    out = []
    for i, a in enumerate(routes):
        for b in routes[i + 1:]:
            if a.action == b.action:
                continue
            if precedes(a, b):
                out.append((a, b))
            elif precedes(b, a):
                out.append((b, a))
    return out


def analyze_structural(program: Program) -> list[ConflictReport]:
    out: list[ConflictReport] = []
    dead: set[str] = set()
    for r in program.routes:
        try:
            u = program_universe(program, [r.condition])
            if not satisfiable(r.condition, u):
                dead.add(r.name)
                n = len(u.atoms)
                out.append(ConflictReport(
                    CONTRADICTION, (r.name,),
                    UnsatEvidence(n, 1 << n, _opaque(r.condition)), TIER_CRISP,
                ))
        except UniverseOverflow as exc:
            out.append(ConflictReport(ANALYSIS_INCOMPLETE, (r.name,),
                                      IncompleteEvidence(str(exc)), TIER_CRISP))
    for hi, lo in _ordered_pairs(program):
        if hi.name in dead or lo.name in dead:
            continue
        try:
            u = program_universe(program, [hi.condition, lo.condition])
            opaque = _opaque(hi.condition, lo.condition)
            if equivalent_cond(hi.condition, lo.condition, u):
                out.append(ConflictReport(REDUNDANCY, (hi.name, lo.name),
                                          ImplicationEvidence("equivalent", opaque), TIER_CRISP))
            elif implies(lo.condition, hi.condition, u):
                out.append(ConflictReport(SHADOWING, (hi.name, lo.name),
                                          ImplicationEvidence("lower => higher", opaque), TIER_CRISP))
        except UniverseOverflow as exc:
            out.append(ConflictReport(ANALYSIS_INCOMPLETE, (hi.name, lo.name),
                                      IncompleteEvidence(str(exc)), TIER_CRISP))
    return out


def analyze_geometric(program: Program, embedder: Embedder | None = None) -> list[ConflictReport]:
    embedder = embedder or Embedder(embedding_dim(program))
    caps: dict[str, SphericalCap] = {}

    def cap(name: str) -> SphericalCap:
        if name not in caps:
            sig = program.signal(name)
            caps[name] = SphericalCap(signal_centroid(sig, embedder), signal_threshold(sig))
        return caps[name]

    out: list[ConflictReport] = []
    for hi, lo in _ordered_pairs(program):
        # structurally exclusive routes cannot co-fire whatever the geometry
        try:
            u = program_universe(program, [hi.condition, lo.condition])
            if not satisfiable(And(hi.condition, lo.condition), u):
                continue
        except UniverseOverflow:
            pass
        hi_emb = [a for a in positive_atoms(hi.condition) if a.kind == GEOMETRIC]
        lo_emb = [a for a in positive_atoms(lo.condition) if a.kind == GEOMETRIC]
        seen: set[tuple[str, str]] = set()
        for a in hi_emb:
            for b in lo_emb:
                if a.name == b.name or program.share_group(a.name, b.name):
                    continue
                if (a.name, b.name) in seen:
                    continue
                seen.add((a.name, b.name))
                rel = caps_intersect(cap(a.name), cap(b.name))
                if rel.intersect:
                    out.append(ConflictReport(
                        PROBABLE_CONFLICT, (hi.name, lo.name),
                        CapEvidence((a.name, b.name), rel.separation, rel.radius_sum, rel.margin),
                        TIER_GEOMETRIC,
                    ))
    return out


def _tier_for(*conds) -> str:
    kinds = {a.kind for c in conds for a in atoms(c)} or {CRISP}
    return _TIER_OF_KIND[max(kinds, key=KIND_RANK.get)]


def analyze_soft_shadowing(
    program: Program,
    corpus: Sequence[str],
    min_co_fires: int = MIN_CO_FIRES,
    min_inversion_rate: float = MIN_INVERSION_RATE,
    **router_kw: Any,
) -> list[ConflictReport]:
    corpus = list(corpus)
    if not corpus:
        raise ValueError("soft-shadowing analysis needs a non-empty corpus")
    summary = simulate(program, corpus, mode=INDEPENDENT, **router_kw)
    by_name = {r.name: r for r in program.routes}
    out: list[ConflictReport] = []
    for hi, lo in _ordered_pairs(program):
        stat = summary.route_pairs.get((hi.name, lo.name))
        if stat is None or stat.count < min_co_fires:
            continue
        rate = stat.inversions / stat.count
        if rate >= min_inversion_rate:
            out.append(ConflictReport(
                SOFT_SHADOWING, (hi.name, lo.name),
                CorpusEvidence(stat.count / summary.n, rate, summary.n, stat.count),
                _tier_for(by_name[hi.name].condition, by_name[lo.name].condition),
            ))
    return out


def analyze_calibration(program: Program) -> list[ConflictReport]:
    out: list[ConflictReport] = []
    classifiers = [s for s in program.signals if s.kind == CLASSIFIER]
    for i, a in enumerate(classifiers):
        for b in classifiers[i + 1:]:
            if a.signal_type != b.signal_type or program.share_group(a.name, b.name):
                continue
            out.append(ConflictReport(
                CALIBRATION_SUSPECT, (),
                BoundaryEvidence(
                    (a.name, b.name), a.signal_type,
                    "co-activation near the category boundary cannot be decided statically; "
                    "add TEST cases for boundary queries or put both in a SIGNAL_GROUP",
                ),
                TIER_DISTRIBUTIONAL,
            ))
    return out


def analyze(program: Program, corpus: Iterable[str] | None = None,
            **router_kw: Any) -> list[ConflictReport]:
    """All analyses, grouped by kind in taxonomy order."""
    from .constructs import lower

    if program.trees or program.policies:
        program = lower(program)
    reports = analyze_structural(program) + analyze_geometric(program, router_kw.get("embedder"))
    if corpus is not None:
        reports += analyze_soft_shadowing(program, list(corpus), **router_kw)
    reports += analyze_calibration(program)
    return sorted(reports, key=lambda r: TAXONOMY.index(r.kind))


def brute_force_universe(program: Program, a: RouteDecl, b: RouteDecl):
    """Atom universe of a route pair; exposed for independent cross-checks."""
    return build_universe([a.condition, b.condition],
                          [g.exclusive_names for g in program.groups])
