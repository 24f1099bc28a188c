"""Desk-scale signal scoring and route selection.

Scores flow in three stages: every signal gets a similarity in [-1, 1]
(crisp signals: exactly -1 or 1) and a raw score ``(sim + 1) / 2``;
softmax-exclusive groups replace their members' scores with the
temperature-scaled softmax of the similarities; activations come from the
group threshold for grouped signals and from each signal's own threshold
otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Protocol, Sequence

import numpy as np

from .geometry import DEFAULT_DIM, Embedder, cosine, group_fire, tokens, voronoi_scores
from .nodes import (
    CLASSIFIER,
    CRISP,
    GEOMETRIC,
    Action,
    And,
    Atom,
    Condition,
    Not,
    Or,
    Program,
    RouteDecl,
    SignalDecl,
)

INDEPENDENT = "independent"
VORONOI = "voronoi"
MODES = (INDEPENDENT, VORONOI)

DEFAULT_CLASSIFIER_THRESHOLD = 0.5
DEFAULT_EMBEDDING_THRESHOLD = 0.8


class ProviderError(RuntimeError):
    """No provider can score a signal."""


def embedding_dim(program: Program) -> int:
    dim = program.globals.get("embedding_dim", DEFAULT_DIM)
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 2:
        raise ValueError(f"GLOBAL embedding_dim must be an integer >= 2, got {dim!r}")
    return dim


def classifier_labels(signal: SignalDecl) -> list[str]:
    """Category names a classifier signal is scored against."""
    for key in ("mmlu_categories", "categories", "candidates"):
        labels = signal.config.get(key)
        if isinstance(labels, list) and labels:
            return [str(x) for x in labels]
    return [signal.name]


def keyword_terms(signal: SignalDecl) -> list[str]:
    for key in ("keywords", "terms"):
        terms = signal.config.get(key)
        if isinstance(terms, list):
            return [str(t) for t in terms]
    return []


def signal_threshold(signal: SignalDecl) -> float:
    t = signal.config.get("threshold")
    if isinstance(t, (int, float)) and not isinstance(t, bool):
        return float(t)
    if signal.kind == GEOMETRIC:
        return DEFAULT_EMBEDDING_THRESHOLD
    return DEFAULT_CLASSIFIER_THRESHOLD


def signal_centroid(signal: SignalDecl, embedder: Embedder) -> np.ndarray:
    """Embedding signals: centroid of candidates.  Classifiers: centroid of labels."""
    if signal.kind == GEOMETRIC:
        return embedder.centroid([str(c) for c in signal.config.get("candidates", [])])
    return embedder.centroid(classifier_labels(signal))


class SimilarityProvider(Protocol):
    def similarity(self, signal: SignalDecl, query: str) -> float:
        """Similarity of ``query`` to the signal's concept, in [-1, 1]."""


class CentroidProvider:
    """Default provider for embedding and classifier signals.

    Embedding signals compare against the centroid of their candidates;
    classifier signals take the best cosine over their category names.
    """

    def __init__(self, embedder: Embedder):
        self.embedder = embedder
        self._centroids: dict[str, np.ndarray] = {}

    def similarity(self, signal: SignalDecl, query: str) -> float:
        q = self.embedder.embed(query)
        if signal.kind == GEOMETRIC:
            c = self._centroids.get(signal.name)
            if c is None:
                c = self._centroids[signal.name] = signal_centroid(signal, self.embedder)
            return cosine(q, c)
        if signal.kind == CLASSIFIER:
            return max(cosine(q, self.embedder.embed(lbl)) for lbl in classifier_labels(signal))
        raise ProviderError(f"no similarity provider for crisp signal '{signal.name}'")


class StaticScores:
    """Fixed raw scores in [0, 1] per signal name, for every query.

    Signals not listed fall through to ``fallback``; with no fallback they
    are an error rather than a silent zero.
    """

    def __init__(self, scores: Mapping[str, float], fallback: SimilarityProvider | None = None):
        self.scores = dict(scores)
        self.fallback = fallback

    def similarity(self, signal: SignalDecl, query: str) -> float:
        if signal.name in self.scores:
            return 2.0 * self.scores[signal.name] - 1.0
        if self.fallback is None:
            raise ProviderError(f"no score for signal '{signal.name}'")
        return self.fallback.similarity(signal, query)


@dataclass(frozen=True)
class SignalScores:
    raw: dict[str, float]
    normalized: dict[str, float]
    similarity: dict[str, float]
    fired: frozenset[str]
    grouped: dict[str, str] = field(default_factory=dict)  # signal -> group name

    def to_json(self) -> dict[str, Any]:
        return {
            "raw": self.raw,
            "normalized": self.normalized,
            "similarity": self.similarity,
            "fired": sorted(self.fired),
            "grouped": self.grouped,
        }


@dataclass(frozen=True)
class TraceEntry:
    route: str
    priority: int
    tier: int | None
    matched: bool
    confidence: float
    reason: str  # selected | preempted | lower_confidence | condition_false | tier_skipped


@dataclass(frozen=True)
class RoutingDecision:
    route: str | None
    action: Action | None
    trace: tuple[TraceEntry, ...]
    scores: SignalScores


def holds(cond: Condition, fired: frozenset[str] | set[str]) -> bool:
    if isinstance(cond, Atom):
        return cond.name in fired
    if isinstance(cond, Not):
        return not holds(cond.operand, fired)
    if isinstance(cond, And):
        return holds(cond.left, fired) and holds(cond.right, fired)
    return holds(cond.left, fired) or holds(cond.right, fired)


def confidence(cond: Condition, scores: Mapping[str, float]) -> float:
    """Fuzzy confidence: atom = score, AND = min, OR = max, NOT = 1 - s."""
    if isinstance(cond, Atom):
        return scores.get(cond.name, 0.0)
    if isinstance(cond, Not):
        return 1.0 - confidence(cond.operand, scores)
    if isinstance(cond, And):
        return min(confidence(cond.left, scores), confidence(cond.right, scores))
    if isinstance(cond, Or):
        return max(confidence(cond.left, scores), confidence(cond.right, scores))
    raise TypeError(f"not a condition: {cond!r}")


def precedence_order(routes: Sequence[RouteDecl]) -> list[RouteDecl]:
    """Untiered evaluation order: priority descending, declaration order on ties."""
    indexed = sorted(enumerate(routes), key=lambda p: (-p[1].priority, p[0]))
    return [r for _, r in indexed]


def precedes(a: RouteDecl, b: RouteDecl) -> bool:
    """Whether ``a`` strictly wins over ``b`` whenever both match."""
    if a.tier is not None and b.tier is not None:
        return a.tier < b.tier
    return a.priority > b.priority


class Router:
    def __init__(
        self,
        program: Program,
        provider: SimilarityProvider | None = None,
        embedder: Embedder | None = None,
        attributes: Mapping[str, Any] | None = None,
        mode: str = VORONOI,
    ):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if program.trees or program.policies:
            from .constructs import lower

            program = lower(program)
        self.program = program
        self.mode = mode
        self.embedder = embedder or Embedder(embedding_dim(program))
        self.provider = provider or CentroidProvider(self.embedder)
        self.attributes = dict(attributes or {})
        self._decl_index = {r.name: i for i, r in enumerate(program.routes)}

    # -- scoring ------------------------------------------------------------

    def _crisp(self, signal: SignalDecl, query: str) -> float:
        if signal.signal_type == "keyword":
            qtoks = tokens(query)
            for term in keyword_terms(signal):
                ttoks = tokens(term)
                if ttoks and any(
                    qtoks[i : i + len(ttoks)] == ttoks for i in range(len(qtoks) - len(ttoks) + 1)
                ):
                    return 1.0
            return 0.0
        key = signal.config.get("attribute", signal.name)
        return 1.0 if self.attributes.get(key) else 0.0

    def score(self, query: str) -> SignalScores:
        raw: dict[str, float] = {}
        sims: dict[str, float] = {}
        fired: set[str] = set()
        for s in self.program.signals:
            if s.kind == CRISP:
                r = self._crisp(s, query)
                sims[s.name] = 2.0 * r - 1.0
                raw[s.name] = r
                if r >= 1.0:
                    fired.add(s.name)
                continue
            sim = float(self.provider.similarity(s, query))
            if not -1.0 - 1e-9 <= sim <= 1.0 + 1e-9 or math.isnan(sim):
                raise ProviderError(f"similarity {sim} for '{s.name}' is outside [-1, 1]")
            sims[s.name] = sim
            raw[s.name] = (sim + 1.0) / 2.0
            threshold = signal_threshold(s)
            if (sim if s.kind == GEOMETRIC else raw[s.name]) >= threshold:
                fired.add(s.name)
        normalized = dict(raw)
        grouped: dict[str, str] = {}
        if self.mode == VORONOI:
            for g in self.program.groups:
                members = [m for m in g.members if m in sims]
                if not members:
                    continue
                scores = voronoi_scores([sims[m] for m in members], g.temperature)
                winners = group_fire(scores, g.threshold)
                for name in g.exclusive_names:
                    grouped[name] = g.name
                    fired.discard(name)
                for i, m in enumerate(members):
                    normalized[m] = float(scores[i])
                    if i in winners:
                        fired.add(m)
                if not winners and g.default and g.default in sims:
                    fired.add(g.default)
        return SignalScores(raw, normalized, sims, frozenset(fired), grouped)

    # -- routing ------------------------------------------------------------

    def decide(self, scores: SignalScores) -> RoutingDecision:
        routes = self.program.routes
        matched = {r.name: holds(r.condition, scores.fired) for r in routes}
        conf = {r.name: confidence(r.condition, scores.normalized) for r in routes}
        reasons: dict[str, str] = {}
        chosen: RouteDecl | None = None
        if any(r.tier is not None for r in routes):
            tiers = sorted({r.tier for r in routes if r.tier is not None})
            order_key = lambda r: (-conf[r.name], -r.priority, self._decl_index[r.name])  # noqa: E731
            buckets = [[r for r in routes if r.tier == t] for t in tiers]
            buckets.append([r for r in routes if r.tier is None])
            for bucket in buckets:
                if chosen is not None:
                    for r in bucket:
                        reasons[r.name] = "tier_skipped"
                    continue
                hits = sorted((r for r in bucket if matched[r.name]), key=order_key)
                for r in bucket:
                    reasons[r.name] = "condition_false"
                if hits:
                    chosen = hits[0]
                    reasons[chosen.name] = "selected"
                    for r in hits[1:]:
                        reasons[r.name] = "lower_confidence"
            ordered = [r for bucket in buckets for r in bucket]
        else:
            ordered = precedence_order(routes)
            for r in ordered:
                if not matched[r.name]:
                    reasons[r.name] = "condition_false"
                elif chosen is None:
                    chosen = r
                    reasons[r.name] = "selected"
                else:
                    reasons[r.name] = "preempted"
        trace = tuple(
            TraceEntry(r.name, r.priority, r.tier, matched[r.name], conf[r.name], reasons[r.name])
            for r in ordered
        )
        return RoutingDecision(
            chosen.name if chosen else None, chosen.action if chosen else None, trace, scores
        )

    def route(self, query: str) -> RoutingDecision:
        return self.decide(self.score(query))


# ---------------------------------------------------------------------------
# TEST blocks and simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TestResult:
    test: str
    query: str
    expected: str
    actual: str | None
    passed: bool
    scores: SignalScores

    __test__ = False


def run_tests(program: Program, **router_kw: Any) -> list[TestResult]:
    router = Router(program, **router_kw)
    out = []
    for t in program.tests:
        for case in t.cases:
            decision = router.route(case.query)
            out.append(
                TestResult(t.name, case.query, case.expected_route, decision.route,
                           decision.route == case.expected_route, decision.scores)
            )
    return out


@dataclass
class PairStat:
    count: int = 0
    inversions: int = 0


@dataclass
class SimulationSummary:
    mode: str
    queries: list[str]
    decisions: list[str | None]
    route_histogram: dict[str, int]
    co_fire: dict[tuple[str, str], int]
    route_pairs: dict[tuple[str, str], PairStat]

    @property
    def n(self) -> int:
        return len(self.queries)

    def co_fire_rate(self, a: str, b: str) -> float:
        key = (a, b) if (a, b) in self.co_fire else (b, a)
        return self.co_fire.get(key, 0) / self.n

    def inversion_rate(self, hi: str, lo: str) -> float:
        stat = self.route_pairs.get((hi, lo))
        if not stat or not stat.count:
            return 0.0
        return stat.inversions / stat.count

    def to_json(self) -> dict[str, Any]:
        return {
            "mode": self.mode,
            "n_queries": self.n,
            "decisions": [
                {"query": q, "route": r} for q, r in zip(self.queries, self.decisions)
            ],
            "route_histogram": self.route_histogram,
            "co_fire": [
                {"signals": [a, b], "count": c, "rate": c / self.n}
                for (a, b), c in self.co_fire.items()
            ],
            "inversions": [
                {
                    "higher": hi,
                    "lower": lo,
                    "co_fires": s.count,
                    "inversions": s.inversions,
                    "rate": s.inversions / s.count if s.count else 0.0,
                }
                for (hi, lo), s in self.route_pairs.items()
            ],
        }


NO_ROUTE = "<none>"


def simulate(program: Program, queries: Iterable[str], mode: str = VORONOI,
             **router_kw: Any) -> SimulationSummary:
    queries = list(queries)
    if not queries:
        raise ValueError("simulation trace is empty")
    router = Router(program, mode=mode, **router_kw)
    names = [s.name for s in router.program.signals]
    routes = router.program.routes
    pairs = [(a, b) for i, a in enumerate(routes) for b in routes[i + 1:]]
    ordered_pairs = []
    for a, b in pairs:
        if precedes(a, b):
            ordered_pairs.append((a, b))
        elif precedes(b, a):
            ordered_pairs.append((b, a))
    co_fire = {(a, b): 0 for i, a in enumerate(names) for b in names[i + 1:]}
    route_pairs = {(hi.name, lo.name): PairStat() for hi, lo in ordered_pairs}
    histogram: dict[str, int] = {}
    decisions: list[str | None] = []
    for q in queries:
        decision = router.route(q)
        decisions.append(decision.route)
        key = decision.route or NO_ROUTE
        histogram[key] = histogram.get(key, 0) + 1
        fired = decision.scores.fired
        for a, b in co_fire:
            if a in fired and b in fired:
                co_fire[(a, b)] += 1
        for hi, lo in ordered_pairs:
            if holds(hi.condition, fired) and holds(lo.condition, fired):
                stat = route_pairs[(hi.name, lo.name)]
                stat.count += 1
                norm = decision.scores.normalized
                if confidence(lo.condition, norm) > confidence(hi.condition, norm):
                    stat.inversions += 1
    return SimulationSummary(mode, queries, decisions, histogram, co_fire, route_pairs)


def score_signals(program: Program, query: str, **router_kw: Any) -> SignalScores:
    return Router(program, **router_kw).score(query)


def route(program: Program, query: str, **router_kw: Any) -> RoutingDecision:
    return Router(program, **router_kw).route(query)
