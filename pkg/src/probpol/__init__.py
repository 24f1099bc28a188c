"""Compiler, conflict analyzer and desk-scale router for a probabilistic routing-policy DSL."""

from .conflicts import (
    ConflictReport,
    analyze,
    analyze_calibration,
    analyze_geometric,
    analyze_soft_shadowing,
    analyze_structural,
)
from .constructs import (
    DisjointnessCertificate,
    PolicyTypeError,
    certify_disjoint,
    check_tree,
    compile_algebra,
    compile_tree,
    lower,
)
from .diagnostics import Diagnostic, Fix, ParseError, apply_fixes
from .emit import CompileRefused, SchemaViolation, compile, decompile, dumps
from .engine import (
    CentroidProvider,
    Router,
    RoutingDecision,
    SignalScores,
    StaticScores,
    route,
    run_tests,
    score_signals,
    simulate,
)
from .geometry import Embedder, SphericalCap, caps_intersect, group_fire, pseudo_embed, voronoi_scores
from .nodes import Program, equivalent
from .parser import parse, parse_file
from .printer import print_program
from .validator import validate

__all__ = [
    "CentroidProvider",
    "CompileRefused",
    "ConflictReport",
    "Diagnostic",
    "DisjointnessCertificate",
    "Embedder",
    "Fix",
    "ParseError",
    "PolicyTypeError",
    "Program",
    "Router",
    "RoutingDecision",
    "SchemaViolation",
    "SignalScores",
    "SphericalCap",
    "StaticScores",
    "analyze",
    "analyze_calibration",
    "analyze_geometric",
    "analyze_soft_shadowing",
    "analyze_structural",
    "apply_fixes",
    "caps_intersect",
    "certify_disjoint",
    "check_tree",
    "compile",
    "compile_algebra",
    "compile_tree",
    "decompile",
    "dumps",
    "equivalent",
    "group_fire",
    "lower",
    "parse",
    "parse_file",
    "print_program",
    "pseudo_embed",
    "route",
    "run_tests",
    "score_signals",
    "simulate",
    "validate",
    "voronoi_scores",
]
