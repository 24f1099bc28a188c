import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import CORPUS
from probpol.constructs import (
    CAPS_DISJOINT,
    GROUP_EXCLUSIVE,
    SAT_UNSAT,
    PolicyError,
    PolicyTypeError,
    certify_expr,
    certify_pair,
    check_policy,
    compile_algebra,
    compile_tree,
    lower,
    resolve,
    walk_tree,
)
from probpol.engine import holds, precedence_order
from probpol.nodes import And, Atom, Branch, DecisionTreeDecl, Model, Not, Program, SignalDecl
from probpol.parser import parse, parse_file
from strategies import conditions

TREE_PROG = parse_file(CORPUS / "decision_tree.srdsl")
TREE = TREE_PROG.trees[0]
POLICY_PROG = parse_file(CORPUS / "policy_algebra.srdsl")

KW = [Atom("keyword", f"k{i}") for i in range(4)]
kw_conditions = conditions(st.sampled_from(KW), max_leaves=4)


def first_match(routes, fired):
    for r in precedence_order(routes):
        if holds(r.condition, fired):
            return r.action
    return None


def test_tree_compiles_to_named_prioritized_routes():
    routes = compile_tree(TREE)
    assert [r.name for r in routes] == [f"routing_policy_{i}" for i in (1, 2, 3, 4)] + ["routing_policy_else"]
    assert [r.priority for r in routes] == [40, 30, 20, 10, 0]


def test_tree_routes_are_pairwise_disjoint():
    routes = compile_tree(TREE)
    keys = oracles.atom_keys(*(r.condition for r in routes))
    for a, b in itertools.combinations(routes, 2):
        assert not oracles.sat(And(a.condition, b.condition), keys)


def test_tree_routes_cover_everything():
    routes = compile_tree(TREE)
    keys = oracles.atom_keys(*(r.condition for r in routes))
    for env in oracles.assignments(keys):
        assert sum(oracles.truth(r.condition, env) for r in routes) == 1


@settings(max_examples=150, deadline=None)
@given(st.lists(kw_conditions, min_size=1, max_size=4), st.sets(st.sampled_from([a.name for a in KW])))
def test_walk_equals_compiled_routes(conds, fired):
    tree = DecisionTreeDecl("t", tuple(Branch(c, Model(f"m{i}")) for i, c in enumerate(conds)),
                            Model("else"))
    assert walk_tree(tree, fired) == first_match(compile_tree(tree), fired)


def test_lower_replaces_constructs():
    low = lower(POLICY_PROG)
    assert not low.policies and not low.trees
    assert [r.name for r in low.routes] == [f"full_policy_{i}" for i in range(1, 6)]
    assert [r.priority for r in low.routes] == [50, 40, 30, 20, 10]


def test_lower_rejects_name_collision():
    p = parse(TREE_PROG_SRC := (CORPUS / "decision_tree.srdsl").read_text()
              + '\nROUTE routing_policy_1 { PRIORITY 1 WHEN domain("math") MODEL "x" }')
    assert TREE_PROG_SRC
    with pytest.raises(ValueError):
        lower(p)


def test_group_certificate():
    expr = resolve(POLICY_PROG.policy("domain_policy").expr, POLICY_PROG, ("domain_policy",))
    certs = certify_expr(expr, POLICY_PROG)
    assert {c.method for c in certs} <= {GROUP_EXCLUSIVE, SAT_UNSAT}
    assert GROUP_EXCLUSIVE in {c.method for c in certs}


def test_sat_unsat_certificate():
    a = Atom("keyword", "k0")
    cert = certify_pair(a, Not(a), Program(signals=(SignalDecl("k0", "keyword", {"keywords": ["x"]}),)))
    assert cert.method == SAT_UNSAT


def test_caps_certificate():
    p = parse('SIGNAL embedding a { candidates: ["alpha"] threshold: 0.9 }\n'
              'SIGNAL embedding b { candidates: ["omega"] threshold: 0.9 }')
    cert = certify_pair(Atom("embedding", "a"), Atom("embedding", "b"), p)
    assert cert is not None and cert.method == CAPS_DISJOINT


def test_overlapping_caps_are_refused():
    p = parse('SIGNAL embedding a { candidates: ["alpha"] threshold: 0.1 }\n'
              'SIGNAL embedding b { candidates: ["omega"] threshold: 0.1 }')
    assert certify_pair(Atom("embedding", "a"), Atom("embedding", "b"), p) is None


@settings(max_examples=100, deadline=None)
@given(kw_conditions, kw_conditions)
def test_certify_pair_symmetric_and_sound(x, y):
    sigs = tuple(SignalDecl(a.name, "keyword", {"keywords": [a.name]}) for a in KW)
    p = Program(signals=sigs)
    c1, c2 = certify_pair(x, y, p), certify_pair(y, x, p)
    assert (c1 is None) == (c2 is None)
    if c1 is not None:
        assert not oracles.sat(And(x, y), oracles.atom_keys(x, y))


def test_uncertifiable_union_is_a_type_error():
    p = parse_file(CORPUS / "invalid" / "policy_overlap.srdsl")
    with pytest.raises(PolicyTypeError):
        compile_algebra(p.policies[0].expr, p, p.policies[0].name)
    [d] = check_policy(p.policies[0], p)
    assert d.code == "PP801" and "classifier" in d.message


def test_sequential_keeps_left_precedence():
    src = ('SIGNAL keyword a { keywords: ["a"] }\nSIGNAL keyword b { keywords: ["b"] }\n'
           'POLICY p { keyword("a") -> "first" >> keyword("b") -> "second" }')
    p = parse(src)
    routes = compile_algebra(p.policies[0].expr, p, "p")
    assert [r.action.model for r in routes] == ["first", "second"]
    assert first_match(routes, {"a", "b"}) == Model("first")


def test_default_is_complement_of_siblings():
    p = POLICY_PROG
    routes = compile_algebra(p.policy("domain_policy").expr, p, "d")
    default = routes[-1]
    assert default.action == Model("qwen-default")
    assert holds(default.condition, set()) and not holds(default.condition, {"math"})


def test_recursive_and_unknown_references():
    cyclic = parse('POLICY p { q }\nPOLICY q { p }')
    assert check_policy(cyclic.policies[0], cyclic)[0].code == "PP802"
    with pytest.raises(PolicyError):
        compile_algebra(cyclic.policies[0].expr, cyclic, "p")
    p = parse('SIGNAL keyword a { keywords: ["a"] }\nPOLICY p { missing >> keyword("a") -> "x" }')
    assert check_policy(p.policies[0], p)[0].code == "PP104"
