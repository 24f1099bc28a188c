from dataclasses import fields, is_dataclass, replace

import pytest
from hypothesis import given, settings

from conftest import CORPUS, corpus_files
from probpol.diagnostics import ParseError
from probpol.nodes import And, Atom, Not, Or, Program, Span, equivalent
from probpol.parser import parse, parse_file
from probpol.printer import format_condition, print_program
from strategies import conditions, programs

LISTING = (CORPUS / "listing1.srdsl").read_text()


def syntax_error(src: str) -> ParseError:
    with pytest.raises(ParseError) as info:
        parse(src, "t.srdsl")
    assert info.value.diagnostic.code == "PP001"
    return info.value


def test_listing_one_shape():
    p = parse(LISTING)
    assert [s.name for s in p.signals] == ["math", "science"]
    assert [r.name for r in p.routes] == ["math_route", "science_route"]
    assert p.routes[0].priority == 200
    assert p.signals[0].config["mmlu_categories"] == ["college_mathematics", "abstract_algebra"]
    assert p.routes[1].condition == Atom("domain", "science")


def test_empty_source():
    p = parse("")
    assert p == Program()
    assert print_program(p) == ""


def test_dangling_and_points_at_operator():
    src = 'ROUTE r { PRIORITY 1 WHEN domain("x") AND }'
    err = syntax_error(src)
    span = err.diagnostic.span
    assert src[span.offset:span.offset + span.length] == "AND"
    assert (span.line, span.column) == (1, 39)


@pytest.mark.parametrize("src, needle", [
    ("FOO x {}", "unknown block"),
    ("SIGNAL domain x {\n  mmlu_categories: []\n", "unterminated"),
    ('ROUTE r { PRIORITY high WHEN domain("x") }', "PRIORITY"),
    ('ROUTE r { WHEN domain("x") }', "missing PRIORITY"),
    ('ROUTE r { PRIORITY 3 WHEN vibes("x") }', "signal type"),
    ('ROUTE r { PRIORITY 3 WHEN domain("x") OR OR domain("y") }', ""),
])
def test_syntax_errors_have_distinct_messages(src, needle):
    err = syntax_error(src)
    assert needle.lower() in err.diagnostic.message.lower()


def test_error_messages_are_distinct():
    msgs = {syntax_error(s).diagnostic.message.split("'")[0] for s in [
        "FOO x {}", "SIGNAL domain x {", 'ROUTE r { PRIORITY high WHEN domain("x") }',
        'ROUTE r { PRIORITY 1 WHEN domain("x") AND }',
    ]}
    assert len(msgs) == 4


def test_precedence_not_and_or():
    p = parse('ROUTE r { PRIORITY 1 WHEN NOT keyword("a") AND keyword("b") OR keyword("c") }')
    a, b, c = (Atom("keyword", n) for n in "abc")
    assert p.routes[0].condition == Or(And(Not(a), b), c)


def test_left_associative():
    p = parse('ROUTE r { PRIORITY 1 WHEN keyword("a") AND keyword("b") AND keyword("c") }')
    a, b, c = (Atom("keyword", n) for n in "abc")
    assert p.routes[0].condition == And(And(a, b), c)


def test_print_and_not():
    cond = And(Atom("domain", "a"), Not(Atom("domain", "b")))
    assert format_condition(cond) == 'domain("a") AND NOT domain("b")'


def test_print_parenthesizes_nested_binaries():
    cond = And(Or(Atom("keyword", "a"), Atom("keyword", "b")), Atom("keyword", "c"))
    assert format_condition(cond) == '(keyword("a") OR keyword("b")) AND keyword("c")'


def test_equivalent_ignores_config_order_and_spans():
    reordered = LISTING.replace(
        '"college_mathematics",\n                    "abstract_algebra"',
        '"college_mathematics", "abstract_algebra"',
    )
    p = parse(LISTING)
    assert equivalent(p, p)
    assert equivalent(p, parse(reordered))
    src = 'SIGNAL embedding e { threshold: 0.8 candidates: ["x"] }'
    alt = 'SIGNAL embedding e { candidates: ["x"]\n threshold: 0.8 }'
    assert equivalent(parse(src), parse(alt))


def test_equivalent_detects_priority_swap():
    swapped = LISTING.replace("PRIORITY 200", "PRIORITY X").replace("PRIORITY 100", "PRIORITY 200")
    swapped = swapped.replace("PRIORITY X", "PRIORITY 100")
    assert not equivalent(parse(LISTING), parse(swapped))


def test_string_escapes_round_trip():
    src = 'SIGNAL keyword k { keywords: ["say \\"hi\\"", "back\\\\slash"] }'
    p = parse(src)
    assert p.signals[0].config["keywords"] == ['say "hi"', "back\\slash"]
    assert equivalent(parse(print_program(p)), p)


def test_policy_and_tree_blocks_parse():
    p = parse_file(CORPUS / "policy_algebra.srdsl")
    assert [x.name for x in p.policies] == ["security_policy", "domain_policy", "full_policy"]
    t = parse_file(CORPUS / "decision_tree.srdsl").trees[0]
    assert len(t.branches) == 4 and t.else_action is not None


def test_route_without_action_is_allowed():
    p = parse_file(CORPUS / "semantic_rbac.srdsl")
    assert p.route_named("general_access").action is None


@pytest.mark.parametrize("f", corpus_files(), ids=lambda p: p.name)
def test_corpus_print_parse_round_trip(f):
    p = parse_file(f)
    text = print_program(p)
    assert equivalent(parse(text), p)
    assert print_program(parse(text)) == text  # printer is a fixed point


@pytest.mark.parametrize("f", corpus_files(), ids=lambda p: p.name)
def test_parse_is_deterministic(f):
    src = f.read_text()
    assert parse(src) == parse(src)
    assert parse(src).layout == parse(src).layout


def _spans(node, out):
    if isinstance(node, (list, tuple)):
        for x in node:
            _spans(x, out)
        return
    if not is_dataclass(node) or isinstance(node, Span):
        return
    children = []
    for f in fields(node):
        if f.name in ("span", "layout"):
            continue
        v = getattr(node, f.name)
        sub = []
        _spans(v, sub)
        children += sub
    span = getattr(node, "span", None)
    out.append((node, span, children))


@pytest.mark.parametrize("f", corpus_files(), ids=lambda p: p.name)
def test_span_coverage(f):
    data = f.read_bytes()
    records = []
    for block in ("signals", "routes", "groups", "tests", "trees", "policies", "opaque"):
        _spans(getattr(parse_file(f), block), records)
    assert records
    for node, span, children in records:
        if span is None:
            continue
        assert span.line >= 1 and span.column >= 1 and span.length >= 0
        assert span.offset + span.length <= len(data), node
        for child, cspan, _ in children:
            if cspan is not None:
                assert span.contains(cspan), (type(node).__name__, type(child).__name__)


@settings(max_examples=150, deadline=None)
@given(programs())
def test_random_programs_round_trip(p):
    text = print_program(p)
    assert equivalent(parse(text), p)


@settings(max_examples=200, deadline=None)
@given(conditions())
def test_random_conditions_round_trip(cond):
    src = f"ROUTE r {{ PRIORITY 1 WHEN {format_condition(cond)} }}"
    assert parse(src).routes[0].condition == cond


def test_layout_preserved_by_printer():
    p = parse_file(CORPUS / "global_backend_plugin.srdsl")
    text = print_program(p)
    assert text.index("GLOBAL") < text.index("BACKEND") < text.index("SIGNAL")
    assert replace(p, layout=()) == p  # layout does not take part in equality
