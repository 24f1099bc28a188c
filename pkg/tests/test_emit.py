import json

import pytest
from hypothesis import given, settings

from conftest import CORPUS, corpus_files
from probpol.diagnostics import has_errors
from probpol.emit import (
    CompileRefused,
    SchemaViolation,
    compile,
    decompile,
    dumps,
    json_pointer,
    loads,
    to_doc,
)
from probpol.nodes import Program, equivalent
from probpol.parser import parse, parse_file
from probpol.validator import validate
from strategies import programs

LISTING = parse_file(CORPUS / "listing1.srdsl")


def test_empty_program_document():
    assert compile(Program()) == {"version": 1, "signals": [], "routes": [], "groups": [], "tests": []}


def test_listing_document_shape():
    doc = compile(LISTING)
    assert doc["routes"][0] == {
        "name": "math_route",
        "priority": 200,
        "tier": None,
        "condition": {"type": "domain", "name": "math"},
        "action": {"kind": "model", "model": "qwen2.5-math"},
    }
    assert doc["signals"][1]["config"]["mmlu_categories"]


def test_compound_condition_encoding():
    p = parse('SIGNAL keyword a { keywords: ["a"] }\nSIGNAL keyword b { keywords: ["b"] }\n'
              'ROUTE r { PRIORITY 1 WHEN keyword("a") AND NOT keyword("b") BLOCK }')
    r = compile(p)["routes"][0]
    assert r["condition"] == {"op": "and", "args": [
        {"type": "keyword", "name": "a"},
        {"op": "not", "args": [{"type": "keyword", "name": "b"}]}]}
    assert r["action"] == {"kind": "block"}


def test_compile_refuses_invalid_program():
    p = parse_file(CORPUS / "invalid" / "tree_missing_else.srdsl")
    with pytest.raises(CompileRefused) as info:
        compile(p)
    assert has_errors(info.value.diagnostics)


def test_dumps_is_canonical():
    text = dumps(compile(LISTING))
    assert text.endswith("}\n") and "\n  " in text
    again = dumps(json.loads(text))
    assert again == text
    keys = list(json.loads(text))
    assert keys == sorted(keys)


@pytest.mark.parametrize("doc, pointer", [
    ({"version": 2, "signals": [], "routes": [], "groups": [], "tests": []}, "/version"),
    ({"version": 1, "signals": [], "routes": [], "groups": []}, ""),
    ({"version": 1, "signals": [{"name": "x", "signal_type": "vibes", "config": {}}],
      "routes": [], "groups": [], "tests": []}, "/signals/0/signal_type"),
    ({"version": 1, "signals": [], "routes": [{"name": "r", "priority": "high", "tier": None,
      "condition": {"type": "domain", "name": "x"}, "action": None}], "groups": [], "tests": []},
     "/routes/0/priority"),
])
def test_schema_violations_carry_pointer(doc, pointer):
    with pytest.raises(SchemaViolation) as info:
        decompile(doc)
    assert info.value.pointer == pointer


def test_unknown_top_level_key_rejected():
    doc = compile(LISTING)
    doc["extra"] = 1
    with pytest.raises(SchemaViolation):
        decompile(doc)


def test_loads_rejects_non_json():
    with pytest.raises(SchemaViolation):
        loads("not json {")


def test_json_pointer_escaping():
    assert json_pointer(["a/b", "c~d", 0]) == "/a~1b/c~0d/0"


@pytest.mark.parametrize("f", corpus_files(), ids=lambda p: p.name)
def test_corpus_round_trip(f):
    p = parse_file(f)
    if has_errors(validate(p)):
        pytest.skip("invalid program")
    doc = compile(p)
    back = decompile(json.loads(dumps(doc)))
    assert equivalent(back, p)
    assert dumps(compile(back)) == dumps(doc)


def test_equal_documents_only_for_equivalent_programs():
    seen = {}
    for f in corpus_files():
        p = parse_file(f)
        first = seen.setdefault(dumps(to_doc(p)), p)
        assert equivalent(first, p), f.name


@settings(max_examples=150, deadline=None)
@given(programs())
def test_random_programs_round_trip(p):
    doc = to_doc(p)
    back = decompile(json.loads(dumps(doc)))
    assert equivalent(back, p)
    assert dumps(to_doc(back)) == dumps(doc)


@settings(max_examples=100, deadline=None)
@given(programs(), programs())
def test_encoding_is_injective(a, b):
    if dumps(to_doc(a)) == dumps(to_doc(b)):
        assert equivalent(a, b)
