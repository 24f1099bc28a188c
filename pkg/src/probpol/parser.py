"""Recursive-descent parser producing a :class:`~probpol.nodes.Program`.

Grammar (informal)::

    program  := block*
    block    := SIGNAL type name "{" field* "}"
              | ROUTE name "{" route_item* "}"
              | SIGNAL_GROUP name "{" field* "}"
              | TEST name "{" (string "->" name)+ "}"
              | DECISION_TREE name "{" IF expr act (ELSE IF expr act)* [ELSE act] "}"
              | POLICY name "{" aexpr "}"
              | GLOBAL "{" field* "}" | BACKEND name "{" field* "}" | PLUGIN name "{" field* "}"
    field    := key ":" value
    value    := string | number | ident | "[" value* "]" | "{" field* "}"
    expr     := and ("OR" and)*
    and      := unary ("AND" unary)*
    unary    := "NOT" unary | atom | "(" expr ")"
    atom     := type "(" string ")"
    aexpr    := union (">>" union)*
    union    := term ("(+)" term)*
    term     := expr "->" target | DEFAULT "->" target | name | "(" aexpr ")"

Commas inside lists and maps are optional.  The parser stops at the first
error and raises :class:`~probpol.diagnostics.ParseError` (code PP001).
"""

from __future__ import annotations

from dataclasses import replace
from typing import Any

from .diagnostics import ParseError, diag
from .lexer import T, Token, tokenize
from .nodes import (
    SIGNAL_TYPES,
    Action,
    AlgebraExpr,
    And,
    Atom,
    Block,
    Branch,
    Condition,
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
    Span,
    TestCase,
    TestDecl,
)

BLOCK_KEYWORDS = (
    "SIGNAL",
    "ROUTE",
    "SIGNAL_GROUP",
    "TEST",
    "DECISION_TREE",
    "POLICY",
    "GLOBAL",
    "BACKEND",
    "PLUGIN",
)
RESERVED = frozenset(
    BLOCK_KEYWORDS
    + ("PRIORITY", "TIER", "WHEN", "MODEL", "BLOCK", "IF", "ELSE", "AND", "OR", "NOT", "DEFAULT")
)
GROUP_KEYS = ("semantics", "temperature", "members", "default", "threshold")


class _Backtrack(Exception):
    pass


class Parser:
    def __init__(self, tokens: list[Token], file: str):
        self.toks = tokens
        self.file = file
        self.pos = 0

    # -- navigation ---------------------------------------------------------

    @property
    def cur(self) -> Token:
        return self.toks[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    @property
    def prev(self) -> Token:
        return self.toks[self.pos - 1]

    def advance(self) -> Token:
        tok = self.cur
        if tok.type is not T.EOF:
            self.pos += 1
        return tok

    def at_kw(self, word: str) -> bool:
        return self.cur.type is T.IDENT and self.cur.text == word

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.cur
        return ParseError(diag("PP001", tok.span, message))

    def expect(self, kind: T, what: str) -> Token:
        if self.cur.type is not kind:
            raise self.error(f"expected {what}, got {self.cur.describe()}")
        return self.advance()

    def expect_kw(self, word: str) -> Token:
        if not self.at_kw(word):
            raise self.error(f"expected {word}, got {self.cur.describe()}")
        return self.advance()

    def name(self, what: str) -> Token:
        tok = self.cur
        if tok.type is not T.IDENT or tok.text in RESERVED:
            raise self.error(f"expected {what}, got {tok.describe()}")
        return self.advance()

    def span_from(self, start: Token) -> Span:
        return start.span.cover(self.prev.span)

    def open_block(self, keyword: Token) -> Token:
        if self.cur.type is not T.LBRACE:
            raise self.error(f"expected '{{' to open {keyword.text} block, got {self.cur.describe()}")
        return self.advance()

    def check_unterminated(self, keyword: Token, opener: Token) -> None:
        if self.cur.type is T.EOF:
            raise self.error(
                f"unterminated {keyword.text} block opened at line {opener.span.line}"
            )

    # -- program ------------------------------------------------------------

    def program(self) -> Program:
        out: dict[str, list[Any]] = {
            "signals": [], "routes": [], "groups": [], "tests": [],
            "trees": [], "policies": [], "opaque": [],
        }
        layout: list[tuple[str, int]] = []
        global_config: GlobalDecl | None = None
        first = self.cur
        while self.cur.type is not T.EOF:
            tok = self.cur
            if tok.type is not T.IDENT or tok.text not in BLOCK_KEYWORDS:
                raise self.error(f"unknown block keyword {tok.describe()}")
            kw = tok.text
            if kw == "GLOBAL":
                if global_config is not None:
                    raise self.error("duplicate GLOBAL block")
                global_config = self.global_block()
                layout.append(("global", 0))
                continue
            coll, node = {
                "SIGNAL": ("signals", self.signal_block),
                "ROUTE": ("routes", self.route_block),
                "SIGNAL_GROUP": ("groups", self.group_block),
                "TEST": ("tests", self.test_block),
                "DECISION_TREE": ("trees", self.tree_block),
                "POLICY": ("policies", self.policy_block),
                "BACKEND": ("opaque", self.opaque_block),
                "PLUGIN": ("opaque", self.opaque_block),
            }[kw]
            layout.append((coll, len(out[coll])))
            out[coll].append(node())
        span = first.span.cover(self.prev.span) if self.pos else first.span
        return Program(
            signals=tuple(out["signals"]),
            routes=tuple(out["routes"]),
            groups=tuple(out["groups"]),
            tests=tuple(out["tests"]),
            trees=tuple(out["trees"]),
            policies=tuple(out["policies"]),
            opaque=tuple(out["opaque"]),
            global_config=global_config,
            layout=tuple(layout),
            span=span,
        )

    # -- values -------------------------------------------------------------

    def fields(self, keyword: Token, opener: Token) -> dict[str, Any]:
        config: dict[str, Any] = {}
        while self.cur.type is not T.RBRACE:
            self.check_unterminated(keyword, opener)
            key = self.cur
            if key.type is not T.IDENT:
                raise self.error(f"expected field name, got {key.describe()}")
            self.advance()
            self.expect(T.COLON, "':' after field name")
            if key.text in config:
                raise self.error(f"duplicate field '{key.text}'", key)
            config[key.text] = self.value()
            if self.cur.type is T.COMMA:
                self.advance()
        self.advance()
        return config

    def value(self) -> Any:
        tok = self.cur
        if tok.type in (T.STRING, T.NUMBER, T.IDENT):
            self.advance()
            return tok.value
        if tok.type is T.LBRACK:
            self.advance()
            items: list[Any] = []
            while self.cur.type is not T.RBRACK:
                if self.cur.type is T.EOF:
                    raise self.error(f"unterminated list opened at line {tok.span.line}")
                items.append(self.value())
                if self.cur.type is T.COMMA:
                    self.advance()
            self.advance()
            return items
        if tok.type is T.LBRACE:
            self.advance()
            out: dict[str, Any] = {}
            while self.cur.type is not T.RBRACE:
                if self.cur.type is T.EOF:
                    raise self.error(f"unterminated map opened at line {tok.span.line}")
                key = self.expect(T.IDENT, "map key")
                self.expect(T.COLON, "':' after map key")
                if key.text in out:
                    raise self.error(f"duplicate key '{key.text}'", key)
                out[key.text] = self.value()
                if self.cur.type is T.COMMA:
                    self.advance()
            self.advance()
            return out
        raise self.error(f"expected a value, got {tok.describe()}")

    # -- blocks -------------------------------------------------------------

    def signal_block(self) -> SignalDecl:
        kw = self.advance()
        type_tok = self.cur
        if type_tok.type is not T.IDENT:
            raise self.error(f"expected signal type, got {type_tok.describe()}")
        if type_tok.text not in SIGNAL_TYPES:
            raise self.error(f"unknown signal type '{type_tok.text}'")
        self.advance()
        name = self.name("signal name")
        opener = self.open_block(kw)
        config = self.fields(kw, opener)
        return SignalDecl(name.text, type_tok.text, config, self.span_from(kw))

    def route_block(self) -> RouteDecl:
        kw = self.advance()
        name = self.name("route name")
        opener = self.open_block(kw)
        priority = tier = condition = action = None
        seen: set[str] = set()
        while self.cur.type is not T.RBRACE:
            self.check_unterminated(kw, opener)
            item = self.cur
            word = item.text if item.type is T.IDENT else None
            if word in seen and word in ("PRIORITY", "TIER", "WHEN"):
                raise self.error(f"duplicate {word} in ROUTE '{name.text}'")
            if word == "PRIORITY":
                self.advance()
                priority = self.nonneg_int("PRIORITY")
            elif word == "TIER":
                self.advance()
                tier = self.nonneg_int("TIER")
            elif word == "WHEN":
                self.advance()
                condition = self.when_expr()
            elif word in ("MODEL", "PLUGIN", "BLOCK"):
                if action is not None:
                    raise self.error(f"ROUTE '{name.text}' already has an action")
                action = self.action()
            else:
                raise self.error(f"unexpected {item.describe()} in ROUTE body")
            if word:
                seen.add(word)
        if priority is None:
            raise self.error(f"ROUTE '{name.text}' is missing PRIORITY")
        if condition is None:
            raise self.error(f"ROUTE '{name.text}' is missing WHEN")
        self.advance()
        return RouteDecl(name.text, priority, condition, action, tier, self.span_from(kw))

    def nonneg_int(self, what: str) -> int:
        tok = self.cur
        if tok.type is not T.NUMBER or not isinstance(tok.value, int) or tok.value < 0:
            raise self.error(f"{what} expects a non-negative integer, got {tok.describe()}")
        self.advance()
        return tok.value

    def action(self) -> Action:
        start = self.cur
        if self.at_kw("MODEL"):
            self.advance()
            model = self.expect(T.STRING, "model name string after MODEL")
            return Model(model.value, self.span_from(start))
        if self.at_kw("PLUGIN"):
            self.advance()
            pname = self.name("plugin name")
            config: dict[str, Any] = {}
            if self.cur.type is T.LBRACE:
                config = self.value()
            return Plugin(pname.text, config, self.span_from(start))
        if self.at_kw("BLOCK"):
            self.advance()
            return Block(self.span_from(start))
        raise self.error(f"expected MODEL, PLUGIN or BLOCK, got {start.describe()}")

    def group_block(self) -> SignalGroupDecl:
        kw = self.advance()
        name = self.name("group name")
        opener = self.open_block(kw)
        key_toks = {}
        mark = self.pos
        config = self.fields(kw, opener)
        # recover key token positions for error reporting
        for tok in self.toks[mark:self.pos]:
            if tok.type is T.IDENT and tok.text in config and tok.text not in key_toks:
                key_toks[tok.text] = tok
        close = self.prev
        for key in config:
            if key not in GROUP_KEYS:
                raise self.error(f"unknown SIGNAL_GROUP field '{key}'", key_toks.get(key, close))
        for key in ("semantics", "temperature", "members"):
            if key not in config:
                raise self.error(f"SIGNAL_GROUP '{name.text}' is missing '{key}'", close)
        if config["semantics"] != "softmax_exclusive":
            raise self.error(
                f"unsupported group semantics '{config['semantics']}' (expected softmax_exclusive)",
                key_toks.get("semantics", close),
            )
        temperature = config["temperature"]
        if isinstance(temperature, bool) or not isinstance(temperature, (int, float)):
            raise self.error("temperature must be a number", key_toks.get("temperature", close))
        members = config["members"]
        if not isinstance(members, list) or not members or not all(isinstance(m, str) for m in members):
            raise self.error("members must be a non-empty list of signal names",
                             key_toks.get("members", close))
        default = config.get("default")
        if default is not None and not isinstance(default, str):
            raise self.error("default must be a signal name", key_toks.get("default", close))
        threshold = config.get("threshold", 0.5)
        if not isinstance(threshold, (int, float)):
            raise self.error("threshold must be a number", key_toks.get("threshold", close))
        return SignalGroupDecl(
            name=name.text,
            temperature=temperature,
            members=tuple(members),
            default=default,
            threshold=threshold,
            span=self.span_from(kw),
        )

    def test_block(self) -> TestDecl:
        kw = self.advance()
        name = self.name("test name")
        opener = self.open_block(kw)
        cases: list[TestCase] = []
        while self.cur.type is not T.RBRACE:
            self.check_unterminated(kw, opener)
            q = self.expect(T.STRING, "quoted query")
            self.expect(T.ARROW, "'->' after test query")
            route = self.name("expected route name")
            cases.append(TestCase(q.value, route.text, q.span.cover(route.span)))
        if not cases:
            raise self.error(f"TEST '{name.text}' has no cases")
        self.advance()
        return TestDecl(name.text, tuple(cases), self.span_from(kw))

    def braced_action(self) -> Action:
        opener = self.expect(T.LBRACE, "'{' before action")
        if self.cur.type is T.EOF:
            raise self.error(f"unterminated action block opened at line {opener.span.line}")
        act = self.action()
        if self.cur.type is not T.RBRACE:
            raise self.error(f"expected '}}' after action, got {self.cur.describe()}")
        self.advance()
        return act

    def tree_block(self) -> DecisionTreeDecl:
        kw = self.advance()
        name = self.name("decision tree name")
        opener = self.open_block(kw)
        branches: list[Branch] = []
        else_action: Action | None = None
        self.check_unterminated(kw, opener)
        start = self.expect_kw("IF")
        cond = self.when_expr()
        branches.append(Branch(cond, self.braced_action(), self.span_from(start)))
        while self.at_kw("ELSE"):
            start = self.advance()
            if self.at_kw("IF"):
                self.advance()
                cond = self.when_expr()
                branches.append(Branch(cond, self.braced_action(), self.span_from(start)))
            else:
                else_action = self.braced_action()
                break
        self.check_unterminated(kw, opener)
        if self.cur.type is not T.RBRACE:
            raise self.error(f"expected ELSE or '}}' in DECISION_TREE, got {self.cur.describe()}")
        self.advance()
        return DecisionTreeDecl(name.text, tuple(branches), else_action, self.span_from(kw))

    def policy_block(self) -> PolicyDecl:
        kw = self.advance()
        name = self.name("policy name")
        opener = self.open_block(kw)
        self.check_unterminated(kw, opener)
        expr = self.algebra()
        self.check_unterminated(kw, opener)
        if self.cur.type is not T.RBRACE:
            raise self.error(f"expected '(+)', '>>' or '}}' in POLICY, got {self.cur.describe()}")
        self.advance()
        return PolicyDecl(name.text, expr, self.span_from(kw))

    def global_block(self) -> GlobalDecl:
        kw = self.advance()
        opener = self.open_block(kw)
        config = self.fields(kw, opener)
        return GlobalDecl(config, self.span_from(kw))

    def opaque_block(self) -> OpaqueDecl:
        kw = self.advance()
        name = self.name(f"{kw.text.lower()} name")
        opener = self.open_block(kw)
        config = self.fields(kw, opener)
        return OpaqueDecl(kw.text, name.text, config, self.span_from(kw))

    # -- conditions ---------------------------------------------------------

    def when_expr(self) -> Condition:
        return self.or_expr()

    def or_expr(self) -> Condition:
        left = self.and_expr()
        while self.at_kw("OR"):
            op = self.advance()
            right = self.operand_after(op, self.and_expr)
            left = Or(left, right, left.span.cover(right.span))
        return left

    def and_expr(self) -> Condition:
        left = self.unary()
        while self.at_kw("AND"):
            op = self.advance()
            right = self.operand_after(op, self.unary)
            left = And(left, right, left.span.cover(right.span))
        return left

    def operand_after(self, op: Token, rule) -> Condition:
        if not self.starts_unary():
            raise self.error(f"malformed WHEN expression: '{op.text}' has no right operand", op)
        return rule()

    def starts_unary(self) -> bool:
        tok = self.cur
        if tok.type is T.LPAREN:
            return True
        return tok.type is T.IDENT and (tok.text == "NOT" or tok.text not in RESERVED)

    def unary(self) -> Condition:
        tok = self.cur
        if self.at_kw("NOT"):
            self.advance()
            operand = self.operand_after(tok, self.unary)
            return Not(operand, tok.span.cover(operand.span))
        if tok.type is T.LPAREN:
            self.advance()
            inner = self.or_expr()
            close = self.cur
            if close.type is not T.RPAREN:
                raise self.error(f"malformed WHEN expression: expected ')', got {close.describe()}")
            self.advance()
            return replace(inner, span=tok.span.cover(close.span))
        return self.atom()

    def atom(self) -> Atom:
        tok = self.cur
        if tok.type is not T.IDENT or tok.text in RESERVED:
            raise self.error(f"malformed WHEN expression: expected a signal atom, got {tok.describe()}")
        if tok.text not in SIGNAL_TYPES:
            raise self.error(f"malformed WHEN expression: unknown signal type '{tok.text}'")
        self.advance()
        if self.cur.type is not T.LPAREN:
            raise self.error(f"malformed WHEN expression: expected '(' after '{tok.text}'")
        self.advance()
        name = self.cur
        if name.type is not T.STRING:
            raise self.error(f"malformed WHEN expression: expected quoted signal name, got {name.describe()}")
        self.advance()
        if self.cur.type is not T.RPAREN:
            raise self.error(f"malformed WHEN expression: expected ')', got {self.cur.describe()}")
        close = self.advance()
        return Atom(tok.text, name.value, tok.span.cover(close.span))

    # -- policy algebra -----------------------------------------------------

    def algebra(self) -> AlgebraExpr:
        left = self.union()
        while self.cur.type is T.SEQ:
            op = self.advance()
            if self.cur.type in (T.RBRACE, T.EOF):
                raise self.error("'>>' has no right operand", op)
            right = self.union()
            left = Sequential(left, right, left.span.cover(right.span))
        return left

    def union(self) -> AlgebraExpr:
        left = self.term()
        while self.cur.type is T.UNION:
            op = self.advance()
            if self.cur.type in (T.RBRACE, T.EOF):
                raise self.error("'(+)' has no right operand", op)
            right = self.term()
            left = ExclusiveUnion(left, right, left.span.cover(right.span))
        return left

    def term(self) -> AlgebraExpr:
        tok = self.cur
        if self.at_kw("DEFAULT"):
            self.advance()
            self.expect(T.ARROW, "'->' after DEFAULT")
            act = self.target()
            return DefaultLeaf(act, tok.span.cover(self.prev.span))
        if tok.type is T.IDENT and tok.text not in RESERVED and tok.text not in SIGNAL_TYPES:
            self.advance()
            return PolicyRef(tok.text, tok.span)
        if tok.type is T.LPAREN:
            mark = self.pos
            try:
                return self.leaf()
            except (ParseError, _Backtrack):
                self.pos = mark
            self.advance()
            inner = self.algebra()
            close = self.expect(T.RPAREN, "')' closing policy expression")
            return replace(inner, span=tok.span.cover(close.span))
        return self.leaf()

    def leaf(self) -> Leaf:
        start = self.cur
        cond = self.when_expr()
        if self.cur.type is not T.ARROW:
            if start.type is T.LPAREN:
                raise _Backtrack()
            raise self.error(f"expected '->' after policy condition, got {self.cur.describe()}")
        self.advance()
        act = self.target()
        return Leaf(cond, act, start.span.cover(self.prev.span))

    def target(self) -> Action:
        tok = self.cur
        if tok.type is T.STRING:
            self.advance()
            return Model(tok.value, tok.span)
        if self.at_kw("BLOCK") or self.at_kw("PLUGIN") or self.at_kw("MODEL"):
            return self.action()
        raise self.error(f"expected model string, BLOCK or PLUGIN after '->', got {tok.describe()}")


def parse(source: str, file: str = "<input>") -> Program:
    """Parse DSL source text; raises ParseError (PP001) on the first syntax error."""
    return Parser(tokenize(source, file), file).program()


def parse_file(path) -> Program:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read(), str(path))
