"""Tokenizer for the routing-policy DSL."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .diagnostics import ParseError, diag
from .nodes import Span


class T(Enum):
    IDENT = "identifier"
    STRING = "string"
    NUMBER = "number"
    LBRACE = "'{'"
    RBRACE = "'}'"
    LBRACK = "'['"
    RBRACK = "']'"
    LPAREN = "'('"
    RPAREN = "')'"
    COLON = "':'"
    COMMA = "','"
    ARROW = "'->'"
    UNION = "'(+)'"
    SEQ = "'>>'"
    EOF = "end of input"


@dataclass(frozen=True)
class Token:
    type: T
    text: str
    span: Span
    value: object = None

    def describe(self) -> str:
        if self.type is T.EOF:
            return "end of input"
        return repr(self.text)


_PUNCT = {
    "{": T.LBRACE,
    "}": T.RBRACE,
    "[": T.LBRACK,
    "]": T.RBRACK,
    "(": T.LPAREN,
    ")": T.RPAREN,
    ":": T.COLON,
    ",": T.COMMA,
}


def _digit(ch: str) -> bool:
    return "0" <= ch <= "9"


def _ident_start(ch: str) -> bool:
    return ch.isascii() and (ch.isalpha() or ch == "_")


def _ident_char(ch: str) -> bool:
    return ch.isascii() and (ch.isalnum() or ch == "_")


def tokenize(source: str, file: str = "<input>") -> list[Token]:
    toks: list[Token] = []
    i = 0
    n = len(source)
    line, col, boff = 1, 1, 0

    def advance(count: int) -> None:
        nonlocal i, line, col, boff
        for ch in source[i : i + count]:
            boff += len(ch.encode("utf-8"))
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
        i += count

    def here() -> tuple[int, int, int]:
        return line, col, boff

    def emit(kind: T, start: tuple[int, int, int], text: str, value: object = None) -> None:
        sl, sc, so = start
        toks.append(Token(kind, text, Span(file, sl, sc, so, boff - so), value))

    while i < n:
        ch = source[i]
        if ch in " \t\r\n":
            advance(1)
            continue
        if ch == "#":
            while i < n and source[i] != "\n":
                advance(1)
            continue
        start = here()
        if source.startswith("(+)", i):
            advance(3)
            emit(T.UNION, start, "(+)")
        elif source.startswith("->", i):
            advance(2)
            emit(T.ARROW, start, "->")
        elif source.startswith(">>", i):
            advance(2)
            emit(T.SEQ, start, ">>")
        elif ch in _PUNCT:
            advance(1)
            emit(_PUNCT[ch], start, ch)
        elif ch == '"':
            j = i + 1
            buf: list[str] = []
            while True:
                if j >= n or source[j] == "\n":
                    raise ParseError(diag("PP001", Span(file, start[0], start[1], start[2], 1),
                                          "unterminated string literal"))
                c = source[j]
                if c == "\\":
                    nxt = source[j + 1] if j + 1 < n else ""
                    if nxt not in ('"', "\\"):
                        raise ParseError(diag("PP001", Span(file, start[0], start[1], start[2], 1),
                                              f"invalid escape sequence '\\{nxt}'"))
                    buf.append(nxt)
                    j += 2
                    continue
                if c == '"':
                    break
                buf.append(c)
                j += 1
            text = source[i : j + 1]
            advance(j + 1 - i)
            emit(T.STRING, start, text, "".join(buf))
        elif _digit(ch) or (ch == "-" and i + 1 < n and _digit(source[i + 1])):
            j = i + 1
            while j < n and _digit(source[j]):
                j += 1
            is_real = False
            if j + 1 < n and source[j] == "." and _digit(source[j + 1]):
                is_real = True
                j += 1
                while j < n and _digit(source[j]):
                    j += 1
            text = source[i:j]
            advance(j - i)
            emit(T.NUMBER, start, text, float(text) if is_real else int(text))
        elif _ident_start(ch):
            j = i + 1
            while j < n and _ident_char(source[j]):
                j += 1
            text = source[i:j]
            advance(j - i)
            emit(T.IDENT, start, text, text)
        else:
            raise ParseError(diag("PP001", Span(file, start[0], start[1], start[2], 1),
                                  f"unexpected character {ch!r}"))
    toks.append(Token(T.EOF, "", Span(file, line, col, boff, 0)))
    return toks
