"""Tokenizer, statement AST and recursive-descent parser for dataflow scripts.

Supported statements::

    A = LOAD 'path' [USING PigStorage('<delim>')] AS (f: type, ...);
    B = FILTER A BY <predicate>;
    C = GROUP B ALL;
    D = FOREACH C GENERATE COUNT(B);
    DESCRIBE D;
    DUMP D;

Keywords are case-insensitive, aliases and field names are not.  Lines and
columns are 1-based.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from cloudmr.query.diagnostics import SYNTAX_ERROR, Diagnostic, Severity

LOAD_TYPES = ("int", "float", "chararray")
DEFAULT_DELIMITER = "\t"


# -- schema ---------------------------------------------------------------


@dataclass(frozen=True)
class Field:
    name: str | None
    type: str
    inner: "Schema | None" = None

    def describe(self) -> str:
        if self.type == "bag":
            body = f"{{({self.inner.describe()})}}"
            return f"{self.name}: {body}" if self.name else body
        return f"{self.name}: {self.type}" if self.name else self.type

    def compact(self) -> str:
        if self.type == "bag":
            return f"{self.name}:bag{{{self.inner.compact()}}}"
        return f"{self.name}:{self.type}" if self.name else self.type


@dataclass(frozen=True)
class Schema:
    fields: tuple[Field, ...]

    @classmethod
    def of(cls, *pairs: tuple[str, str]) -> "Schema":
        return cls(tuple(Field(n, t) for n, t in pairs))

    @property
    def names(self) -> list[str | None]:
        return [f.name for f in self.fields]

    def index(self, name: str) -> int | None:
        for i, f in enumerate(self.fields):
            if f.name == name:
                return i
        return None

    def describe(self) -> str:
        return ",".join(f.describe() for f in self.fields)

    def compact(self) -> str:
        return ",".join(f.compact() for f in self.fields)

    def __len__(self) -> int:
        return len(self.fields)


# -- predicate AST ----------------------------------------------------------


@dataclass(frozen=True)
class FieldRef:
    name: str
    line: int
    column: int


@dataclass(frozen=True)
class Literal:
    value: Union[int, float, str]
    kind: str  # "int" | "double" | "chararray"


Operand = Union[FieldRef, Literal]


@dataclass(frozen=True)
class Compare:
    op: str
    left: Operand
    right: Operand


@dataclass(frozen=True)
class And:
    left: "Predicate"
    right: "Predicate"


@dataclass(frozen=True)
class Or:
    left: "Predicate"
    right: "Predicate"


@dataclass(frozen=True)
class Not:
    operand: "Predicate"


Predicate = Union[Compare, And, Or, Not]


def field_refs(pred: Predicate) -> list[FieldRef]:
    if isinstance(pred, Compare):
        return [x for x in (pred.left, pred.right) if isinstance(x, FieldRef)]
    if isinstance(pred, Not):
        return field_refs(pred.operand)
    return field_refs(pred.left) + field_refs(pred.right)


# -- statements -------------------------------------------------------------


@dataclass(frozen=True)
class Pos:
    line: int
    column: int


@dataclass(frozen=True)
class Load:
    alias: str
    path: str
    delimiter: str
    schema: Schema
    pos: Pos


@dataclass(frozen=True)
class Filter:
    alias: str
    source: str
    predicate: Predicate
    pos: Pos
    source_pos: Pos


@dataclass(frozen=True)
class GroupAll:
    alias: str
    source: str
    pos: Pos
    source_pos: Pos


@dataclass(frozen=True)
class Count:
    alias: str
    source: str
    bag: str
    pos: Pos
    source_pos: Pos
    bag_pos: Pos


@dataclass(frozen=True)
class Describe:
    alias: str
    pos: Pos


@dataclass(frozen=True)
class Dump:
    alias: str
    pos: Pos


@dataclass(frozen=True)
class Invalid:
    """A statement that failed to parse; ``alias`` is set when recoverable."""

    alias: str | None
    diagnostic: Diagnostic


Statement = Union[Load, Filter, GroupAll, Count, Describe, Dump, Invalid]


# -- tokenizer --------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT NUMBER STRING OP PUNCT EOF
    text: str
    line: int
    column: int

    def kw(self, word: str) -> bool:
        return self.kind == "IDENT" and self.text.upper() == word


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f]+)
  | (?P<nl>\n)
  | (?P<comment>--[^\n]*)
  | (?P<number>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>'(?:[^'\\\n]|\\.)*')
  | (?P<op>==|!=|<=|>=|<|>|=)
  | (?P<punct>[(),:;\-])
    """,
    re.VERBOSE,
)


_ESCAPES = {"t": "\t", "n": "\n", "r": "\r"}


class SyntaxErr(Exception):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(message)
        self.line = line
        self.column = column


def tokenize(text: str, first_line: int = 1) -> list[Token]:
    tokens = []
    line, line_start, pos = first_line, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            bad = text[pos]
            if bad == "'":
                raise SyntaxErr("Unterminated string literal", line, col)
            raise SyntaxErr(f"Unexpected character '{bad}'", line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "string":
            body = re.sub(r"\\(.)", lambda e: _ESCAPES.get(e.group(1), e.group(1)), chunk[1:-1])
            tokens.append(Token("STRING", body, line, col))
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind.upper(), chunk, line, col))
        pos = m.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens


# -- parser -----------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    @property
    def cur(self) -> Token:
        return self.toks[self.i]

    def advance(self) -> Token:
        tok = self.toks[self.i]
        if tok.kind != "EOF":
            self.i += 1
        return tok

    def fail(self, message: str, tok: Token | None = None):
        tok = tok or self.cur
        raise SyntaxErr(message, tok.line, tok.column)

    def _found(self, tok: Token) -> str:
        return "end of input" if tok.kind == "EOF" else f"'{tok.text}'"

    def expect_kw(self, word: str) -> Token:
        if not self.cur.kw(word):
            self.fail(f"Expected {word} but found {self._found(self.cur)}")
        return self.advance()

    def expect(self, kind: str, text: str | None = None, what: str | None = None) -> Token:
        tok = self.cur
        if tok.kind != kind or (text is not None and tok.text != text):
            self.fail(f"Expected {what or text or kind.lower()} but found {self._found(tok)}")
        return self.advance()

    def ident(self, what: str) -> Token:
        return self.expect("IDENT", what=what)

    # statements

    def statement(self) -> Statement:
        first = self.cur
        if first.kw("DESCRIBE") or first.kw("DUMP"):
            self.advance()
            name = self.ident("alias")
            self.expect("PUNCT", ";")
            pos = Pos(name.line, name.column)
            return Describe(name.text, pos) if first.kw("DESCRIBE") else Dump(name.text, pos)
        alias = self.ident("statement")
        self.expect("OP", "=", what="'='")
        op = self.cur
        if op.kw("LOAD"):
            stmt = self.load(alias)
        elif op.kw("FILTER"):
            stmt = self.filter(alias)
        elif op.kw("GROUP"):
            stmt = self.group(alias)
        elif op.kw("FOREACH"):
            stmt = self.foreach(alias)
        else:
            self.fail(f"Unsupported operator {self._found(op)}")
        self.expect("PUNCT", ";")
        return stmt

    def load(self, alias: Token) -> Load:
        start = self.advance()
        path = self.expect("STRING", what="quoted path")
        delimiter = DEFAULT_DELIMITER
        if self.cur.kw("USING"):
            self.advance()
            func = self.ident("load function")
            if func.text != "PigStorage":
                self.fail(f"Unsupported load function '{func.text}'", func)
            self.expect("PUNCT", "(")
            if self.cur.kind == "STRING":
                delimiter = self.advance().text
                if len(delimiter) != 1:
                    self.fail("Delimiter must be a single character")
            self.expect("PUNCT", ")")
        self.expect_kw("AS")
        self.expect("PUNCT", "(")
        fields = [self.field_def()]
        while self.cur.kind == "PUNCT" and self.cur.text == ",":
            self.advance()
            fields.append(self.field_def())
        self.expect("PUNCT", ")")
        seen = set()
        for name_tok, f in fields:
            if f.name in seen:
                self.fail(f"Duplicate field name '{f.name}' in schema", name_tok)
            seen.add(f.name)
        return Load(alias.text, path.text, delimiter, Schema(tuple(f for _, f in fields)), Pos(start.line, start.column))

    def field_def(self) -> tuple[Token, Field]:
        name = self.ident("field name")
        self.expect("PUNCT", ":")
        typ = self.ident("field type")
        if typ.text.lower() not in LOAD_TYPES:
            self.fail(f"Unsupported field type '{typ.text}'", typ)
        return name, Field(name.text, typ.text.lower())

    def filter(self, alias: Token) -> Filter:
        start = self.advance()
        src = self.ident("alias")
        self.expect_kw("BY")
        pred = self.predicate()
        return Filter(alias.text, src.text, pred, Pos(start.line, start.column), Pos(src.line, src.column))

    def group(self, alias: Token) -> GroupAll:
        start = self.advance()
        src = self.ident("alias")
        self.expect_kw("ALL")
        return GroupAll(alias.text, src.text, Pos(start.line, start.column), Pos(src.line, src.column))

    def foreach(self, alias: Token) -> Count:
        start = self.advance()
        src = self.ident("alias")
        self.expect_kw("GENERATE")
        self.expect_kw("COUNT")
        self.expect("PUNCT", "(")
        bag = self.ident("bag name")
        self.expect("PUNCT", ")")
        return Count(
            alias.text,
            src.text,
            bag.text,
            Pos(start.line, start.column),
            Pos(src.line, src.column),
            Pos(bag.line, bag.column),
        )

    # predicates

    def predicate(self) -> Predicate:
        left = self.conjunction()
        while self.cur.kw("OR"):
            self.advance()
            left = Or(left, self.conjunction())
        return left

    def conjunction(self) -> Predicate:
        left = self.negation()
        while self.cur.kw("AND"):
            self.advance()
            left = And(left, self.negation())
        return left

    def negation(self) -> Predicate:
        if self.cur.kw("NOT"):
            self.advance()
            return Not(self.negation())
        if self.cur.kind == "PUNCT" and self.cur.text == "(":
            self.advance()
            inner = self.predicate()
            self.expect("PUNCT", ")")
            return inner
        left = self.operand()
        if self.cur.kind != "OP" or self.cur.text == "=":
            self.fail(f"Expected comparison operator but found {self._found(self.cur)}")
        op = self.advance().text
        return Compare(op, left, self.operand())

    def operand(self) -> Operand:
        tok = self.cur
        negative = False
        if tok.kind == "PUNCT" and tok.text == "-":
            self.advance()
            negative = True
            tok = self.cur
            if tok.kind != "NUMBER":
                self.fail(f"Expected number after '-' but found {self._found(tok)}")
        if tok.kind == "NUMBER":
            self.advance()
            text = ("-" if negative else "") + tok.text
            if re.fullmatch(r"-?\d+", text):
                return Literal(int(text), "int")
            return Literal(float(text), "double")
        if tok.kind == "STRING":
            self.advance()
            return Literal(tok.text, "chararray")
        if tok.kind == "IDENT" and tok.text.upper() not in ("AND", "OR", "NOT"):
            self.advance()
            return FieldRef(tok.text, tok.line, tok.column)
        self.fail(f"Expected field or literal but found {self._found(tok)}")

    def recover(self) -> None:
        while self.cur.kind != "EOF":
            if self.advance().text == ";":
                return


def _statement_alias(tokens: list[Token], start: int) -> str | None:
    if start + 1 < len(tokens) and tokens[start].kind == "IDENT" and tokens[start + 1].text == "=":
        return tokens[start].text
    return None


def parse(text: str, first_line: int = 1) -> list[Statement]:
    """Parse a script into statements in source order.

    A statement with a syntax error becomes an ``Invalid`` node carrying its
    diagnostic; parsing resumes after the next ``;``.
    """
    try:
        tokens = tokenize(text, first_line)
    except SyntaxErr as exc:
        return [Invalid(None, Diagnostic(Severity.ERROR, SYNTAX_ERROR, str(exc), (exc.line, exc.column)))]
    parser = _Parser(tokens)
    out: list[Statement] = []
    while parser.cur.kind != "EOF":
        start = parser.i
        try:
            out.append(parser.statement())
        except SyntaxErr as exc:
            diag = Diagnostic(Severity.ERROR, SYNTAX_ERROR, str(exc), (exc.line, exc.column))
            out.append(Invalid(_statement_alias(tokens, start), diag))
            if parser.i == start:
                parser.advance()
            if parser.toks[parser.i - 1].text != ";":
                parser.recover()
    return out


def strip_url(path: str) -> str:
    """Drop a ``scheme://host:port`` prefix, keeping the absolute path."""
    return re.sub(r"^[A-Za-z][A-Za-z0-9+.-]*://[^/]*", "", path)
