"""Alias and field resolution, type checking and warning collection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from cloudmr.query import diagnostics as dg
from cloudmr.query.diagnostics import Diagnostic, Severity
from cloudmr.query.syntax import (
    And,
    Count,
    Describe,
    Dump,
    Field,
    FieldRef,
    Filter,
    GroupAll,
    Invalid,
    Literal,
    Load,
    Not,
    Or,
    Predicate,
    Schema,
    Statement,
    field_refs,
)

NUMERIC = {"int", "long", "float", "double"}
COUNT_SCHEMA = Schema((Field(None, "long"),))


@dataclass(frozen=True)
class Checked:
    """A statement that passed analysis, with the schema of the alias it defines."""

    statement: Statement
    schema: Schema | None = None


def _defines(stmt: Statement) -> str | None:
    if isinstance(stmt, (Describe, Dump)):
        return None
    return stmt.alias


class Analyzer:
    """Checks statements one at a time against a catalog of alias schemas.

    An alias whose defining statement fails (at analysis or at run time) is
    remembered as failed until it is successfully redefined.
    """

    def __init__(self, catalog: dict[str, Schema] | None = None):
        self.catalog: dict[str, Schema] = dict(catalog or {})
        self.failed: set[str] = set()

    def mark_failed(self, alias: str | None) -> None:
        if alias is None:
            return
        self.catalog.pop(alias, None)
        self.failed.add(alias)

    def _define(self, alias: str, schema: Schema) -> None:
        self.catalog[alias] = schema
        self.failed.discard(alias)

    def check(self, stmt: Statement) -> tuple[Checked | None, list[Diagnostic]]:
        if isinstance(stmt, Invalid):
            self.mark_failed(stmt.alias)
            return None, [stmt.diagnostic]
        diags: list[Diagnostic] = []
        schema = self._check(stmt, diags)
        if any(d.severity is Severity.ERROR for d in diags):
            self.mark_failed(_defines(stmt))
            return None, diags
        if _defines(stmt) is not None:
            self._define(stmt.alias, schema)
        return Checked(stmt, schema), diags

    def _source(self, name: str, pos, diags: list[Diagnostic]) -> Schema | None:
        schema = self.catalog.get(name)
        if schema is None:
            diags.append(dg.error(dg.UNDEFINED_ALIAS, f"Undefined alias: {name}", (pos.line, pos.column)))
        return schema

    def _check(self, stmt: Statement, diags: list[Diagnostic]) -> Schema | None:
        if isinstance(stmt, Load):
            return stmt.schema
        if isinstance(stmt, (Describe, Dump)):
            if stmt.alias not in self.catalog:
                diags.append(dg.error(dg.NO_OPERATOR, f"Unable to find an operator for alias {stmt.alias}"))
            return None
        if isinstance(stmt, Filter):
            schema = self._source(stmt.source, stmt.source_pos, diags)
            if schema is not None:
                casts = self._check_predicate(stmt.predicate, schema, diags)
                if casts and not diags:
                    diags.append(Diagnostic(Severity.WARNING, dg.IMPLICIT_CAST, "IMPLICIT_CAST_TO_DOUBLE", None, casts))
            return schema
        if isinstance(stmt, GroupAll):
            schema = self._source(stmt.source, stmt.source_pos, diags)
            if schema is None:
                return None
            return Schema((Field("group", "chararray"), Field(stmt.source, "bag", schema)))
        if isinstance(stmt, Count):
            schema = self._source(stmt.source, stmt.source_pos, diags)
            if schema is None:
                return None
            idx = schema.index(stmt.bag)
            if idx is None:
                diags.append(self._bad_field(stmt.bag, stmt.bag_pos.line, stmt.bag_pos.column, schema))
            elif schema.fields[idx].type != "bag":
                diags.append(
                    dg.error(
                        dg.TYPE_MISMATCH,
                        f"COUNT expects a bag but field [{stmt.bag}] is {schema.fields[idx].type}",
                        (stmt.bag_pos.line, stmt.bag_pos.column),
                    )
                )
            return COUNT_SCHEMA
        raise TypeError(f"unknown statement {stmt!r}")

    @staticmethod
    def _bad_field(name: str, line: int, column: int, schema: Schema) -> Diagnostic:
        return dg.error(
            dg.INVALID_FIELD,
            f"Invalid field projection. Projected field [{name}] does not exist in schema: {schema.compact()}.",
            (line, column),
        )

    def _check_predicate(self, pred: Predicate, schema: Schema, diags: list[Diagnostic]) -> int:
        """Validate ``pred``; return how many implicit casts to double it needs."""
        for ref in field_refs(pred):
            if schema.index(ref.name) is None:
                diags.append(self._bad_field(ref.name, ref.line, ref.column, schema))
                return 0
        return self._casts(pred, schema, diags)

    def _casts(self, pred: Predicate, schema: Schema, diags: list[Diagnostic]) -> int:
        if isinstance(pred, (And, Or)):
            return self._casts(pred.left, schema, diags) + self._casts(pred.right, schema, diags)
        if isinstance(pred, Not):
            return self._casts(pred.operand, schema, diags)
        lt, rt = (_operand_type(x, schema) for x in (pred.left, pred.right))
        if not ((lt in NUMERIC and rt in NUMERIC) or (lt == rt == "chararray")):
            where = pred.left if isinstance(pred.left, FieldRef) else pred.right
            loc = (where.line, where.column) if isinstance(where, FieldRef) else None
            diags.append(dg.error(dg.TYPE_MISMATCH, f"Incompatible types in comparison: {lt} {pred.op} {rt}", loc))
            return 0
        casts = 0
        for a, b in ((pred.left, pred.right), (pred.right, pred.left)):
            if isinstance(a, FieldRef) and isinstance(b, Literal) and b.kind == "double":
                if schema.fields[schema.index(a.name)].type in ("int", "float"):
                    casts += 1
        return casts


def _operand_type(x, schema: Schema) -> str:
    if isinstance(x, Literal):
        return x.kind
    return schema.fields[schema.index(x.name)].type


def analyze(
    statements: Iterable[Statement], catalog: dict[str, Schema] | None = None
) -> tuple[list[Checked], list[Diagnostic]]:
    """Check a whole script; returns the checked plan and all diagnostics in order."""
    analyzer = Analyzer(catalog)
    plan, diags = [], []
    for stmt in statements:
        checked, found = analyzer.check(stmt)
        diags.extend(found)
        if checked is not None:
            plan.append(checked)
    return plan, diags
