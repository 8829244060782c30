"""Executes checked statements as map/reduce jobs over the block store."""

from __future__ import annotations

import operator
from dataclasses import dataclass, field
from typing import Any, Callable

from cloudmr.engine import GROUP_ALL_KEY, Engine, JobSpec, Record
from cloudmr.errors import CoercionError
from cloudmr.query.semantics import Checked
from cloudmr.query.syntax import (
    And,
    Compare,
    Count,
    Describe,
    Dump,
    FieldRef,
    Filter,
    GroupAll,
    Literal,
    Load,
    Not,
    Or,
    Predicate,
    Schema,
    strip_url,
)
from cloudmr.store import BlockStore

_OPS = {
    "<": operator.lt,
    ">": operator.gt,
    "<=": operator.le,
    ">=": operator.ge,
    "==": operator.eq,
    "!=": operator.ne,
}
_CONVERTERS = {"int": int, "float": float, "chararray": str}


@dataclass
class Relation:
    schema: Schema
    tuples: list[tuple] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.tuples)


def compile_predicate(pred: Predicate, schema: Schema) -> Callable[[tuple], bool]:
    if isinstance(pred, And):
        a, b = compile_predicate(pred.left, schema), compile_predicate(pred.right, schema)
        return lambda t: a(t) and b(t)
    if isinstance(pred, Or):
        a, b = compile_predicate(pred.left, schema), compile_predicate(pred.right, schema)
        return lambda t: a(t) or b(t)
    if isinstance(pred, Not):
        a = compile_predicate(pred.operand, schema)
        return lambda t: not a(t)
    assert isinstance(pred, Compare)
    left, right, cmp = _operand(pred.left, schema), _operand(pred.right, schema), _OPS[pred.op]
    return lambda t: cmp(left(t), right(t))


def _operand(x: FieldRef | Literal, schema: Schema) -> Callable[[tuple], Any]:
    if isinstance(x, Literal):
        value = x.value
        return lambda t: value
    return operator.itemgetter(schema.index(x.name))


def format_value(v: Any) -> str:
    if isinstance(v, list):
        return "{" + ",".join(format_tuple(t) for t in v) + "}"
    if isinstance(v, tuple):
        return format_tuple(v)
    return str(v)


def format_tuple(t: tuple) -> str:
    return "(" + ",".join(format_value(v) for v in t) + ")"


def row_parser(schema: Schema, delimiter: str) -> Callable[[Record], tuple]:
    convs = [(_CONVERTERS[f.type], f) for f in schema.fields]
    width = len(convs)

    def parse(rec: Record):
        parts = rec.value.split(delimiter)
        if len(parts) != width:
            raise CoercionError(f"expected {width} fields but found {len(parts)}", offset=rec.key)
        try:
            return (Record(rec.key, tuple(conv(p) for (conv, _), p in zip(convs, parts))),)
        except ValueError:
            for (conv, f), p in zip(convs, parts):
                try:
                    conv(p)
                except ValueError:
                    raise CoercionError(
                        f"cannot convert '{p}' to {f.type} for field {f.name}", offset=rec.key
                    ) from None
            raise

    return parse


class Executor:
    """Materializes each alias eagerly; ``run`` returns console output lines."""

    def __init__(self, store: BlockStore, engine: Engine | None = None, num_workers: int = 4):
        self.store = store
        self.engine = engine or Engine(store)
        self.num_workers = num_workers
        self.relations: dict[str, Relation] = {}

    def _job(self, records, mapper, reducer=None, **reducer_params):
        spec = JobSpec(records, mapper, reducer, self.num_workers, reducer_params=reducer_params)
        return self.engine.run_job(spec).output

    def _indexed(self, rel: Relation) -> list[Record]:
        return [Record(i, t) for i, t in enumerate(rel.tuples)]

    def run(self, checked: Checked) -> list[str]:
        stmt = checked.statement
        if isinstance(stmt, Describe):
            return [f"{stmt.alias}: {{{self.relations[stmt.alias].schema.describe()}}}"]
        if isinstance(stmt, Dump):
            return [format_tuple(t) for t in self.relations[stmt.alias].tuples]
        if isinstance(stmt, Load):
            rel = self._load(stmt)
        elif isinstance(stmt, Filter):
            source = self.relations[stmt.source]
            pred = compile_predicate(stmt.predicate, source.schema)
            out = self._job(self._indexed(source), lambda rec: (rec,) if pred(rec.value) else ())
            rel = Relation(checked.schema, [r.value for r in out])
        elif isinstance(stmt, GroupAll):
            source = self.relations[stmt.source]
            positioned = [Record(i, (i, t)) for i, t in enumerate(source.tuples)]
            out = self._job(positioned, "group-all", "collect", order_by_first=True)
            bag = out[0].value if out else []
            rel = Relation(checked.schema, [(GROUP_ALL_KEY, bag)])
        elif isinstance(stmt, Count):
            grouped = self.relations[stmt.source]
            idx = grouped.schema.index(stmt.bag)
            records = [Record(i, t) for group in grouped.tuples for i, t in enumerate(group[idx])]
            out = self._job(records, "group-all", "count")
            rel = Relation(checked.schema, [(out[0].value if out else 0,)])
        else:
            raise TypeError(f"cannot execute {stmt!r}")
        self.relations[stmt.alias] = rel
        return []

    def _load(self, stmt: Load) -> Relation:
        name = strip_url(stmt.path)
        manifest = self.store.manifest(name)
        spec = JobSpec(manifest, row_parser(stmt.schema, stmt.delimiter), None, self.num_workers)
        try:
            out = self.engine.run_job(spec).output
        except CoercionError as exc:
            data = self.store.get_file(name)
            exc.row = data.count(b"\n", 0, exc.offset) + 1
            raise CoercionError(f"{exc} at row {exc.row} of {name}", row=exc.row, offset=exc.offset) from None
        return Relation(stmt.schema, [r.value for r in out])
