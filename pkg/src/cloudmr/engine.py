"""Two-phase map/reduce execution engine.

Map tasks run one per input block on a bounded worker pool.  Their outputs
meet at a single shuffle barrier that groups values by key in a canonical
order (values sorted by their encoded bytes), after which reduce tasks run
over contiguous slices of the sorted key space.  Because grouping order is
canonical, the output does not depend on the worker count or on where the
input was split into blocks.
"""

from __future__ import annotations

import functools
import json
import math
import operator
import os
import time
from bisect import bisect_right
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from itertools import accumulate, chain
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, NamedTuple, Sequence

from cloudmr.errors import DecodeError, UnknownFunction
from cloudmr.store import BlockStore, FileManifest


class Record(NamedTuple):
    key: Any
    value: Any


# Record(k, v) from a (k, v) tuple without the Python-level NamedTuple
# constructor; built-ins use it on their per-record paths
_record = functools.partial(tuple.__new__, Record)

MapFn = Callable[[Record], Iterable[Record]]
ReduceFn = Callable[[Any, list], Iterable[Record]]

MAPPERS: dict[str, Callable[..., MapFn]] = {}
REDUCERS: dict[str, Callable[..., ReduceFn]] = {}
# reducer name -> reducer that can re-combine its own outputs, if any
COMBINERS: dict[str, str] = {}

GROUP_ALL_KEY = "all"


def register_mapper(name: str):
    def deco(factory):
        MAPPERS[name] = factory
        return factory

    return deco


def register_reducer(name: str, combiner: str | None = None):
    def deco(factory):
        REDUCERS[name] = factory
        if combiner is not None:
            COMBINERS[name] = combiner
        return factory

    return deco


_CANONICAL = json.JSONEncoder(sort_keys=True, separators=(",", ":"), ensure_ascii=False, default=repr)
_DISPLAY = json.JSONEncoder(ensure_ascii=False, default=str)


def encode_value(value: Any) -> bytes:
    return _CANONICAL.encode(value).encode("utf-8")


# -- built-in mappers -----------------------------------------------------


@register_mapper("identity")
def identity_mapper() -> MapFn:
    return lambda rec: (rec,)


@register_mapper("tokenize")
def tokenize_mapper() -> MapFn:
    def fn(rec: Record):
        return [_record((tok, 1)) for tok in str(rec.value).split()]

    return fn


_OPS = {
    "<": operator.lt,
    ">": operator.gt,
    "<=": operator.le,
    ">=": operator.ge,
    "==": operator.eq,
    "!=": operator.ne,
}


@register_mapper("filter")
def filter_mapper(
    predicate: Callable[[Any], bool] | None = None,
    field: int | None = None,
    op: str = "==",
    value: Any = None,
    delimiter: str = ",",
) -> MapFn:
    """Keep records whose value satisfies a predicate.

    Either pass a callable ``predicate`` over the record value, or describe a
    comparison of one delimited field (``field``, ``op``, ``value``).  With
    neither, non-empty values are kept.
    """
    if predicate is None:
        if field is None:
            predicate = bool
        else:
            if op not in _OPS:
                raise UnknownFunction(f"unknown comparison {op!r}")
            cmp = _OPS[op]
            numeric = isinstance(value, (int, float)) and not isinstance(value, bool)

            def predicate(v):
                parts = v.split(delimiter) if isinstance(v, str) else v
                try:
                    item = parts[field]
                    if numeric:
                        item = float(item)
                except (IndexError, ValueError) as exc:
                    raise DecodeError(f"cannot compare field {field} of {v!r}") from exc
                return cmp(item, value)

    def fn(rec: Record):
        return (rec,) if predicate(rec.value) else ()

    return fn


@register_mapper("group-all")
def group_all_mapper() -> MapFn:
    return lambda rec: (_record((GROUP_ALL_KEY, rec[1])),)


# -- built-in reducers ----------------------------------------------------


@register_reducer("identity", combiner="identity")
def identity_reducer() -> ReduceFn:
    return lambda key, values: [_record((key, v)) for v in values]


@register_reducer("sum", combiner="sum")
def sum_reducer() -> ReduceFn:
    """Fold the values with ``+``: numbers add, text and lists concatenate.

    Values arrive in canonical shuffle order, so the fold is deterministic
    even when ``+`` is not commutative.
    """
    return lambda key, values: (_record((key, functools.reduce(operator.add, values))),)


@register_reducer("count", combiner="sum")
def count_reducer() -> ReduceFn:
    return lambda key, values: (_record((key, len(values))),)


@register_reducer("collect")
def collect_reducer(order_by_first: bool = False) -> ReduceFn:
    """Emit one record per key holding the list of its values.

    With ``order_by_first`` the values are (position, payload) pairs and the
    list is restored to position order with positions stripped.
    """

    def fn(key, values):
        if order_by_first:
            values = [v[1] for v in sorted(values, key=operator.itemgetter(0))]
        return (Record(key, list(values)),)

    return fn


def resolve_mapper(mapper: str | MapFn, params: dict | None = None) -> MapFn:
    if callable(mapper):
        return mapper
    try:
        return MAPPERS[mapper](**(params or {}))
    except KeyError:
        raise UnknownFunction(f"no mapper registered as {mapper!r}") from None


def resolve_reducer(reducer: str | ReduceFn, params: dict | None = None) -> ReduceFn:
    if callable(reducer):
        return reducer
    try:
        return REDUCERS[reducer](**(params or {}))
    except KeyError:
        raise UnknownFunction(f"no reducer registered as {reducer!r}") from None


# -- job description ------------------------------------------------------


@dataclass
class JobSpec:
    """A map/reduce job.

    ``input`` is one manifest, a list of manifests, or an in-memory record
    sequence.  ``reducer=None`` makes the job map-only.
    """

    input: FileManifest | Sequence[FileManifest] | Sequence[Record]
    mapper: str | MapFn = "identity"
    reducer: str | ReduceFn | None = "identity"
    num_workers: int = 1
    mapper_params: dict = field(default_factory=dict)
    reducer_params: dict = field(default_factory=dict)
    split_size: int | None = None

    def __post_init__(self):
        if self.num_workers < 1:
            raise ValueError("num_workers must be >= 1")

    @classmethod
    def from_dict(cls, d: dict, store: BlockStore) -> "JobSpec":
        names = d["input"] if isinstance(d["input"], list) else [d["input"]]
        return cls(
            input=[store.manifest(n) for n in names],
            mapper=d.get("mapper", "identity"),
            reducer=d.get("reducer", "identity"),
            num_workers=int(d.get("workers", d.get("num_workers", 1))),
            mapper_params=d.get("mapper_params", {}),
            reducer_params=d.get("reducer_params", {}),
        )


def load_job_file(path: str | os.PathLike) -> dict:
    with open(path) as fh:
        return json.load(fh)


@dataclass
class JobResult:
    output: list[Record]
    phase_timings: dict[str, float]
    blocks_processed: int
    map_input_counts: list[int]

    @property
    def input_records(self) -> int:
        return sum(self.map_input_counts)


# -- phases ---------------------------------------------------------------


def decode_block(data: bytes, base_offset: int = 0) -> list[Record]:
    """Turn a record-aligned text block into (byte offset, line) records."""
    raw = data.split(b"\n")
    if raw and raw[-1] == b"":
        raw.pop()
    if not raw:
        return []
    lengths = [len(r) + 1 for r in raw]
    offsets = list(accumulate(lengths[:-1], initial=base_offset))
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        bad = bisect_right(offsets, base_offset + exc.start) - 1
        raise DecodeError(f"malformed record at byte {offsets[bad]}: {exc.reason}") from None
    lines = text.split("\n")[: len(raw)]
    if "\r" in text:
        lines = [line.rstrip("\r") for line in lines]
    return list(map(_record, zip(offsets, lines)))


def run_map(block: bytes | Sequence[Record], mapper: str | MapFn, base_offset: int = 0) -> list[Record]:
    fn = resolve_mapper(mapper)
    records = decode_block(block, base_offset) if isinstance(block, (bytes, bytearray)) else block
    out: list[Record] = []
    for rec in records:
        out.extend(fn(rec))
    return out


def shuffle(intermediate: Iterable[Record]) -> dict[Any, list]:
    """Group values by key; keys come out sorted, values in canonical order.

    All-text and all-integer buckets sort naturally; anything else sorts by
    its canonical JSON bytes.  Either way the order ignores arrival order.
    """
    groups: defaultdict[Any, list] = defaultdict(list)
    for key, value in intermediate:
        groups[key].append(value)
    result = {}
    for key in sorted(groups):
        values = groups[key]
        if len(values) > 1:
            kinds = set(map(type, values))
            if kinds == {str} or kinds == {int}:
                values.sort()
            else:
                values.sort(key=encode_value)
        result[key] = values
    return result


def _chunks(seq: Sequence, n: int) -> list[Sequence]:
    size = max(1, math.ceil(len(seq) / n))
    return [seq[i : i + size] for i in range(0, len(seq), size)]


class Engine:
    """Runs jobs against a block store with a fixed-size worker pool per job."""

    def __init__(self, store: BlockStore | None = None):
        self.store = store

    def _tasks(self, spec: JobSpec) -> list[Callable[[], list[Record]]]:
        inp = spec.input
        if isinstance(inp, FileManifest):
            inp = [inp]
        if inp and isinstance(inp[0], FileManifest):
            if self.store is None:
                raise ValueError("file input needs a block store")
            tasks = []
            for manifest in inp:
                if len(manifest.blocks) > 1 and not manifest.record_aligned:
                    raise DecodeError(f"{manifest.name} is not record-aligned")
                for bid, offset in zip(manifest.blocks, manifest.block_offsets()):
                    tasks.append(lambda bid=bid, offset=offset: decode_block(self.store.read_block(bid), offset))
            return tasks
        records = list(inp)
        size = spec.split_size or max(1, math.ceil(len(records) / spec.num_workers))
        return [lambda s=records[i : i + size]: s for i in range(0, len(records), size)]

    def run_job(self, spec: JobSpec) -> JobResult:
        mapper = resolve_mapper(spec.mapper, spec.mapper_params)
        reducer = None if spec.reducer is None else resolve_reducer(spec.reducer, spec.reducer_params)
        tasks = self._tasks(spec)
        counts = [0] * len(tasks)

        def map_task(i: int) -> list[Record]:
            records = tasks[i]()
            counts[i] = len(records)
            return list(chain.from_iterable(map(mapper, records)))

        timings: dict[str, float] = {}
        t0 = time.perf_counter()
        with ThreadPoolExecutor(max_workers=spec.num_workers) as pool:
            mapped = list(pool.map(map_task, range(len(tasks))))
            t1 = time.perf_counter()
            timings["map"] = t1 - t0

            if reducer is None:
                output = list(chain.from_iterable(mapped))
                output.sort(key=operator.itemgetter(0))
                timings["shuffle"] = timings["reduce"] = 0.0
            else:
                groups = shuffle(chain.from_iterable(mapped))
                t2 = time.perf_counter()
                timings["shuffle"] = t2 - t1

                def reduce_task(keys):
                    out: list[Record] = []
                    for k in keys:
                        out.extend(reducer(k, groups[k]))
                    return out

                parts = pool.map(reduce_task, _chunks(list(groups), spec.num_workers))
                output = list(chain.from_iterable(parts))
                output.sort(key=operator.itemgetter(0))
                timings["reduce"] = time.perf_counter() - t2
        return JobResult(output, timings, len(tasks), counts)


def run_job(spec: JobSpec, store: BlockStore | None = None) -> JobResult:
    return Engine(store).run_job(spec)


def reference_run(records: Iterable[Record], mapper: MapFn, reducer: ReduceFn | None) -> list[Record]:
    """Sequential reduce(shuffle(map(records))) with no pool and no splitting."""
    intermediate = [out for rec in records for out in mapper(rec)]
    if reducer is None:
        return sorted(intermediate, key=operator.itemgetter(0))
    output = [out for key, values in shuffle(intermediate).items() for out in reducer(key, values)]
    return sorted(output, key=operator.itemgetter(0))


def format_records(records: Iterable[Record]) -> bytes:
    """Client-facing text form: one ``key<TAB>value`` line per record."""
    lines = []
    for key, value in records:
        if isinstance(value, (list, tuple)):
            value = _DISPLAY.encode(value)
        lines.append(f"{key}\t{value}\n")
    return "".join(lines).encode("utf-8")
