"""End-to-end workflow: ingest, classify, route, process per group, combine, persist.

Sources are stored in the block store and measured; each batch is labelled
by its dominant V and routed to one node group.  Every group runs its own
job over the batches it received, groups run concurrently, and the result
module merges their outputs by key (ties broken by group id).  When every
group ran the same job and its reducer can re-combine its own output, the
merged records are reduced once more so that the combined result equals one
job over all sources.
"""

from __future__ import annotations

import json
import operator
import os
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from cloudmr.classify import BatchStats, ClassifierConfig, RoutingTable, VClass, classify, measure, route
from cloudmr.engine import COMBINERS, Engine, JobSpec, Record, encode_value, format_records, resolve_reducer, shuffle
from cloudmr.errors import InvalidConfig
from cloudmr.store import DEFAULT_BLOCK_SIZE, DEFAULT_REPLICATION, BlockStore, FileManifest
from cloudmr.timing import NodeTimingProfile, SystemTimingProfile, TimingReport, build_report

INGEST_PREFIX = "/ingest/"

_WORDS = (
    "alpha beta gamma delta epsilon zeta eta theta iota kappa lambda mu nu xi omicron pi rho sigma tau"
).split()


def generate(spec: dict) -> bytes:
    """Deterministic synthetic source data.

    ``kind`` is ``words`` (space-separated tokens) or ``csv`` (delimited
    rows whose column types cycle through ``shapes`` variants).
    """
    rng = random.Random(spec.get("seed", 0))
    n = int(spec.get("records", 100))
    kind = spec.get("kind", "words")
    lines = []
    if kind == "words":
        vocab = _WORDS[: int(spec.get("vocab", len(_WORDS)))]
        for _ in range(n):
            lines.append(" ".join(rng.choice(vocab) for _ in range(rng.randint(1, 6))))
    elif kind == "csv":
        shapes = int(spec.get("shapes", 1))
        for i in range(n):
            shape = i % shapes
            row = [str(rng.randint(0, 999)), rng.choice(_WORDS)]
            row += [f"{rng.random():.3f}"] * shape
            lines.append(",".join(row))
    else:
        raise InvalidConfig(f"unknown generator kind {kind!r}")
    return "".join(line + "\n" for line in lines).encode("utf-8")


@dataclass
class SourceSpec:
    id: str
    path: str | None = None
    generator: dict | None = None
    data: bytes | None = None
    ingest_window: float = 1.0
    value_score: float = 0.0
    delimiter: str = ","

    def read(self, base_dir: Path | None = None) -> bytes:
        if self.data is not None:
            return self.data
        if self.generator is not None:
            return generate(self.generator)
        if self.path is None:
            raise InvalidConfig(f"source {self.id} has no data origin")
        path = Path(self.path)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return path.read_bytes()

    @classmethod
    def from_dict(cls, d: dict) -> "SourceSpec":
        return cls(
            id=d["id"],
            path=d.get("path"),
            generator=d.get("generator"),
            data=d["data"].encode("utf-8") if isinstance(d.get("data"), str) else None,
            ingest_window=float(d.get("ingest_window", 1.0)),
            value_score=float(d.get("value_score", 0.0)),
            delimiter=d.get("delimiter", ","),
        )


@dataclass
class GroupSpec:
    mapper: str = "identity"
    reducer: str | None = "identity"
    workers: int = 1
    timing: NodeTimingProfile = field(default_factory=lambda: NodeTimingProfile(0.0, 0.0, 0.0))
    window: float = 1.0
    mapper_params: dict = field(default_factory=dict)
    reducer_params: dict = field(default_factory=dict)

    def job_key(self) -> tuple:
        return (
            self.mapper,
            self.reducer,
            json.dumps(self.mapper_params, sort_keys=True),
            json.dumps(self.reducer_params, sort_keys=True),
        )

    @classmethod
    def from_dict(cls, d: dict) -> "GroupSpec":
        job = d.get("job", {})
        t = d.get("timing", {})
        return cls(
            mapper=job.get("mapper", "identity"),
            reducer=job.get("reducer", "identity"),
            workers=int(d.get("workers", 1)),
            timing=NodeTimingProfile(t.get("dp", 0.0), t.get("p", 0.0), t.get("tp", 0.0), t.get("t_w", 0.0)),
            window=float(t.get("T_i", t.get("T", 1.0))),
            mapper_params=job.get("mapper_params", {}),
            reducer_params=job.get("reducer_params", {}),
        )


@dataclass
class PipelineConfig:
    sources: list[SourceSpec]
    routing: RoutingTable
    groups: dict[str, GroupSpec]
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    persist_result: bool = False
    result_name: str = "/results/combined"
    nodes: int = 3
    block_size: int = DEFAULT_BLOCK_SIZE
    replication: int = DEFAULT_REPLICATION
    T_total: float | None = None
    base_dir: Path | None = None

    def validate(self) -> None:
        if not self.sources:
            raise InvalidConfig("a pipeline needs at least one source")
        ids = [s.id for s in self.sources]
        if len(set(ids)) != len(ids):
            raise InvalidConfig("source ids must be distinct")
        missing = self.routing.groups() - set(self.groups)
        if missing:
            raise InvalidConfig(f"routing targets without a group: {', '.join(sorted(missing))}")
        self.classifier.validate()

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | os.PathLike | None = None) -> "PipelineConfig":
        store = d.get("store", {})
        return cls(
            sources=[SourceSpec.from_dict(s) for s in d["sources"]],
            routing=RoutingTable.from_dict(d["routing"]),
            groups={g: GroupSpec.from_dict(spec) for g, spec in d["groups"].items()},
            classifier=ClassifierConfig.from_dict(d.get("classifier", {})),
            persist_result=bool(d.get("persist_result", False)),
            result_name=d.get("result_name", "/results/combined"),
            nodes=int(store.get("nodes", 3)),
            block_size=int(store.get("block_size", DEFAULT_BLOCK_SIZE)),
            replication=int(store.get("replication", DEFAULT_REPLICATION)),
            T_total=d.get("T_total"),
            base_dir=Path(base_dir) if base_dir is not None else None,
        )


def load_pipeline_config(path: str | os.PathLike) -> PipelineConfig:
    path = Path(path)
    with open(path) as fh:
        return PipelineConfig.from_dict(json.load(fh), base_dir=path.parent)


@dataclass
class Ingested:
    source_id: str
    stats: BatchStats
    manifest: FileManifest
    records: int


@dataclass
class PipelineResult:
    combined_output: list[Record]
    per_group_outputs: dict[str, list[Record]]
    timing: TimingReport
    result_manifest: FileManifest | None
    delivered: bytes
    labels: dict[str, VClass]
    assignments: dict[str, str]
    records_ingested: dict[str, int]
    records_processed: dict[str, int]
    wall_clock: dict[str, float]


def count_lines(data: bytes) -> int:
    return data.count(b"\n") + (1 if data and not data.endswith(b"\n") else 0)


def ingest(sources: list[SourceSpec], store: BlockStore, base_dir: Path | None = None) -> list[Ingested]:
    out = []
    for src in sources:
        data = src.read(base_dir)
        stats = measure(data, src.value_score, src.ingest_window, src.delimiter)
        manifest = store.put_file(INGEST_PREFIX + src.id, data, align=b"\n")
        out.append(Ingested(src.id, stats, manifest, count_lines(data)))
    return out


def _mixed_key(key: Any) -> tuple:
    if isinstance(key, (int, float)) and not isinstance(key, bool):
        return (0, key, b"")
    if isinstance(key, str):
        return (1, key, b"")
    return (2, 0, encode_value(key))


def combine(per_group: dict[str, list[Record]], reducer: str | None = None, reducer_params: dict | None = None):
    """Key-sorted merge of group outputs, ties by group id, optionally re-reduced."""
    merged = [rec for gid in sorted(per_group) for rec in per_group[gid]]
    try:
        merged.sort(key=operator.itemgetter(0))
    except TypeError:
        # groups with different jobs can emit keys of unrelated types
        merged.sort(key=lambda rec: _mixed_key(rec[0]))
    if reducer is None:
        return merged
    fn = resolve_reducer(reducer, reducer_params)
    out = [r for key, values in shuffle(merged).items() for r in fn(key, values)]
    out.sort(key=operator.itemgetter(0))
    return out


def run_pipeline(cfg: PipelineConfig, store: BlockStore | None = None) -> PipelineResult:
    cfg.validate()
    if store is None:
        store = BlockStore(cfg.nodes, block_size=cfg.block_size, replication=cfg.replication)
    engine = Engine(store)
    batches = ingest(cfg.sources, store, cfg.base_dir)

    labels: dict[str, VClass] = {}
    assignments: dict[str, str] = {}
    inputs: dict[str, list[Ingested]] = {g: [] for g in cfg.groups}
    for b in batches:
        labels[b.source_id] = classify(b.stats, cfg.classifier)
        gid = route(labels[b.source_id], cfg.routing)
        assignments[b.source_id] = gid
        inputs[gid].append(b)

    def run_group(gid: str):
        spec = cfg.groups[gid]
        job = JobSpec(
            [b.manifest for b in inputs[gid]],
            spec.mapper,
            spec.reducer,
            spec.workers,
            mapper_params=spec.mapper_params,
            reducer_params=spec.reducer_params,
        )
        t0 = time.perf_counter()
        result = engine.run_job(job)
        return gid, result, time.perf_counter() - t0

    active = [g for g in sorted(cfg.groups) if inputs[g]]
    with ThreadPoolExecutor(max_workers=max(1, len(active))) as pool:
        finished = list(pool.map(run_group, active))

    per_group = {gid: res.output for gid, res, _ in finished}
    processed = {gid: res.input_records for gid, res, _ in finished}
    wall = {gid: secs for gid, _, secs in finished}

    jobs = {cfg.groups[g].job_key() for g in active}
    reducer = None
    reducer_params: dict[str, Any] = {}
    if len(jobs) == 1:
        spec = cfg.groups[active[0]]
        if spec.reducer in COMBINERS:
            reducer = COMBINERS[spec.reducer]
            reducer_params = spec.reducer_params if reducer == spec.reducer else {}
    combined = combine(per_group, reducer, reducer_params)
    delivered = format_records(combined)

    ordered = sorted(cfg.groups)
    profile = SystemTimingProfile(
        tuple(cfg.groups[g].timing for g in ordered),
        tuple(cfg.groups[g].window for g in ordered),
        cfg.T_total if cfg.T_total is not None else sum(cfg.groups[g].window for g in ordered) / len(ordered),
    )
    timing = build_report(profile, measured={f"group {g}": s for g, s in wall.items()})

    manifest = store.put_file(cfg.result_name, delivered, align=b"\n") if cfg.persist_result else None
    return PipelineResult(
        combined_output=combined,
        per_group_outputs=per_group,
        timing=timing,
        result_manifest=manifest,
        delivered=delivered,
        labels=labels,
        assignments=assignments,
        records_ingested={b.source_id: b.records for b in batches},
        records_processed=processed,
        wall_clock=wall,
    )
