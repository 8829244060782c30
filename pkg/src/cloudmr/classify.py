"""Four-V batch classification and routing to designated node groups."""

from __future__ import annotations

import enum
import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from cloudmr.errors import EmptyBatch, InvalidConfig


class VClass(str, enum.Enum):
    VOLUME = "VOLUME"
    VELOCITY = "VELOCITY"
    VARIETY = "VARIETY"
    VALUE = "VALUE"


DEFAULT_TIE_ORDER = (VClass.VOLUME, VClass.VELOCITY, VClass.VARIETY, VClass.VALUE)


@dataclass(frozen=True)
class BatchStats:
    volume_bytes: float
    arrival_rate: float
    schema_kinds: int
    value_score: float

    def __post_init__(self):
        if self.volume_bytes < 0 or self.arrival_rate < 0:
            raise ValueError("volume and arrival rate must be non-negative")
        if self.schema_kinds < 1:
            raise ValueError("schema_kinds must be a positive integer")
        if not 0.0 <= self.value_score <= 1.0:
            raise ValueError("value_score must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "volume_bytes": self.volume_bytes,
            "arrival_rate": self.arrival_rate,
            "schema_kinds": self.schema_kinds,
            "value_score": self.value_score,
        }


@dataclass(frozen=True)
class ClassifierConfig:
    """Reference scales that normalize each V into a comparable score.

    ``value_ref`` defaults to 1 because value scores arrive normalized; it is
    kept as a scale so that rescaling every reference leaves argmax unchanged.
    """

    volume_ref: float = 64 * 1024 * 1024
    velocity_ref: float = 1024 * 1024
    variety_ref: float = 4
    value_ref: float = 1.0
    tie_order: tuple[VClass, ...] = DEFAULT_TIE_ORDER

    def validate(self) -> None:
        for name in ("volume_ref", "velocity_ref", "variety_ref", "value_ref"):
            if not getattr(self, name) > 0:
                raise InvalidConfig(f"{name} must be positive")
        if sorted(self.tie_order) != sorted(VClass):
            raise InvalidConfig("tie_order must list each label exactly once")

    def scaled(self, factor: float) -> "ClassifierConfig":
        return ClassifierConfig(
            self.volume_ref * factor,
            self.velocity_ref * factor,
            self.variety_ref * factor,
            self.value_ref * factor,
            self.tie_order,
        )

    @classmethod
    def from_dict(cls, d: Mapping) -> "ClassifierConfig":
        kwargs = {k: d[k] for k in ("volume_ref", "velocity_ref", "variety_ref", "value_ref") if k in d}
        if "tie_order" in d:
            kwargs["tie_order"] = tuple(VClass(x) for x in d["tie_order"])
        return cls(**kwargs)


def scores(stats: BatchStats, cfg: ClassifierConfig) -> dict[VClass, float]:
    cfg.validate()
    return {
        VClass.VOLUME: stats.volume_bytes / cfg.volume_ref,
        VClass.VELOCITY: stats.arrival_rate / cfg.velocity_ref,
        VClass.VARIETY: stats.schema_kinds / cfg.variety_ref,
        VClass.VALUE: stats.value_score / cfg.value_ref,
    }


def classify(stats: BatchStats, cfg: ClassifierConfig = ClassifierConfig()) -> VClass:
    """Label a batch with its dominant V.

    Scores are compared as exact rationals so that ties and rescaled configs
    are not at the mercy of division rounding.
    """
    cfg.validate()
    exact = {
        VClass.VOLUME: Fraction(stats.volume_bytes) / Fraction(cfg.volume_ref),
        VClass.VELOCITY: Fraction(stats.arrival_rate) / Fraction(cfg.velocity_ref),
        VClass.VARIETY: Fraction(stats.schema_kinds) / Fraction(cfg.variety_ref),
        VClass.VALUE: Fraction(stats.value_score) / Fraction(cfg.value_ref),
    }
    best = cfg.tie_order[0]
    for label in cfg.tie_order[1:]:
        if exact[label] > exact[best]:
            best = label
    return best


@dataclass(frozen=True)
class RoutingTable:
    targets: Mapping[VClass, str] = field(default_factory=dict)

    def __post_init__(self):
        missing = [v.value for v in VClass if v not in self.targets]
        if missing:
            raise InvalidConfig(f"routing table has no target for {', '.join(missing)}")

    @classmethod
    def constant(cls, group: str) -> "RoutingTable":
        return cls({v: group for v in VClass})

    @classmethod
    def from_dict(cls, d: Mapping[str, str]) -> "RoutingTable":
        return cls({VClass(k): g for k, g in d.items()})

    def groups(self) -> set[str]:
        return set(self.targets.values())


def route(label: VClass, table: RoutingTable) -> str:
    return table.targets[label]


def load_classifier_file(path: str | os.PathLike) -> tuple[ClassifierConfig, RoutingTable | None]:
    """Read ``{"classifier": {...}, "routing": {...}}``; both keys optional."""
    with open(path) as fh:
        doc = json.load(fh)
    cfg = ClassifierConfig.from_dict(doc.get("classifier", {}))
    cfg.validate()
    table = RoutingTable.from_dict(doc["routing"]) if "routing" in doc else None
    return cfg, table


def _field_type(text: str) -> str:
    try:
        int(text)
        return "int"
    except ValueError:
        pass
    try:
        float(text)
        return "float"
    except ValueError:
        return "chararray"


def record_shape(record: str, delimiter: str = ",") -> tuple[int, tuple[str, ...]]:
    fields = record.split(delimiter)
    return len(fields), tuple(_field_type(f.strip()) for f in fields)


def measure(
    batch: bytes | Sequence[str | bytes],
    value_score: float,
    window: float,
    delimiter: str = ",",
) -> BatchStats:
    """Measure the four Vs of a batch arriving over ``window`` seconds.

    ``batch`` is either the raw bytes of a newline-delimited source (volume is
    then the byte length) or a sequence of records (volume is the sum of
    their UTF-8 lengths).
    """
    if window <= 0:
        raise ValueError("ingest window must be positive")
    if isinstance(batch, (bytes, bytearray)):
        volume = len(batch)
        records: Iterable[str] = [ln for ln in bytes(batch).decode("utf-8").splitlines() if ln]
    else:
        records = [r.decode("utf-8") if isinstance(r, bytes) else r for r in batch]
        volume = sum(len(r.encode("utf-8")) for r in records)
    shapes = {record_shape(r, delimiter) for r in records}
    if not shapes:
        raise EmptyBatch("batch contains no records")
    return BatchStats(
        volume_bytes=volume,
        arrival_rate=volume / window,
        schema_kinds=len(shapes),
        value_score=value_score,
    )
