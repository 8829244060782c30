"""Analytic job-timing model and a Monte-Carlo check of its averages.

Symbols per processing unit: propagation delay ``dp``, transmission time
``p`` and processing time ``tp`` (all seconds).  ``t_w`` (waiting time) is
carried for reporting only; no formula uses it.

Averages are ratios of time to an observation window: the single-unit
average divides by a caller-supplied ``T_total`` and the system average by
the sum of per-unit windows ``T_i``.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from cloudmr.errors import InvalidProbability, NegativeInput, NonPositiveWindow


def _check_nonneg(**values: float) -> None:
    for name, v in values.items():
        if not (v >= 0 and math.isfinite(v)):
            raise NegativeInput(f"{name} must be finite and non-negative, got {v!r}")


def _check_window(name: str, v: float) -> None:
    if not (v > 0 and math.isfinite(v)):
        raise NonPositiveWindow(f"{name} must be positive, got {v!r}")


@dataclass(frozen=True)
class NodeTimingProfile:
    dp: float
    p: float
    tp: float
    t_w: float = 0.0

    def __post_init__(self):
        _check_nonneg(dp=self.dp, p=self.p, tp=self.tp, t_w=self.t_w)


@dataclass(frozen=True)
class SystemTimingProfile:
    units: tuple[NodeTimingProfile, ...]
    windows: tuple[float, ...]
    T_total: float

    def __post_init__(self):
        if len(self.units) < 1:
            raise ValueError("a system needs at least one processing unit")
        if len(self.units) != len(self.windows):
            raise ValueError("one observation window per unit is required")
        for w in self.windows:
            _check_window("T_i", w)
        _check_window("T_total", self.T_total)

    @property
    def m(self) -> int:
        return len(self.units)

    def __add__(self, other: "SystemTimingProfile") -> "SystemTimingProfile":
        return SystemTimingProfile(self.units + other.units, self.windows + other.windows, self.T_total)

    @classmethod
    def from_dict(cls, d: dict) -> "SystemTimingProfile":
        units, windows = [], []
        for u in d["units"]:
            units.append(NodeTimingProfile(u["dp"], u["p"], u["tp"], u.get("t_w", 0.0)))
            windows.append(u["T_i"] if "T_i" in u else u["T"])
        total = d.get("T_total", sum(windows) / len(windows) if windows else 0.0)
        return cls(tuple(units), tuple(windows), total)

    def to_dict(self) -> dict:
        return {
            "units": [dict(asdict(u), T_i=w) for u, w in zip(self.units, self.windows)],
            "T_total": self.T_total,
        }


def load_profile(path: str | os.PathLike) -> SystemTimingProfile:
    with open(path) as fh:
        return SystemTimingProfile.from_dict(json.load(fh))


def single_job_time(dp: float, p: float, tp: float) -> float:
    """Time for one job; with ``dp == 0`` this is the no-delay time ``p + tp``."""
    _check_nonneg(dp=dp, p=p, tp=tp)
    return dp + p + tp


def avg_single_job(dp: float, p: float, tp: float, T_total: float) -> float:
    """Delayed plus undelayed job time per unit of total time."""
    _check_nonneg(dp=dp, p=p, tp=tp)
    _check_window("T_total", T_total)
    return (2 * (p + tp) + dp) / T_total


def system_propagation_delay(profile: SystemTimingProfile) -> float:
    return math.fsum(u.dp for u in profile.units)


def system_total_time(profile: SystemTimingProfile, with_delay: bool) -> float:
    base = math.fsum(u.p for u in profile.units) + math.fsum(u.tp for u in profile.units)
    return system_propagation_delay(profile) + base if with_delay else base


def avg_system(profile: SystemTimingProfile) -> float:
    for w in profile.windows:
        _check_window("T_i", w)
    sum_p = math.fsum(u.p for u in profile.units)
    sum_tp = math.fsum(u.tp for u in profile.units)
    return (system_propagation_delay(profile) + 2 * (sum_p + sum_tp)) / math.fsum(profile.windows)


@dataclass(frozen=True)
class TimingReport:
    """Every model quantity for one system profile.

    The single-job fields describe the mean unit (dp, p, tp averaged over
    units), which is the unit itself when ``m == 1``.
    """

    T_with_delay: float
    T_no_delay: float
    A_t: float
    P_e: float
    T_de: float
    T_e: float
    A_e: float
    m: int
    sum_windows: float
    t_w_total: float = 0.0
    measured: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        rows = [
            ("units (m)", str(self.m)),
            ("T  single job, with delay", f"{self.T_with_delay:.6g}"),
            ("T  single job, no delay", f"{self.T_no_delay:.6g}"),
            ("A_t  single-unit average", f"{self.A_t:.6g}"),
            ("P_e  system propagation delay", f"{self.P_e:.6g}"),
            ("T_de  system time, with delay", f"{self.T_de:.6g}"),
            ("T_e  system time, no delay", f"{self.T_e:.6g}"),
            ("A_e  system average", f"{self.A_e:.6g}"),
            ("sum T_i", f"{self.sum_windows:.6g}"),
            ("t_w total (not modeled)", f"{self.t_w_total:.6g}"),
        ]
        rows += [(f"measured {k} [s]", f"{v:.6g}") for k, v in sorted(self.measured.items())]
        width = max(len(r[0]) for r in rows)
        return "\n".join(f"{name:<{width}}  {value:>12}" for name, value in rows)


def build_report(profile: SystemTimingProfile, measured: dict[str, float] | None = None) -> TimingReport:
    m = profile.m
    dp = math.fsum(u.dp for u in profile.units) / m
    p = math.fsum(u.p for u in profile.units) / m
    tp = math.fsum(u.tp for u in profile.units) / m
    return TimingReport(
        T_with_delay=single_job_time(dp, p, tp),
        T_no_delay=single_job_time(0.0, p, tp),
        A_t=avg_single_job(dp, p, tp, profile.T_total),
        P_e=system_propagation_delay(profile),
        T_de=system_total_time(profile, with_delay=True),
        T_e=system_total_time(profile, with_delay=False),
        A_e=avg_system(profile),
        m=m,
        sum_windows=math.fsum(profile.windows),
        t_w_total=math.fsum(u.t_w for u in profile.units),
        measured=dict(measured or {}),
    )


def simulate(
    profile: SystemTimingProfile,
    delay_probability: float,
    trials: int,
    seed: int,
) -> list[float]:
    """Sample mean job time per unit when each job is delayed with probability q.

    A delayed job takes ``dp + p + tp``, an undelayed one ``p + tp``.  The
    mean is formed as ``(p + tp) + dp * delayed / trials`` which is exact at
    ``q`` of 0 or 1.
    """
    if not 0.0 <= delay_probability <= 1.0:
        raise InvalidProbability(f"delay probability must lie in [0, 1], got {delay_probability!r}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    means = []
    for unit in profile.units:
        delayed = int(np.count_nonzero(rng.random(trials) < delay_probability))
        means.append((unit.p + unit.tp) + unit.dp * (delayed / trials))
    return means


def expected_job_time(unit: NodeTimingProfile, delay_probability: float) -> float:
    return (unit.p + unit.tp) + delay_probability * unit.dp


def make_profile(rows: Sequence[tuple[float, float, float]], windows: Sequence[float], T_total: float | None = None):
    """Convenience constructor from (dp, p, tp) triples."""
    units = tuple(NodeTimingProfile(*r) for r in rows)
    total = T_total if T_total is not None else sum(windows) / len(windows)
    return SystemTimingProfile(units, tuple(windows), total)
