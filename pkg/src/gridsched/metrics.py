"""Post-hoc evaluation of a simulated run."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .grid import SystemConfig
from .metascheduler import energy_cost

SMALL_MAX_CPU_HOURS = 512
MEDIUM_MAX_CPU_HOURS = 4096


class MetricsDataError(ValueError):
    pass


@dataclass(frozen=True)
class JobOutcome:
    job_id: int
    origin_system: str
    executed_system: str
    submit_time: int
    start_time: int
    wait_s: int
    run_s: int
    cores: int
    power_w: float
    energy_cost: float
    work_cpu_hours: float  # cores x runtime at the origin system

    @property
    def response_s(self) -> int:
        return self.wait_s + self.run_s


def realized_energy_cost(start: float, run_s: float, power_w: float, sys: SystemConfig, prices) -> float:
    """Cost of the execution window using recorded (never forecast) prices."""
    if sys.fixed_price is not None:
        price = lambda h: sys.fixed_price  # noqa: E731
    else:
        price = lambda h: prices.actual(sys.price_zone, h)  # noqa: E731
    return energy_cost(power_w, start, start + run_s, price)


def bounded_slowdown(wait_s: float, run_s: float, bound: float = 10.0) -> float:
    return max((wait_s + run_s) / max(run_s, bound), 1.0)


def utilization(outcomes: Iterable[JobOutcome], sys: SystemConfig, makespan_s: float) -> float:
    if makespan_s <= 0:
        raise ValueError("makespan must be positive")
    used = sum(o.cores * o.run_s for o in outcomes if o.executed_system == sys.name)
    return used / (sys.total_cores * makespan_s)


def instantaneous_load(system, time: int) -> float:
    """Outstanding core-hours (remaining estimate of running jobs plus full
    estimate of queued jobs) per core of ``system`` (a BatchSystem)."""
    work = sum(r.job.cores * max(0, r.ert_end - time) for r in system.running.values())
    work += sum(q.job.cores * q.job.ert for q in system.queued)
    return work / 3600.0 / system.total_cores


def running_power(system, power_of: Mapping[int, float]) -> float:
    return sum(power_of[jid] for jid in system.running)


def geometric_mean(xs: Sequence[float]) -> float:
    if not xs:
        return float("nan")
    return math.exp(math.fsum(math.log(x) for x in xs) / len(xs))


def fairness_scores(grid: Iterable[JobOutcome], baseline: Iterable[JobOutcome]) -> dict[str, float]:
    """Per origin system, geometric mean of baseline / grid response over its jobs."""
    base = {o.job_id: o for o in baseline}
    per_sys: dict[str, list[float]] = {}
    seen = set()
    for o in grid:
        b = base.get(o.job_id)
        if b is None:
            raise MetricsDataError(f"job {o.job_id} missing from baseline run")
        seen.add(o.job_id)
        per_sys.setdefault(o.origin_system, []).append(max(b.response_s, 1) / max(o.response_s, 1))
    extra = set(base) - seen
    if extra:
        raise MetricsDataError(f"job {min(extra)} missing from grid run")
    return {s: geometric_mean(v) for s, v in sorted(per_sys.items())}


def size_class(cpu_hours: float) -> str:
    if cpu_hours < SMALL_MAX_CPU_HOURS:
        return "small"
    if cpu_hours <= MEDIUM_MAX_CPU_HOURS:
        return "medium"
    return "large"


def class_savings(grid: Iterable[JobOutcome], baseline: Iterable[JobOutcome]) -> dict[str, dict]:
    """Mean per-job response (minutes) and cost savings relative to the baseline, by size class."""
    base = {o.job_id: o for o in baseline}
    acc: dict[str, list[tuple[float, float]]] = {}
    for o in grid:
        b = base[o.job_id]
        acc.setdefault(size_class(o.work_cpu_hours), []).append(
            ((b.response_s - o.response_s) / 60.0, b.energy_cost - o.energy_cost))
    out = {}
    for cls in ("small", "medium", "large"):
        v = acc.get(cls, [])
        out[cls] = {
            "jobs": len(v),
            "mean_response_saving_min": math.fsum(x for x, _ in v) / len(v) if v else 0.0,
            "mean_cost_saving": math.fsum(y for _, y in v) / len(v) if v else 0.0,
        }
    return out


@dataclass
class HourlySample:
    hour: int
    system: str
    load: float
    power_w: float


@dataclass
class Report:
    outcomes: list[JobOutcome]
    systems: tuple[SystemConfig, ...]
    hourly: list[HourlySample] = field(default_factory=list)
    rejected: list[int] = field(default_factory=list)
    fairness: dict[str, float] | None = None
    savings_by_class: dict[str, dict] | None = None
    decisions: list = field(default_factory=list)  # per-cycle audit, when enabled

    @property
    def makespan_s(self) -> int:
        if not self.outcomes:
            return 0
        first = min(o.submit_time for o in self.outcomes)
        return max(o.start_time + o.run_s for o in self.outcomes) - first

    @property
    def avg_response_minutes(self) -> float:
        if not self.outcomes:
            return 0.0
        return math.fsum(o.response_s for o in self.outcomes) / len(self.outcomes) / 60.0

    @property
    def total_electricity_cost(self) -> float:
        return math.fsum(o.energy_cost for o in self.outcomes)

    @property
    def mean_bounded_slowdown(self) -> float:
        if not self.outcomes:
            return 0.0
        return math.fsum(bounded_slowdown(o.wait_s, o.run_s) for o in self.outcomes) / len(self.outcomes)

    def utilization(self) -> dict[str, float]:
        ms = self.makespan_s
        return {s.name: utilization(self.outcomes, s, ms) if ms > 0 else 0.0 for s in self.systems}

    def summary(self) -> dict:
        per_sys = {}
        util = self.utilization()
        for s in self.systems:
            mine = [o for o in self.outcomes if o.executed_system == s.name]
            per_sys[s.name] = {
                "jobs_executed": len(mine),
                "jobs_originated": sum(o.origin_system == s.name for o in self.outcomes),
                "core_hours": math.fsum(o.cores * o.run_s for o in mine) / 3600.0,
                "electricity_cost": math.fsum(o.energy_cost for o in mine),
                "utilization": util[s.name],
            }
            if self.fairness is not None and s.name in self.fairness:
                per_sys[s.name]["fairness"] = self.fairness[s.name]
        out = {
            "jobs": len(self.outcomes),
            "rejected": list(self.rejected),
            "avg_response_minutes": self.avg_response_minutes,
            "total_electricity_cost": self.total_electricity_cost,
            "mean_bounded_slowdown": self.mean_bounded_slowdown,
            "makespan_s": self.makespan_s,
            "systems": per_sys,
        }
        if self.savings_by_class is not None:
            out["savings_by_class"] = self.savings_by_class
        return out
