"""Per-cycle job dispatch across grid systems.

Strategies:

* ``MCMF``     - min-cost max-flow on blended response-time / energy-cost arcs
* ``INST``     - MCMF assuming every job starts immediately (zero predicted wait)
* ``TWOPRICE`` - MCMF with a two-level (on/off-peak) tariff instead of hourly prices
* ``STABLE``   - job-proposing deferred acceptance (jobs rank by response,
  systems rank by energy cost), capacity MaxQ per system
* ``BS``       - every job runs at its origin system
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Callable, Mapping, Protocol, Sequence

import numpy as np

from .batchsim import QueueSnapshot
from .grid import GridConfig, SystemConfig, compatible, job_power, scale_runtime, transfer_time
from .mcmf import build_network, extract_assignments, solve_mcmf
from .price import PriceBook, TwoPriceBook
from .qwait import History, PredictorParams, featurize
from .workload import ConfigError, Job

STRATEGIES = ("MCMF", "BS", "INST", "TWOPRICE", "STABLE")
PERTURB_HOURS = (0, 1, 3, 6, 12, 24)
COST_SCALE = 100


class PriceSource(Protocol):
    def reveal(self, now_seconds: float) -> None: ...
    def price_at(self, zone: str, hour: int) -> float: ...


# wait predictor: (job scaled to system, system name, snapshot) -> seconds
WaitPredictor = Callable[[Job, str, QueueSnapshot], float]


@dataclass(frozen=True)
class CostTerms:
    job_id: int
    system: str
    t_s: float
    t_e: float
    response: float
    energy_cost: float
    c_t: float = 0.0
    c_e: float = 0.0
    c: float = 0.0


@dataclass(frozen=True)
class CycleDecision:
    time: int
    assignments: tuple[tuple[int, str], ...]
    pending_carryover: tuple[int, ...]
    rejected: tuple[int, ...] = ()
    terms: tuple[CostTerms, ...] = ()

    def to_json(self) -> str:
        return json.dumps({
            "time": self.time,
            "assignments": [list(a) for a in self.assignments],
            "carryover": list(self.pending_carryover),
            "rejected": list(self.rejected),
            "terms": [t.__dict__ for t in self.terms],
        }, sort_keys=True)


def response_with_transfer(comm_t: float, qw_t: float, exec_t: float) -> float:
    return max(comm_t, qw_t) + exec_t


def perturb_wait(predicted: float, threshold_hours: int, rng: np.random.Generator | int) -> float:
    """Add a uniform integer offset in [1, threshold_hours*3600] seconds (identity for 0)."""
    if threshold_hours not in PERTURB_HOURS:
        raise ConfigError(f"perturbation threshold must be one of {PERTURB_HOURS}")
    if threshold_hours == 0:
        return predicted
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return predicted + int(rng.integers(1, threshold_hours * 3600, endpoint=True))


def energy_cost(power_w: float, start: float, end: float, price_of_hour: Callable[[int], float]) -> float:
    """Energy cost of drawing ``power_w`` over [start, end) seconds; partial hours pro-rated."""
    if end <= start:
        return 0.0
    kw = power_w / 1000.0
    total = 0.0
    h = math.floor(start / 3600)
    while h * 3600 < end:
        overlap = min(end, (h + 1) * 3600) - max(start, h * 3600)
        total += kw * overlap / 3600.0 * price_of_hour(h)
        h += 1
    return total


def compute_cost_terms(job: Job, src: SystemConfig, dst: SystemConfig, now: float, wait: float,
                       prices: PriceSource, transfer: bool = False) -> CostTerms:
    """Predicted start/end, response and energy cost of running ``job`` on ``dst``."""
    ert = scale_runtime(job.ert, src, dst)
    comm = transfer_time(job, src, dst) if transfer else 0.0
    t_s = now + max(comm, wait)
    t_e = t_s + ert
    if dst.fixed_price is not None:
        price = lambda h: dst.fixed_price  # noqa: E731
    else:
        price = lambda h: prices.price_at(dst.price_zone, h)  # noqa: E731
    cost = energy_cost(job_power(job, dst), t_s, t_e, price)
    return CostTerms(job.id, dst.name, float(t_s), float(t_e), float(t_e - job.submit_time), cost)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def normalize_costs(terms: Sequence[Sequence[CostTerms | None]], w_t: float
                    ) -> tuple[list[list[int | None]], list[list[CostTerms | None]]]:
    """Min-max normalize response and energy over the cycle and blend them.

    Returns the integer cost matrix (0..100) and the terms with c_t, c_e, c filled.
    A term whose max equals its min contributes 0 for every pair.
    """
    flat = [t for row in terms for t in row if t is not None]
    if not flat:
        return [[None] * len(row) for row in terms], [list(row) for row in terms]
    t_min = min(t.response for t in flat)
    t_max = max(t.response for t in flat)
    e_min = min(t.energy_cost for t in flat)
    e_max = max(t.energy_cost for t in flat)
    costs, out = [], []
    for row in terms:
        crow, trow = [], []
        for t in row:
            if t is None:
                crow.append(None)
                trow.append(None)
                continue
            c_t = (t.response - t_min) / (t_max - t_min) if t_max > t_min else 0.0
            c_e = (t.energy_cost - e_min) / (e_max - e_min) if e_max > e_min else 0.0
            c = (w_t * c_t + (100.0 - w_t) * c_e) / 100.0
            crow.append(_round_half_up(COST_SCALE * c))
            trow.append(replace(t, c_t=c_t, c_e=c_e, c=c))
        costs.append(crow)
        out.append(trow)
    return costs, out


def deferred_acceptance(job_prefs: Sequence[Sequence[int]], sys_rank: Sequence[Mapping[int, float]],
                        capacity: Sequence[int]) -> dict[int, int]:
    """Job-proposing deferred acceptance with system capacities.

    ``job_prefs[j]`` lists systems in decreasing preference; ``sys_rank[s][j]``
    is system s's rank key for job j (lower is better). Returns job -> system
    for matched jobs.
    """
    nxt = [0] * len(job_prefs)
    held: list[list[int]] = [[] for _ in capacity]
    free = list(range(len(job_prefs)))
    while free:
        j = free.pop(0)
        if nxt[j] >= len(job_prefs[j]):
            continue
        s = job_prefs[j][nxt[j]]
        nxt[j] += 1
        held[s].append(j)
        held[s].sort(key=lambda x: (sys_rank[s][x], x))
        if len(held[s]) > capacity[s]:
            free.append(held[s].pop())
    return {j: s for s, js in enumerate(held) for j in js}


class WaitHistories:
    """Per-system wait predictor backed by sliding submission histories."""

    def __init__(self, systems: Sequence[str], params: PredictorParams | None = None):
        self.params = params or PredictorParams()
        self.histories = {s: History(self.params) for s in systems}

    def record(self, system: str, features, observed_wait: float):
        self.histories[system].add(features, observed_wait)

    def __call__(self, job: Job, system: str, snap: QueueSnapshot) -> float:
        h = self.histories[system]
        if not len(h):
            return 0.0
        return h.predict(featurize(job, snap))


def zero_wait(job: Job, system: str, snap: QueueSnapshot) -> float:
    return 0.0


class Metascheduler:
    def __init__(self, grid: GridConfig, prices: PriceBook, strategy: str = "MCMF",
                 predictor: WaitPredictor = zero_wait, w_t: float | None = None,
                 max_q: int | None | str = "grid", transfer: bool = False,
                 perturb_hours: int = 0, seed: int = 0,
                 price_period: tuple[int, int] | None = None):
        strategy = strategy.upper()
        if strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
        if perturb_hours not in PERTURB_HOURS:
            raise ConfigError(f"perturbation threshold must be one of {PERTURB_HOURS}")
        self.grid = grid
        self.strategy = strategy
        self.predictor = predictor
        self.w_t = grid.w_t if w_t is None else float(w_t)
        self.max_q = grid.max_q if max_q == "grid" else max_q
        self.transfer = transfer
        self.perturb_hours = perturb_hours
        self.rng = np.random.default_rng(seed)
        if strategy == "TWOPRICE":
            if price_period is None:
                raise ConfigError("TWOPRICE needs the simulation period (start_hour, end_hour)")
            self.prices: PriceSource = TwoPriceBook(prices, *price_period)
        else:
            self.prices = prices
        self._by_name = {s.name: s for s in grid.systems}

    def _wait(self, scaled: Job, sys: SystemConfig, snap: QueueSnapshot) -> float:
        if self.strategy == "INST":
            return 0.0
        w = float(self.predictor(scaled, sys.name, snap))
        return perturb_wait(w, self.perturb_hours, self.rng)

    def cost_terms(self, pending: Sequence[Job], now: int,
                   snapshots: Mapping[str, QueueSnapshot]) -> list[list[CostTerms | None]]:
        rows = []
        for job in pending:
            src = self._by_name[job.origin_system]
            row = []
            for dst in self.grid.systems:
                ert = scale_runtime(job.ert, src, dst)
                if not compatible(job, dst, ert):
                    row.append(None)
                    continue
                scaled = replace(job, ert=ert, run_time=scale_runtime(job.run_time, src, dst))
                wait = self._wait(scaled, dst, snapshots[dst.name])
                row.append(compute_cost_terms(job, src, dst, now, wait, self.prices, self.transfer))
            rows.append(row)
        return rows

    def run_cycle(self, pending: Sequence[Job], now: int,
                  snapshots: Mapping[str, QueueSnapshot]) -> CycleDecision:
        pending = sorted(pending, key=lambda j: (j.submit_time, j.id))
        if self.strategy == "BS":
            return self._local(pending, now)
        self.prices.reveal(now)
        terms = self.cost_terms(pending, now, snapshots)
        rejected = [j.id for j, row in zip(pending, terms) if all(t is None for t in row)]
        keep = [(j, row) for j, row in zip(pending, terms) if any(t is not None for t in row)]
        jobs = [j for j, _ in keep]
        terms = [row for _, row in keep]
        names = self.grid.names
        costs, normed = normalize_costs(terms, self.w_t)
        if self.strategy == "STABLE":
            pairs = self._stable(normed)
        else:
            pairs = extract_assignments(solve_mcmf(build_network(costs, self.max_q))) if jobs else []
        assigned = {i for i, _ in pairs}
        return CycleDecision(
            time=now,
            assignments=tuple((jobs[i].id, names[k]) for i, k in pairs),
            pending_carryover=tuple(j.id for i, j in enumerate(jobs) if i not in assigned),
            rejected=tuple(rejected),
            terms=tuple(t for row in normed for t in row if t is not None),
        )

    def _local(self, pending: Sequence[Job], now: int) -> CycleDecision:
        assignments, rejected = [], []
        for j in pending:
            if compatible(j, self._by_name[j.origin_system]):
                assignments.append((j.id, j.origin_system))
            else:
                rejected.append(j.id)
        return CycleDecision(now, tuple(assignments), (), tuple(rejected))

    def _stable(self, terms: list[list[CostTerms | None]]) -> list[tuple[int, int]]:
        n_sys = len(self.grid.systems)
        prefs = []
        rank: list[dict[int, float]] = [{} for _ in range(n_sys)]
        for i, row in enumerate(terms):
            opts = [(t.response, k) for k, t in enumerate(row) if t is not None]
            prefs.append([k for _, k in sorted(opts)])
            for k, t in enumerate(row):
                if t is not None:
                    rank[k][i] = t.energy_cost
        cap = len(terms) if self.max_q is None else self.max_q
        match = deferred_acceptance(prefs, rank, [cap] * n_sys)
        return sorted(match.items())
