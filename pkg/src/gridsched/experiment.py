"""Experiment runner: drives per-system simulators and the metascheduler through time."""

from __future__ import annotations

import configparser
import csv
import datetime as dt
import heapq
import io
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from .batchsim import START, BatchSystem
from .grid import (GridConfig, SystemConfig, compatible, job_power, load_grid_config,
                   sample_power_multipliers, scale_runtime, transfer_time, POWER_BANDS)
from .metascheduler import PERTURB_HOURS, STRATEGIES, CycleDecision, Metascheduler, WaitHistories
from .metrics import (HourlySample, JobOutcome, Report, bounded_slowdown, class_savings,
                      fairness_scores, instantaneous_load, realized_energy_cost, running_power,
                      size_class)
from .price import PriceBook, PriceSeries, load_price_file
from .qwait import PredictorParams, featurize
from .workload import (ConfigError, GeneratorConfig, Workload, apply_data_sizes, filter_short_jobs,
                       generate_synthetic, parse_gwf, parse_swf)

logger = logging.getLogger(__name__)

# event priorities at equal timestamps
_LOCAL, _CYCLE, _HOUR = 0, 1, 2


class SimulationError(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    grid: GridConfig
    prices: dict[str, PriceSeries]
    workload: Workload
    strategy: str = "MCMF"
    w_t: float | None = None  # None: take from grid
    max_q: int | None | str = "grid"
    cycle_period: int | None = None
    f_g: float = 1.0
    seed: int = 0
    perturb_hours: int = 0
    power_band: str = "hpl"
    transfer: bool = False
    fairness: bool = False
    audit: bool = False
    sim_hours: int | None = None  # TWOPRICE percentile window; defaults to the arrival span
    predictor: PredictorParams = field(default_factory=PredictorParams)
    output_dir: Path | None = None

    def __post_init__(self):
        self.strategy = self.strategy.upper()
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if not 0.0 <= self.f_g <= 1.0:
            raise ConfigError("f_g must lie in [0, 1]")
        if self.perturb_hours not in PERTURB_HOURS:
            raise ConfigError(f"perturb_hours must be one of {PERTURB_HOURS}")
        if self.power_band not in POWER_BANDS:
            raise ConfigError(f"power_band must be one of {sorted(POWER_BANDS)}")
        names = set(self.grid.names)
        for j in self.workload:
            if j.origin_system not in names:
                raise ConfigError(f"job {j.id} originates at unknown system {j.origin_system!r}")
        for s in self.grid.systems:
            if s.price_zone is not None and s.price_zone not in self.prices:
                raise ConfigError(f"system {s.name}: no prices for zone {s.price_zone!r}")

    def seeds(self) -> dict[str, int]:
        kids = np.random.SeedSequence(self.seed).spawn(3)
        return {k: int(c.generate_state(1)[0]) for k, c in zip(("route", "power", "perturb"), kids)}


@dataclass
class RunResult:
    outcomes: list[JobOutcome]
    hourly: list[HourlySample]
    rejected: list[int]
    decisions: list[CycleDecision]
    event_log: list[str]


def simulate(cfg: ExperimentConfig, strategy: str | None = None, f_g: float | None = None,
             predictor=None) -> RunResult:
    """Run one trace through the grid. ``strategy`` / ``f_g`` override the config.

    ``predictor`` replaces the history-based wait predictor (tests use it to
    stub predictions).
    """
    strategy = (strategy or cfg.strategy).upper()
    f_g = cfg.f_g if f_g is None else f_g
    grid = cfg.grid
    by_name = {s.name: s for s in grid.systems}
    period = cfg.cycle_period or grid.cycle_period
    seeds = cfg.seeds()
    jobs = list(cfg.workload)
    job_by_id = {j.id: j for j in jobs}

    # routing is drawn for every job regardless of strategy so runs stay paired
    route = np.random.default_rng(seeds["route"]).random(len(jobs)) < f_g
    if strategy == "BS":
        route[:] = False
    multipliers = sample_power_multipliers(jobs, cfg.power_band, seeds["power"])

    book = PriceBook(cfg.prices)
    arrival_end = max((j.submit_time for j in jobs), default=0)
    sim_hours = cfg.sim_hours or max(24, math.ceil((arrival_end + 1) / 86400) * 24)
    histories = WaitHistories(grid.names, cfg.predictor)
    meta = Metascheduler(grid, book, strategy, predictor=predictor or histories,
                         w_t=cfg.w_t, max_q=cfg.max_q, transfer=cfg.transfer,
                         perturb_hours=cfg.perturb_hours, seed=seeds["perturb"],
                         price_period=(0, sim_hours))
    systems = {s.name: BatchSystem(s) for s in grid.systems}
    features: dict[tuple[str, int], tuple] = {}
    dispatched: dict[int, tuple[str, int, float]] = {}  # job -> (system, dispatch time, comm time)
    power_of: dict[int, float] = {}
    rejected: list[int] = []
    decisions: list[CycleDecision] = []
    hourly: list[HourlySample] = []

    def handle(sysname, events):
        sys = systems[sysname]
        for ev in events:
            if ev.kind == START:
                wait = ev.time - sys.enqueue_times[ev.job_id]
                histories.record(sysname, features.pop((sysname, ev.job_id)), wait)

    def advance_all(t):
        for name in grid.names:
            handle(name, systems[name].advance(t))

    def dispatch(job, dst: SystemConfig, t, comm=0.0):
        src = by_name[job.origin_system]
        scaled = replace(job, ert=scale_runtime(job.ert, src, dst),
                         run_time=scale_runtime(job.run_time, src, dst))
        if not compatible(scaled, dst):
            raise SimulationError(f"t={t}: job {job.id} dispatched to incompatible {dst.name}")
        sys = systems[dst.name]
        handle(dst.name, sys.advance(t))
        features[(dst.name, job.id)] = featurize(scaled, sys.snapshot(t))
        power_of[job.id] = job_power(job, dst, multipliers[job.id])
        dispatched[job.id] = (dst.name, t, comm)
        handle(dst.name, sys.submit(scaled, t))

    heap: list[tuple] = []
    grid_jobs = [j for j, r in zip(jobs, route) if r]
    for j, r in zip(jobs, route):
        if not r:
            heapq.heappush(heap, (j.submit_time, _LOCAL, j.id))
    cycles_scheduled = set()

    def schedule_cycle(t):
        if t not in cycles_scheduled:
            cycles_scheduled.add(t)
            heapq.heappush(heap, (t, _CYCLE, 0))

    for j in grid_jobs:
        schedule_cycle(math.ceil(j.submit_time / period) * period)
    heapq.heappush(heap, (0, _HOUR, 0))

    pending: list = []
    next_grid = 0
    n_cycle = 0
    outstanding = len(jobs)  # not yet dispatched or rejected
    while heap:
        t, kind, key = heapq.heappop(heap)
        if kind == _LOCAL:
            job = job_by_id[key]
            home = by_name[job.origin_system]
            if compatible(job, home):
                dispatch(job, home, t)
            else:
                rejected.append(job.id)
            outstanding -= 1
        elif kind == _CYCLE:
            n_cycle += 1
            advance_all(t)
            while next_grid < len(grid_jobs) and grid_jobs[next_grid].submit_time <= t:
                pending.append(grid_jobs[next_grid])
                next_grid += 1
            if not pending:
                continue
            snaps = {n: systems[n].snapshot(t) for n in grid.names}
            try:
                decision = meta.run_cycle(pending, t, snaps)
            except Exception as exc:
                raise SimulationError(f"cycle {n_cycle} (t={t}): {exc}") from exc
            if cfg.audit:
                decisions.append(decision)
            pend = {j.id: j for j in pending}
            for jid, sysname in decision.assignments:
                job = pend[jid]
                comm = transfer_time(job, by_name[job.origin_system], by_name[sysname]) if cfg.transfer else 0.0
                dispatch(job, by_name[sysname], t, comm)
            rejected.extend(decision.rejected)
            outstanding -= len(decision.assignments) + len(decision.rejected)
            pending = [pend[i] for i in decision.pending_carryover]
            if pending:
                schedule_cycle(t + period)
        else:
            advance_all(t)
            for n in grid.names:
                hourly.append(HourlySample(t // 3600, n, instantaneous_load(systems[n], t),
                                           running_power(systems[n], power_of)))
            if outstanding > 0 or not all(s.idle() for s in systems.values()):
                heapq.heappush(heap, (t + 3600, _HOUR, 0))

    for n in grid.names:
        handle(n, systems[n].run_to_completion())
    if outstanding:
        raise SimulationError(f"{outstanding} jobs never dispatched")

    outcomes = []
    for name in grid.names:
        sys = systems[name]
        for c in sys.completed:
            job = job_by_id[c.job.id]
            _, t_disp, comm = dispatched[job.id]
            queue_wait = c.start - t_disp
            wait = (t_disp - job.submit_time) + max(math.ceil(comm), queue_wait)
            outcomes.append(JobOutcome(
                job_id=job.id, origin_system=job.origin_system, executed_system=name,
                submit_time=job.submit_time, start_time=c.start, wait_s=wait, run_s=c.run,
                cores=job.cores, power_w=power_of[job.id],
                energy_cost=realized_energy_cost(c.start, c.run, power_of[job.id], sys.config, book),
                work_cpu_hours=job.cores * min(job.run_time, job.ert) / 3600.0))
    outcomes.sort(key=lambda o: o.job_id)
    if len(outcomes) + len(rejected) != len(jobs):
        raise SimulationError("job conservation violated")
    log = [ev.format() for n in grid.names for ev in systems[n].log]
    return RunResult(outcomes, hourly, sorted(rejected), decisions, log)


def run_experiment(cfg: ExperimentConfig) -> Report:
    res = simulate(cfg)
    report = Report(res.outcomes, cfg.grid.systems, res.hourly, res.rejected, decisions=res.decisions)
    if cfg.fairness:
        base = res if cfg.strategy == "BS" else simulate(cfg, strategy="BS")
        report.fairness = fairness_scores(res.outcomes, base.outcomes)
        report.savings_by_class = class_savings(res.outcomes, base.outcomes)
    return report


# ---------------------------------------------------------------------------
# output

OUTCOME_COLUMNS = ("job_id", "origin_system", "executed_system", "submit_time", "start_time",
                   "wait_s", "run_s", "response_s", "cores", "power_w", "energy_cost",
                   "bounded_slowdown", "size_class")


def outcomes_csv(report: Report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(OUTCOME_COLUMNS)
    for o in report.outcomes:
        w.writerow([o.job_id, o.origin_system, o.executed_system, o.submit_time, o.start_time,
                    o.wait_s, o.run_s, o.response_s, o.cores, repr(o.power_w), repr(o.energy_cost),
                    repr(bounded_slowdown(o.wait_s, o.run_s)), size_class(o.work_cpu_hours)])
    return buf.getvalue()


def hourly_csv(report: Report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("hour", "system", "load", "power_w"))
    for h in report.hourly:
        w.writerow([h.hour, h.system, repr(h.load), repr(h.power_w)])
    return buf.getvalue()


def emit_report(report: Report, out_dir: str | Path) -> list[Path]:
    """Write outcomes.csv, hourly.csv, summary.json (and cycles.jsonl when audited)."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        files = {
            "outcomes.csv": outcomes_csv(report),
            "hourly.csv": hourly_csv(report),
            "summary.json": json.dumps(report.summary(), indent=2, sort_keys=True) + "\n",
        }
        if report.decisions:
            files["cycles.jsonl"] = "".join(d.to_json() + "\n" for d in report.decisions)
        paths = []
        for name, text in files.items():
            p = out / name
            p.write_text(text)
            paths.append(p)
    except OSError as exc:
        raise OSError(f"writing report to {out}: {exc}") from exc
    return paths


# ---------------------------------------------------------------------------
# config files

def _bool(raw: str) -> bool:
    return raw.strip().lower() in ("1", "true", "yes", "on")


def _floats(raw: str) -> tuple[float, ...]:
    return tuple(float(x) for x in raw.replace(",", " ").split())


def load_experiment(path: str | Path) -> ExperimentConfig:
    """Load an INI experiment description; relative paths resolve against its directory.

    Sections: ``[experiment]`` (grid, prices, epoch, strategy, w_t, max_q,
    cycle_period, f_g, seed, perturb_hours, power_band, transfer, fairness,
    audit, sim_days, output_dir), ``[workload]`` (either ``trace`` +
    ``format`` [+ ``origin`` for SWF], or generator keys), optional
    ``[predictor]``. See README for an example.
    """
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    base = path.parent
    if not cp.has_section("experiment") or not cp.has_section("workload"):
        raise ConfigError(f"{path}: [experiment] and [workload] sections are required")
    e, w = cp["experiment"], cp["workload"]

    grid = load_grid_config(base / e["grid"])
    epoch = dt.date.fromisoformat(e.get("epoch", "2000-01-01"))
    prices: dict[str, PriceSeries] = {}
    for p in e.get("prices", "").replace(",", " ").split():
        prices.update(load_price_file(base / p, epoch))
    seed = int(e.get("seed", "0"))

    has_trace = "trace" in w
    has_gen = "n_jobs" in w
    if has_trace == has_gen:
        raise ConfigError(f"{path}: [workload] needs exactly one of 'trace' or generator keys")
    if has_trace:
        tpath = base / w["trace"]
        try:
            text = tpath.read_text()
        except OSError as exc:
            raise ConfigError(f"{tpath}: {exc}") from None
        fmt = w.get("format", tpath.suffix.lstrip(".")).lower()
        if fmt == "swf":
            workload = parse_swf(text, w["origin"])
        elif fmt == "gwf":
            workload = parse_gwf(text, grid.names)
        else:
            raise ConfigError(f"{tpath}: unknown trace format {fmt!r}")
    else:
        gen = GeneratorConfig(
            n_jobs=int(w["n_jobs"]),
            mean_interarrival_s=float(w.get("mean_interarrival_s", "600")),
            runtime_log_mean=float(w.get("runtime_log_mean", "8.5")),
            runtime_log_sigma=float(w.get("runtime_log_sigma", "1.0")),
            cores_two_power_max=int(w.get("cores_two_power_max", "6")),
            estimate_modes=tuple(int(x) for x in _floats(w.get("estimate_modes", "3600 14400 43200 86400"))),
            origins=tuple(w.get("origins", " ".join(grid.names)).replace(",", " ").split()),
            origin_weights=_floats(w["origin_weights"]) if "origin_weights" in w else None,
        )
        workload = generate_synthetic(gen, int(w.get("seed", str(seed))))
    if _bool(w.get("filter_short_jobs", "false")):
        workload = filter_short_jobs(workload)
    if "data_sizes" in w:
        workload = apply_data_sizes(workload, load_data_sizes(base / w["data_sizes"]))

    pred = PredictorParams()
    if cp.has_section("predictor"):
        kw = {}
        for k, v in cp["predictor"].items():
            if k not in PredictorParams.__dataclass_fields__:
                raise ConfigError(f"unknown predictor key {k!r}")
            kw[k] = type(getattr(pred, k))(float(v)) if isinstance(getattr(pred, k), int) else float(v)
        pred = PredictorParams(**kw)

    max_q_raw = e.get("max_q")
    if max_q_raw is None:
        max_q: int | None | str = "grid"
    elif max_q_raw.strip().lower() in ("inf", "unlimited", "none"):
        max_q = None
    else:
        max_q = int(max_q_raw)
    return ExperimentConfig(
        grid=grid, prices=prices, workload=workload,
        strategy=e.get("strategy", "MCMF"),
        w_t=float(e["w_t"]) if "w_t" in e else None,
        max_q=max_q,
        cycle_period=int(e["cycle_period"]) if "cycle_period" in e else None,
        f_g=float(e.get("f_g", "1.0")),
        seed=seed,
        perturb_hours=int(e.get("perturb_hours", "0")),
        power_band=e.get("power_band", "hpl"),
        transfer=_bool(e.get("transfer", "false")),
        fairness=_bool(e.get("fairness", "false")),
        audit=_bool(e.get("audit", "false")),
        sim_hours=int(float(e["sim_days"]) * 24) if "sim_days" in e else None,
        predictor=pred,
        output_dir=base / e["output_dir"] if "output_dir" in e else None,
    )


def load_data_sizes(path: Path) -> dict[int, int]:
    """``job_id,data_size_bytes`` rows."""
    out = {}
    try:
        with open(path, newline="") as fh:
            for rec in csv.reader(fh):
                if not rec or not rec[0].strip().lstrip("-").isdigit():
                    continue
                out[int(rec[0])] = int(float(rec[1]))
    except (OSError, IndexError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return out
