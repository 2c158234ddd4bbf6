"""Workload ingestion: SWF / GWF trace parsing and a seeded synthetic generator.

SWF field reference: https://www.cs.huji.ac.il/labs/parallel/workload/swf.html
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

SWF_FIELDS = 18
# 0-based column indices
SWF_JOB_ID = 0
SWF_SUBMIT = 1
SWF_RUN = 3
SWF_ALLOC_PROCS = 4
SWF_REQ_PROCS = 7
SWF_REQ_TIME = 8

GWF_FIELDS = 17
GWF_ORIG_SITE = 16


class WorkloadParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Job:
    id: int
    submit_time: int
    run_time: int
    ert: int
    cores: int
    origin_system: str
    data_size: int = 0

    def __post_init__(self):
        if self.run_time <= 0 or self.ert <= 0 or self.cores < 1:
            raise ValueError(f"invalid job {self}")


@dataclass
class Workload:
    jobs: list[Job] = field(default_factory=list)
    dropped: int = 0

    def __post_init__(self):
        self.jobs.sort(key=lambda j: (j.submit_time, j.id))
        ids = [j.id for j in self.jobs]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate job ids in workload")

    def __len__(self):
        return len(self.jobs)

    def __iter__(self):
        return iter(self.jobs)


def _data_lines(text: str | Iterable[str], comment: str):
    lines = text.splitlines() if isinstance(text, str) else text
    for lineno, line in enumerate(lines, start=1):
        s = line.strip()
        if not s or s.startswith(comment):
            continue
        yield lineno, s.split()


def _ints(parts: Sequence[str], lineno: int, need: int) -> list[int]:
    if len(parts) < need:
        raise WorkloadParseError(lineno, f"expected at least {need} fields, got {len(parts)}")
    try:
        # some archives write floats in integer columns
        return [int(float(p)) for p in parts[:need]]
    except ValueError as exc:
        raise WorkloadParseError(lineno, f"non-numeric field ({exc})") from None


def _make_job(f: list[int], origin: str) -> Job | None:
    run = f[SWF_RUN]
    cores = f[SWF_REQ_PROCS] if f[SWF_REQ_PROCS] > 0 else f[SWF_ALLOC_PROCS]
    ert = f[SWF_REQ_TIME] if f[SWF_REQ_TIME] > 0 else run
    if run <= 0 or cores <= 0:
        return None
    return Job(submit_time=f[SWF_SUBMIT], id=f[SWF_JOB_ID], run_time=run, ert=ert,
               cores=cores, origin_system=origin)


def parse_swf(text: str | Iterable[str], origin: str) -> Workload:
    """Parse an SWF trace; every job is tagged with ``origin``.

    Jobs with non-positive runtime or core count are skipped and counted in
    ``Workload.dropped``.
    """
    jobs, dropped = [], 0
    for lineno, parts in _data_lines(text, ";"):
        job = _make_job(_ints(parts, lineno, SWF_FIELDS), origin)
        if job is None:
            dropped += 1
        else:
            jobs.append(job)
    if dropped:
        logger.info("parse_swf: dropped %d invalid jobs", dropped)
    return Workload(jobs, dropped)


def parse_gwf(text: str | Iterable[str], sites: Iterable[str] | None = None) -> Workload:
    """Parse a GWF trace; the origin system comes from the OrigSiteID column.

    If ``sites`` is given, origin tokens outside it are rejected.
    """
    known = set(sites) if sites is not None else None
    jobs, dropped = [], 0
    for lineno, parts in _data_lines(text, "#"):
        f = _ints(parts, lineno, SWF_FIELDS - 2)
        if len(parts) < GWF_FIELDS:
            raise WorkloadParseError(lineno, f"expected at least {GWF_FIELDS} fields, got {len(parts)}")
        site = parts[GWF_ORIG_SITE]
        if site in ("-1", "") or (known is not None and site not in known):
            raise WorkloadParseError(lineno, f"unknown origin site {site!r}")
        job = _make_job(f, site)
        if job is None:
            dropped += 1
        else:
            jobs.append(job)
    return Workload(jobs, dropped)


def to_swf(workload: Workload | Iterable[Job]) -> str:
    """Serialize jobs as SWF lines (origin and data size are not representable)."""
    out = ["; Version: 2.2"]
    for j in workload:
        f = [-1] * SWF_FIELDS
        f[SWF_JOB_ID], f[SWF_SUBMIT], f[SWF_RUN] = j.id, j.submit_time, j.run_time
        f[SWF_ALLOC_PROCS] = f[SWF_REQ_PROCS] = j.cores
        f[SWF_REQ_TIME] = j.ert
        out.append(" ".join(str(x) for x in f))
    return "\n".join(out) + "\n"


def filter_short_jobs(workload: Workload, min_runtime: int = 1800) -> Workload:
    """Drop jobs that run for less than ``min_runtime`` seconds (debug/test runs)."""
    kept = [j for j in workload if j.run_time >= min_runtime]
    return Workload(kept, workload.dropped + len(workload) - len(kept))


def apply_data_sizes(workload: Workload, sizes: Mapping[int, int]) -> Workload:
    return Workload([replace(j, data_size=int(sizes.get(j.id, j.data_size))) for j in workload],
                    workload.dropped)


@dataclass(frozen=True)
class GeneratorConfig:
    n_jobs: int = 500
    mean_interarrival_s: float = 600.0
    runtime_log_mean: float = 8.5
    runtime_log_sigma: float = 1.0
    cores_two_power_max: int = 6
    estimate_modes: tuple[int, ...] = (3600, 4 * 3600, 12 * 3600, 24 * 3600, 48 * 3600)
    origins: tuple[str, ...] = ("site0",)
    origin_weights: tuple[float, ...] | None = None

    def validate(self):
        if self.n_jobs < 1:
            raise ConfigError("n_jobs must be >= 1")
        if self.mean_interarrival_s <= 0 or self.runtime_log_sigma <= 0:
            raise ConfigError("distribution parameters must be positive")
        if self.cores_two_power_max < 0:
            raise ConfigError("cores_two_power_max must be >= 0")
        if not self.estimate_modes or min(self.estimate_modes) <= 0:
            raise ConfigError("estimate_modes must be non-empty and positive")
        if not self.origins:
            raise ConfigError("at least one origin system is required")
        if self.origin_weights is not None:
            if len(self.origin_weights) != len(self.origins) or min(self.origin_weights) < 0 \
                    or sum(self.origin_weights) <= 0:
                raise ConfigError("origin_weights must match origins and be non-negative")


def generate_synthetic(params: GeneratorConfig, seed: int) -> Workload:
    """Seeded synthetic workload.

    Exponential interarrivals, log-normal runtimes, power-of-two core counts.
    Each job's estimate is drawn from the modes that are at least its runtime;
    runtimes longer than the largest mode are clipped to it.
    """
    params.validate()
    rng = np.random.default_rng(seed)
    n = params.n_jobs
    gaps = rng.exponential(params.mean_interarrival_s, size=n)
    gaps[0] = 0.0
    submits = np.floor(np.cumsum(gaps)).astype(np.int64)
    modes = np.array(sorted(set(int(m) for m in params.estimate_modes)), dtype=np.int64)
    runs = np.ceil(rng.lognormal(params.runtime_log_mean, params.runtime_log_sigma, size=n))
    runs = np.clip(runs, 1, modes[-1]).astype(np.int64)
    cores = 2 ** rng.integers(0, params.cores_two_power_max, size=n, endpoint=True)
    pick = rng.random(n)
    if params.origin_weights is None:
        w = np.full(len(params.origins), 1.0 / len(params.origins))
    else:
        w = np.asarray(params.origin_weights, dtype=float)
        w = w / w.sum()
    origin_idx = rng.choice(len(params.origins), size=n, p=w)

    jobs = []
    for i in range(n):
        first = int(np.searchsorted(modes, runs[i]))
        cands = modes[first:]
        ert = int(cands[min(int(pick[i] * len(cands)), len(cands) - 1)])
        jobs.append(Job(submit_time=int(submits[i]), id=i + 1, run_time=int(runs[i]), ert=ert,
                        cores=int(cores[i]), origin_system=params.origins[origin_idx[i]]))
    return Workload(jobs)
