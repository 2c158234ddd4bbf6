"""Single-system discrete-event batch simulator with EASY backfilling.

Jobs handed to a :class:`BatchSystem` must already carry runtime and
estimate scaled to that system. A job is killed when it reaches its estimate.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, fields

from .grid import SystemConfig, compatible
from .workload import Job

START = "start"
END = "end"


class IncompatibleJobError(ValueError):
    pass


class TimeRegressionError(RuntimeError):
    pass


@dataclass(frozen=True)
class Event:
    time: int
    system: str
    job_id: int
    kind: str
    cores: int

    def format(self) -> str:
        return f"{self.time}\t{self.system}\t{self.job_id}\t{self.kind}\t{self.cores}"


@dataclass(frozen=True)
class QueueSnapshot:
    sum_queued_cores: int = 0
    sum_queued_ert: int = 0
    sum_queued_elapsed_wait: int = 0
    occupied_cores: int = 0
    sum_running_elapsed: int = 0
    sum_running_ert: int = 0

    def as_tuple(self) -> tuple[int, ...]:
        return tuple(getattr(self, f.name) for f in fields(self))


@dataclass
class Running:
    job: Job
    start: int
    end: int  # actual end, min(run, ert) after start
    ert_end: int


@dataclass
class Queued:
    job: Job
    enqueue_time: int


@dataclass(frozen=True)
class Completion:
    job: Job
    enqueue_time: int
    start: int
    end: int

    @property
    def wait(self) -> int:
        return self.start - self.enqueue_time

    @property
    def run(self) -> int:
        return self.end - self.start


class BatchSystem:
    """Mutable state of one batch system; single writer."""

    def __init__(self, config: SystemConfig, keep_log: bool = True):
        self.config = config
        self.name = config.name
        self.total_cores = config.total_cores
        self.clock = 0
        self.free_cores = config.total_cores
        self.running: dict[int, Running] = {}
        self.queued: list[Queued] = []
        self.completed: list[Completion] = []
        self.reservations: dict[int, int] = {}  # head job id -> reservation when it became head
        self.log: list[Event] | None = [] if keep_log else None
        self._ends: list[tuple[int, int]] = []  # (end time, job id)
        self.enqueue_times: dict[int, int] = {}

    # -- public API --------------------------------------------------------

    def submit(self, job: Job, time: int) -> list[Event]:
        if not compatible(job, self.config):
            raise IncompatibleJobError(f"job {job.id} ({job.cores} cores, ert {job.ert}) "
                                       f"does not fit {self.name}")
        events = self.advance(time)
        self.queued.append(Queued(job, time))
        self.enqueue_times[job.id] = time
        events += self._schedule(time)
        return events

    def advance(self, to: int) -> list[Event]:
        """Process completions up to and including ``to``."""
        if to < self.clock:
            raise TimeRegressionError(f"{self.name}: advance to {to} < clock {self.clock}")
        events: list[Event] = []
        while self._ends and self._ends[0][0] <= to:
            t = self._ends[0][0]
            while self._ends and self._ends[0][0] == t:
                _, jid = heapq.heappop(self._ends)
                events.append(self._finish(jid, t))
            self.clock = t
            events += self._schedule(t)
        self.clock = to
        return events

    def run_to_completion(self) -> list[Event]:
        events: list[Event] = []
        while self._ends:
            events += self.advance(self._ends[0][0])
        return events

    def next_event_time(self) -> int | None:
        return self._ends[0][0] if self._ends else None

    def idle(self) -> bool:
        return not self.running and not self.queued

    def snapshot(self, time: int | None = None) -> QueueSnapshot:
        t = self.clock if time is None else time
        q, r = self.queued, self.running.values()
        return QueueSnapshot(
            sum_queued_cores=sum(x.job.cores for x in q),
            sum_queued_ert=sum(x.job.ert for x in q),
            sum_queued_elapsed_wait=sum(t - x.enqueue_time for x in q),
            occupied_cores=sum(x.job.cores for x in r),
            sum_running_elapsed=sum(t - x.start for x in r),
            sum_running_ert=sum(x.job.ert for x in r),
        )

    # -- internals ---------------------------------------------------------

    def _emit(self, time: int, job: Job, kind: str) -> Event:
        ev = Event(time, self.name, job.id, kind, job.cores)
        if self.log is not None:
            self.log.append(ev)
        return ev

    def _start(self, q: Queued, t: int) -> Event:
        job = q.job
        end = t + min(job.run_time, job.ert)
        self.running[job.id] = Running(job, t, end, t + job.ert)
        self.free_cores -= job.cores
        heapq.heappush(self._ends, (end, job.id))
        return self._emit(t, job, START)

    def _finish(self, jid: int, t: int) -> Event:
        r = self.running.pop(jid)
        self.free_cores += r.job.cores
        self.completed.append(Completion(r.job, self.enqueue_times[jid], r.start, t))
        return self._emit(t, r.job, END)

    def _schedule(self, t: int) -> list[Event]:
        events = []
        while self.queued and self.queued[0].job.cores <= self.free_cores:
            events.append(self._start(self.queued.pop(0), t))
        if not self.queued:
            return events

        head = self.queued[0].job
        shadow = self._shadow_time(head.cores)
        self.reservations.setdefault(head.id, shadow)
        keep = [self.queued[0]]
        for q in self.queued[1:]:
            if q.job.cores <= self.free_cores and t + q.job.ert <= shadow:
                events.append(self._start(q, t))
            else:
                keep.append(q)
        self.queued = keep
        return events

    def _shadow_time(self, cores: int) -> int:
        """Earliest time ``cores`` are free assuming running jobs end at their estimates."""
        avail = self.free_cores
        for r in sorted(self.running.values(), key=lambda r: (r.ert_end, r.job.id)):
            avail += r.job.cores
            if avail >= cores:
                return r.ert_end
        raise AssertionError(f"{self.name}: head job needs more cores than the system has")
