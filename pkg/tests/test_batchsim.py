import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridsched.batchsim import END, START, BatchSystem, IncompatibleJobError, QueueSnapshot, TimeRegressionError
from gridsched.grid import SystemConfig
from gridsched.workload import Job

from conftest import random_script, run_batchsim
from oracles import ScriptJob, replay_easy_oracle


def system(cores=10, walltime=10**6):
    return BatchSystem(SystemConfig("s", cores, walltime, 1.0, 1.0, fixed_price=0.1))


def J(i, cores, ert, run=None, submit=0):
    return Job(i, submit, ert if run is None else run, ert, cores, "s")


def backfill_scenario(j3_ert):
    s = system(10)
    s.submit(J(1, 8, 100), 0)
    s.submit(J(2, 10, 100), 0)
    s.submit(J(3, 2, j3_ert), 0)
    return s


def test_empty_submit_starts_now():
    s = system()
    ev = s.submit(J(1, 4, 50), 7)
    assert ev == [s.log[0]] and ev[0].kind == START and ev[0].time == 7
    s.run_to_completion()
    assert s.completed[0].wait == 0


def test_backfill_fits_before_reservation():
    s = backfill_scenario(50)
    assert 3 in s.running and s.running[3].start == 0
    assert s.reservations[2] == 100


def test_backfill_would_delay_head():
    s = backfill_scenario(150)
    assert 3 not in s.running
    s.run_to_completion()
    starts = {c.job.id: c.start for c in s.completed}
    assert starts == {1: 0, 2: 100, 3: 200}


def test_advance_no_jobs():
    s = system()
    assert s.advance(100) == [] and s.clock == 100


def test_advance_completion_starts_successor():
    s = system(10)
    s.submit(J(1, 10, 50), 0)
    s.submit(J(2, 10, 30), 0)
    ev = s.advance(100)
    assert [(e.time, e.job_id, e.kind) for e in ev] == [(50, 1, END), (50, 2, START), (80, 2, END)]


def test_killed_at_estimate():
    s = system()
    s.submit(Job(1, 0, 200, 100, 1, "s"), 0)
    ev = s.run_to_completion()
    assert ev[-1].time == 100 and s.completed[0].run == 100


def test_time_regression():
    s = system()
    s.advance(10)
    with pytest.raises(TimeRegressionError):
        s.advance(5)


def test_incompatible_rejected():
    with pytest.raises(IncompatibleJobError):
        system(10).submit(J(1, 11, 5), 0)
    with pytest.raises(IncompatibleJobError):
        system(10, walltime=100).submit(J(1, 1, 101), 0)


def test_snapshot_empty():
    assert system().snapshot(0) == QueueSnapshot()


def test_snapshot_running():
    s = system(100)
    s.submit(J(1, 64, 1000), 0)
    s.advance(100)
    snap = s.snapshot(100)
    assert (snap.occupied_cores, snap.sum_running_elapsed, snap.sum_running_ert) == (64, 100, 1000)


def test_snapshot_queued_sums():
    s = system(40)
    s.submit(J(1, 40, 1000), 0)
    s.submit(J(2, 10, 50), 0)
    s.submit(J(3, 20, 70), 2)
    s.advance(5)
    snap = s.snapshot(5)
    assert (snap.sum_queued_cores, snap.sum_queued_ert, snap.sum_queued_elapsed_wait) == (30, 120, 8)


def test_same_time_completions_ascending_id():
    s = system(10)
    for i in (3, 1, 2):
        s.submit(J(i, 2, 40), 0)
    ev = s.run_to_completion()
    assert [e.job_id for e in ev] == [1, 2, 3]


# -- oracle equivalence ---------------------------------------------------

def test_oracle_empty_script():
    assert replay_easy_oracle(10, []) == ([], {})
    assert run_batchsim(10, [])[1] == []


@pytest.mark.parametrize("ert3", [50, 150])
def test_oracle_hand_scenarios(ert3):
    script = [ScriptJob(1, 0, 100, 100, 8), ScriptJob(2, 0, 100, 100, 10), ScriptJob(3, 0, ert3, ert3, 2)]
    sys_, log = run_batchsim(10, script)
    olog, ores = replay_easy_oracle(10, script)
    assert log == olog and sys_.reservations == ores


@pytest.mark.parametrize("seed", range(10))
def test_oracle_random_scripts(seed):
    script = random_script(np.random.default_rng(seed))
    sys_, log = run_batchsim(16, script)
    olog, ores = replay_easy_oracle(16, script)
    assert log == olog and sys_.reservations == ores


def _check_invariants(total, script):
    sys_, log = run_batchsim(total, script)
    # conservation
    assert len(sys_.completed) == len(script)
    by_id = {j.id: j for j in script}
    delivered = sum(c.run * c.job.cores for c in sys_.completed)
    assert delivered == sum(min(j.run, j.ert) * j.cores for j in script)
    # capacity at every event boundary
    used = 0
    for t in sorted({e[0] for e in log}):
        for _, jid, kind, cores in (e for e in log if e[0] == t):
            used += cores if kind == START else -cores
        assert 0 <= used <= total
    # EASY safety
    starts = {c.job.id: c.start for c in sys_.completed}
    for jid, res in sys_.reservations.items():
        assert starts[jid] <= res, (jid, starts[jid], res)
    assert set(starts) == set(by_id)
    # determinism
    assert run_batchsim(total, script)[1] == log


script_job = st.tuples(st.integers(0, 5), st.integers(1, 100), st.integers(0, 80), st.integers(1, 16))


@settings(max_examples=200, deadline=None)
@given(st.lists(script_job, max_size=10))
def test_invariants_property(rows):
    t, script = 0, []
    for i, (gap, run, slack, cores) in enumerate(rows):
        t += gap * 10
        script.append(ScriptJob(i + 1, t, run, max(1, run + slack - 20), cores))
    _check_invariants(16, script)
