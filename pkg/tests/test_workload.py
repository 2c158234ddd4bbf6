from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from gridsched.workload import (ConfigError, GeneratorConfig, Job, Workload, WorkloadParseError,
                                filter_short_jobs, generate_synthetic, parse_gwf, parse_swf, to_swf)

DATA = Path(__file__).parent / "data"


def test_swf_field_mapping():
    wl = parse_swf("1 0 0 3600 64 0 0 64 7200 -1 1 1 1 1 1 -1 -1 -1", "sdsc")
    assert wl.jobs == [Job(1, 0, 3600, 7200, 64, "sdsc")]


def test_swf_comment_only():
    wl = parse_swf("; Version: 2.2\n", "x")
    assert len(wl) == 0 and wl.dropped == 0


def test_swf_fixture_drop_count():
    text = (DATA / "ten_lines.swf").read_text()
    wl = parse_swf(text, "x")
    # hand count: jobs 2, 3, 5, 7, 10 are invalid
    assert [j.id for j in wl] == [1, 4, 6, 8, 9]
    assert wl.dropped == 5
    assert len(wl) + wl.dropped == 10


def test_swf_fallbacks():
    wl = parse_swf((DATA / "ten_lines.swf").read_text(), "x")
    j4 = next(j for j in wl if j.id == 4)
    assert j4.cores == 4 and j4.ert == 200  # allocated procs, runtime as estimate


def test_swf_short_line_errors():
    with pytest.raises(WorkloadParseError) as e:
        parse_swf("; c\n1 2 3\n", "x")
    assert e.value.lineno == 2


def test_swf_non_numeric_errors():
    with pytest.raises(WorkloadParseError):
        parse_swf("1 0 0 abc 64 0 0 64 7200 -1 1 1 1 1 1 -1 -1 -1", "x")


def test_gwf_origin_and_order():
    wl = parse_gwf((DATA / "five.gwf").read_text())
    assert [j.id for j in wl] == [1, 2, 3, 4, 5]
    assert [j.submit_time for j in wl] == sorted(j.submit_time for j in wl)
    assert wl.jobs[0].origin_system == "siteA"
    assert wl.jobs[1].origin_system == "siteB"


def test_gwf_empty():
    assert len(parse_gwf("")) == 0


def test_gwf_unknown_site():
    with pytest.raises(WorkloadParseError):
        parse_gwf((DATA / "five.gwf").read_text(), sites=["siteA"])
    with pytest.raises(WorkloadParseError):
        parse_gwf("1 100 0 50 4 -1 -1 4 100 -1 1 1 1 1 1 1 -1")


def test_job_invariants():
    with pytest.raises(ValueError):
        Job(1, 0, 0, 10, 1, "a")
    with pytest.raises(ValueError):
        Job(1, 0, 10, 10, 0, "a")


def test_duplicate_ids_rejected():
    with pytest.raises(ValueError):
        Workload([Job(1, 0, 1, 1, 1, "a"), Job(1, 5, 1, 1, 1, "a")])


def test_filter_short_jobs():
    wl = Workload([Job(1, 0, 100, 200, 1, "a"), Job(2, 0, 1800, 2000, 1, "a")])
    out = filter_short_jobs(wl)
    assert [j.id for j in out] == [2] and out.dropped == 1


def test_generator_deterministic():
    cfg = GeneratorConfig(n_jobs=200)
    assert to_swf(generate_synthetic(cfg, 7)) == to_swf(generate_synthetic(cfg, 7))
    assert to_swf(generate_synthetic(cfg, 7)) != to_swf(generate_synthetic(cfg, 8))


def test_generator_arrival_span():
    spans = []
    for seed in range(20):
        wl = generate_synthetic(GeneratorConfig(n_jobs=1000, mean_interarrival_s=900.0), seed)
        spans.append(wl.jobs[-1].submit_time - wl.jobs[0].submit_time)
    mean = sum(spans) / len(spans)
    assert abs(mean - 900_000) <= 90_000


def test_generator_modes():
    modes = (600, 1200, 3600, 7200, 14400)
    wl = generate_synthetic(GeneratorConfig(n_jobs=500, estimate_modes=modes), 3)
    erts = {j.ert for j in wl}
    assert len(erts) <= 5 and erts <= set(modes)
    assert all(j.run_time <= j.ert for j in wl)
    assert [j.submit_time for j in wl] == sorted(j.submit_time for j in wl)


def test_generator_validation():
    with pytest.raises(ConfigError):
        generate_synthetic(GeneratorConfig(n_jobs=0), 0)
    with pytest.raises(ConfigError):
        generate_synthetic(GeneratorConfig(origins=("a", "b"), origin_weights=(1.0,)), 0)


job_st = st.builds(lambda i, s, r, e, c: (i, s, r, r + e, c),
                   st.integers(1, 10**6), st.integers(0, 10**8), st.integers(1, 10**6),
                   st.integers(0, 10**6), st.integers(1, 10**5))


@settings(max_examples=100, deadline=None)
@given(st.lists(job_st, max_size=30, unique_by=lambda t: t[0]))
def test_swf_round_trip(rows):
    wl = Workload([Job(i, s, r, e, c, "x") for i, s, r, e, c in rows])
    again = parse_swf(to_swf(wl), "x")
    assert again.jobs == wl.jobs and again.dropped == 0
