import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hpcqc.errors import InfeasibleRequest
from hpcqc.ir import ResourceRequest
from hpcqc.scheduler import (
    Job,
    Planner,
    ResourcePool,
    ScheduleTrace,
    Scheduler,
    fcfs,
    gantt,
    load_workload,
    oversubscriptions,
    simulate,
    utilization,
)

from _support import data_path, random_pool, random_workload


def reference_fcfs(jobs, pool):
    """Naive tick-by-tick FCFS: strict (submit, id) order, starts never decrease."""
    horizon = sum(j.duration for j in jobs) + max((j.submit for j in jobs), default=0) + 1
    cpu = [0] * horizon
    hyb = [0] * horizon
    qpu = {h: [0] * horizon for h in pool.qpu_ids}
    starts, floor = {}, 0
    for job in sorted(jobs, key=lambda j: (j.submit, j.id)):
        r = job.request
        t = max(job.submit, floor)
        while True:
            span = range(t, t + job.duration)
            ok = all(cpu[x] + r.cpu_nodes <= pool.cpu_nodes and hyb[x] + r.hybrid_nodes <= pool.hybrid_nodes
                     for x in span)
            free = [h for h in pool.qpu_ids if all(qpu[h][x] + r.qpu_level <= pool.levels(h) for x in span)]
            if ok and len(free) >= r.qpu_count:
                break
            t += 1
        for x in range(t, t + job.duration):
            cpu[x] += r.cpu_nodes
            hyb[x] += r.hybrid_nodes
            for h in free[:r.qpu_count]:
                qpu[h][x] += r.qpu_level
        starts[job.id] = t
        floor = t
    return starts


def qpu_job(jid, submit, duration, n=1, level=1):
    return Job(jid, submit, duration, ResourceRequest(qpus=n, qpu_level=level))


class TestSubmit:
    def test_feasible(self):
        s = Scheduler(ResourcePool(qpus=(("q", 1),)))
        assert s.submit(qpu_job("a", 0, 1)) == "a"

    def test_too_many_qpus(self):
        s = Scheduler(ResourcePool(qpus=(("q0", 1), ("q1", 1))))
        with pytest.raises(InfeasibleRequest):
            s.submit(qpu_job("a", 0, 1, n=3))

    def test_level_too_high(self):
        with pytest.raises(InfeasibleRequest):
            Scheduler(ResourcePool(qpus=(("q", 1),))).submit(qpu_job("a", 0, 1, level=2))

    def test_tie_break_by_id(self):
        s = Scheduler(ResourcePool(cpu_nodes=1))
        s.submit(Job("b", 0, 1, ResourceRequest(cpu_nodes=1)))
        s.submit(Job("a", 0, 1, ResourceRequest(cpu_nodes=1)))
        assert [j.id for j in s.queue()] == ["a", "b"]

    def test_duplicate_id(self):
        s = Scheduler(ResourcePool(cpu_nodes=1))
        s.submit(Job("a", 0, 1, ResourceRequest(cpu_nodes=1)))
        with pytest.raises(ValueError):
            s.submit(Job("a", 3, 1, ResourceRequest(cpu_nodes=1)))


class TestRun:
    def test_serialization_on_one_qpu(self):
        trace = simulate([qpu_job("A", 0, 5), qpu_job("B", 0, 5)], ResourcePool(qpus=(("q", 1),)))
        got = {p.job: (p.start, p.end) for p in trace.placements}
        assert got == {"A": (0, 5), "B": (5, 10)}

    def test_backfill_does_not_delay_reservation(self):
        pool = ResourcePool(qpus=(("q0", 1), ("q1", 1)))
        jobs = [qpu_job("C", 0, 10), qpu_job("A", 1, 5, n=2), qpu_job("B", 1, 5)]
        got = simulate(jobs, pool).by_job()
        assert got["A"].start == 10
        assert got["B"].start == 1
        assert fcfs(jobs, pool).by_job()["B"].start == 15

        # brute force: with C fixed at [0, 10), A cannot start before 10 in any
        # feasible schedule, and B at 1 is compatible with A at 10
        def feasible(sa, sb):
            for t in range(0, 40):
                used = (0 <= t < 10) + 2 * (sa <= t < sa + 5) + (sb <= t < sb + 5)
                if used > 2:
                    return False
            return True
        pairs = [(sa, sb) for sa in range(1, 25) for sb in range(1, 25) if feasible(sa, sb)]
        assert min(sa for sa, _ in pairs) == 10
        assert min(sb for sa, sb in pairs if sa == 10) == 1

    def test_multilevel_co_residency(self):
        trace = simulate([qpu_job("a", 0, 4), qpu_job("b", 0, 4)], ResourcePool(qpus=(("q", 2),)))
        assert [p.start for p in trace.placements] == [0, 0]
        assert trace.snapshot(0)["qpus"] == {"q": 2}

    def test_level_two_job_waits_for_both_slots(self):
        jobs = [qpu_job("a", 0, 4), qpu_job("b", 0, 2, level=2)]
        assert simulate(jobs, ResourcePool(qpus=(("q", 2),))).by_job()["b"].start == 4

    def test_specific_qpu(self):
        pool = ResourcePool(qpus=(("q0", 1), ("q1", 1)))
        jobs = [qpu_job("a", 0, 3), Job("b", 0, 3, ResourceRequest(qpus=("q0",)))]
        got = simulate(jobs, pool).by_job()
        assert got["b"].allocation.qpus == ("q0",)
        assert got["b"].start == 3

    def test_infeasible_jobs_are_rejected(self):
        trace = simulate([qpu_job("x", 0, 1, n=5)], ResourcePool(qpus=(("q", 1),)))
        assert trace.placements == () and trace.rejected[0][0] == "x"

    def test_planner_respects_submit(self):
        planner = Planner(ResourcePool(cpu_nodes=1))
        a = planner.place(Job("a", 0, 3, ResourceRequest(cpu_nodes=1)))
        b = planner.place(Job("b", 1, 1, ResourceRequest(cpu_nodes=1)))
        assert (a.start, b.start) == (0, 3)


class TestUtilization:
    def test_full_qpu(self):
        pool = ResourcePool(qpus=(("q", 1),))
        u = utilization(simulate([qpu_job("a", 0, 5)], pool), pool)
        assert u["qpu"] == 1.0 and u["makespan"] == 5

    def test_empty(self):
        pool = ResourcePool(cpu_nodes=2)
        u = utilization(ScheduleTrace(()), pool)
        assert u == {"makespan": 0.0, "mean_wait": 0.0, "cpu": 0.0, "qpu": 0.0, "hybrid": 0.0}

    def test_half_cpu(self):
        pool = ResourcePool(cpu_nodes=2)
        u = utilization(simulate([Job("A", 0, 5, ResourceRequest(cpu_nodes=1))], pool), pool)
        assert u["cpu"] == 0.5

    def test_mean_wait(self):
        pool = ResourcePool(qpus=(("q", 1),))
        u = utilization(simulate([qpu_job("A", 0, 5), qpu_job("B", 0, 5)], pool), pool)
        assert u["mean_wait"] == 2.5


class TestInvariants:
    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=150, deadline=None)
    def test_random_workloads(self, seed):
        rng = np.random.default_rng(seed)
        pool = random_pool(rng)
        jobs = random_workload(rng, pool)
        trace = simulate(jobs, pool)
        plain = fcfs(jobs, pool)
        assert oversubscriptions(trace, pool) == []
        assert oversubscriptions(plain, pool) == []
        assert not trace.rejected
        ref = reference_fcfs(jobs, pool)
        assert {p.job: p.start for p in plain.placements} == ref
        for p in trace.placements:
            assert p.start >= p.submit
            assert p.start <= ref[p.job]

    def test_demo_workload_backfill_lowers_wait(self):
        with open(data_path("sched", "workload.json"), encoding="utf-8") as fh:
            jobs = load_workload(fh.read())
        with open(data_path("sched", "pool.json"), encoding="utf-8") as fh:
            pool = ResourcePool.from_json(fh.read())
        bf, plain = simulate(jobs, pool), fcfs(jobs, pool)
        assert utilization(bf, pool)["mean_wait"] <= utilization(plain, pool)["mean_wait"]
        assert [j for j, _ in bf.rejected] == ["huge"]


def test_trace_json_and_gantt():
    pool = ResourcePool(cpu_nodes=1, qpus=(("q", 1),))
    trace = simulate([qpu_job("a", 0, 2), Job("b", 1, 1, ResourceRequest(cpu_nodes=1))], pool)
    doc = json.loads(json.dumps(trace.to_json()))
    assert [j["id"] for j in doc["jobs"]] == ["a", "b"]
    assert len(doc["ticks"]) == trace.makespan
    chart = gantt(trace)
    assert chart.splitlines()[1].startswith("a |##|")


def test_pool_json_round_trip():
    pool = ResourcePool(3, (("q0", 2), ("q1", 1)), 1)
    assert ResourcePool.from_json(json.dumps(pool.to_json())) == pool
    assert ResourcePool.from_json('{"qpus": ["x"]}').qpus == (("x", 1),)
