"""Discrete-time hybrid batch scheduler: CPU nodes, hybrid nodes and multilevel QPUs.

Placement works on a per-tick resource profile.  Pure FCFS takes jobs in
(submit, id) order and gives each the earliest start, no earlier than its
predecessor's, where the whole request fits for the whole duration.
Conservative backfilling treats those FCFS slots as reservations and lets a
job start earlier whenever it fits around everything already placed and
every reservation still outstanding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from .errors import InfeasibleRequest
from .ir import ResourceRequest


@dataclass(frozen=True)
class ResourcePool:
    cpu_nodes: int = 0
    qpus: tuple[tuple[str, int], ...] = ()
    hybrid_nodes: int = 0

    def __post_init__(self):
        qpus = tuple((str(h), int(lv)) for h, lv in self.qpus)
        object.__setattr__(self, "qpus", qpus)
        if self.cpu_nodes < 0 or self.hybrid_nodes < 0 or any(lv < 1 for _, lv in qpus):
            raise ValueError("resource counts must be non-negative and QPU levels >= 1")
        ids = [h for h, _ in qpus]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate QPU ids in pool: {ids}")

    @property
    def qpu_ids(self) -> tuple[str, ...]:
        return tuple(h for h, _ in self.qpus)

    def levels(self, qpu: str) -> int:
        return dict(self.qpus)[qpu]

    def to_json(self) -> dict:
        return {"cpu_nodes": self.cpu_nodes, "hybrid_nodes": self.hybrid_nodes,
                "qpus": [{"id": h, "levels": lv} for h, lv in self.qpus]}

    @classmethod
    def from_json(cls, doc: Mapping[str, Any] | str) -> "ResourcePool":
        if isinstance(doc, str):
            doc = json.loads(doc)
        if not isinstance(doc, Mapping):
            raise ValueError("pool must be a JSON object")
        qpus = []
        for item in doc.get("qpus", []):
            if isinstance(item, str):
                qpus.append((item, 1))
            elif isinstance(item, Mapping) and isinstance(item.get("id"), str):
                qpus.append((item["id"], int(item.get("levels", 1))))
            else:
                raise ValueError(f"bad QPU entry {item!r}")
        return cls(int(doc.get("cpu_nodes", 0)), tuple(qpus), int(doc.get("hybrid_nodes", 0)))


@dataclass(frozen=True)
class Job:
    id: str
    submit: int
    duration: int
    request: ResourceRequest = field(default_factory=ResourceRequest)

    def __post_init__(self):
        if int(self.duration) < 1:
            raise ValueError(f"job {self.id!r}: duration must be >= 1")
        if int(self.submit) < 0:
            raise ValueError(f"job {self.id!r}: submit time must be >= 0")

    def to_json(self) -> dict:
        return {"id": self.id, "submit": self.submit, "duration": self.duration,
                "request": self.request.to_json()}

    @classmethod
    def from_json(cls, doc: Mapping[str, Any]) -> "Job":
        if not isinstance(doc, Mapping) or not isinstance(doc.get("id"), str):
            raise ValueError(f"job entry needs a string 'id': {doc!r}")
        try:
            return cls(doc["id"], int(doc.get("submit", 0)), int(doc["duration"]),
                       ResourceRequest.from_json(doc.get("request")))
        except KeyError as exc:
            raise ValueError(f"job {doc['id']!r} lacks {exc.args[0]!r}") from None


@dataclass(frozen=True)
class Allocation:
    cpu_nodes: int = 0
    qpus: tuple[str, ...] = ()
    qpu_level: int = 1
    hybrid_nodes: int = 0

    def to_json(self) -> dict:
        return {"cpu_nodes": self.cpu_nodes, "qpus": list(self.qpus), "qpu_level": self.qpu_level,
                "hybrid_nodes": self.hybrid_nodes}


@dataclass(frozen=True)
class Placement:
    job: str
    submit: int
    start: int
    end: int
    allocation: Allocation

    @property
    def wait(self) -> int:
        return self.start - self.submit


@dataclass(frozen=True)
class ScheduleTrace:
    placements: tuple[Placement, ...]
    rejected: tuple[tuple[str, str], ...] = ()
    policy: str = "conservative-backfill"

    def by_job(self) -> dict[str, Placement]:
        return {p.job: p for p in self.placements}

    @property
    def makespan(self) -> int:
        return max((p.end for p in self.placements), default=0)

    def snapshot(self, t: int) -> dict[str, Any]:
        """Allocation in force during tick ``t``."""
        cpu = hybrid = 0
        qpu: dict[str, int] = {}
        for p in self.placements:
            if p.start <= t < p.end:
                cpu += p.allocation.cpu_nodes
                hybrid += p.allocation.hybrid_nodes
                for q in p.allocation.qpus:
                    qpu[q] = qpu.get(q, 0) + p.allocation.qpu_level
        return {"cpu_nodes": cpu, "hybrid_nodes": hybrid, "qpus": dict(sorted(qpu.items()))}

    def to_json(self) -> dict:
        return {
            "policy": self.policy,
            "jobs": [{"id": p.job, "submit": p.submit, "start": p.start, "end": p.end,
                      "allocation": p.allocation.to_json()} for p in self.placements],
            "rejected": [{"id": j, "reason": r} for j, r in self.rejected],
            "ticks": [dict(t=t, **self.snapshot(t)) for t in range(self.makespan)],
        }


class _Profile:
    """Per-tick usage; grows on demand."""

    def __init__(self, pool: ResourcePool):
        self.pool = pool
        self.cpu: list[int] = []
        self.hybrid: list[int] = []
        self.qpu: dict[str, list[int]] = {h: [] for h in pool.qpu_ids}

    def _grow(self, end: int) -> None:
        extra = end - len(self.cpu)
        if extra > 0:
            self.cpu.extend([0] * extra)
            self.hybrid.extend([0] * extra)
            for v in self.qpu.values():
                v.extend([0] * extra)

    def fit(self, req: ResourceRequest, start: int, duration: int) -> Allocation | None:
        end = start + duration
        self._grow(end)
        span = range(start, end)
        if any(self.cpu[t] + req.cpu_nodes > self.pool.cpu_nodes for t in span):
            return None
        if any(self.hybrid[t] + req.hybrid_nodes > self.pool.hybrid_nodes for t in span):
            return None
        candidates = req.specific_qpus if req.specific_qpus is not None else self.pool.qpu_ids
        chosen = []
        for h in candidates:
            if len(chosen) == req.qpu_count:
                break
            cap = self.pool.levels(h)
            if all(self.qpu[h][t] + req.qpu_level <= cap for t in span):
                chosen.append(h)
        if len(chosen) < req.qpu_count:
            return None
        return Allocation(req.cpu_nodes, tuple(chosen), req.qpu_level, req.hybrid_nodes)

    def commit(self, alloc: Allocation, start: int, duration: int, sign: int = 1) -> None:
        self._grow(start + duration)
        for t in range(start, start + duration):
            self.cpu[t] += sign * alloc.cpu_nodes
            self.hybrid[t] += sign * alloc.hybrid_nodes
            for h in alloc.qpus:
                self.qpu[h][t] += sign * alloc.qpu_level

    def change_points(self, after: int) -> Iterable[int]:
        """Candidate starts: ``after`` and every later tick where usage drops."""
        horizon = len(self.cpu)  # fit() grows the arrays while we iterate
        yield after
        for t in range(max(after, 1), horizon):
            if (self.cpu[t] < self.cpu[t - 1] or self.hybrid[t] < self.hybrid[t - 1]
                    or any(v[t] < v[t - 1] for v in self.qpu.values())):
                yield t
        yield max(after, horizon)


def infeasibility(req: ResourceRequest, pool: ResourcePool) -> str | None:
    """Why ``req`` can never run on ``pool``, or None."""
    if req.cpu_nodes > pool.cpu_nodes:
        return f"needs {req.cpu_nodes} CPU nodes, pool has {pool.cpu_nodes}"
    if req.hybrid_nodes > pool.hybrid_nodes:
        return f"needs {req.hybrid_nodes} hybrid nodes, pool has {pool.hybrid_nodes}"
    if req.specific_qpus is not None:
        unknown = [h for h in req.specific_qpus if h not in pool.qpu_ids]
        if unknown:
            return f"unknown QPU(s) {unknown}"
        if len(set(req.specific_qpus)) != len(req.specific_qpus):
            return "a QPU is requested twice"
        pool_ids = req.specific_qpus
    else:
        pool_ids = pool.qpu_ids
    big_enough = [h for h in pool_ids if pool.levels(h) >= req.qpu_level]
    if req.qpu_count > len(big_enough):
        return f"needs {req.qpu_count} QPU(s) with {req.qpu_level} free level(s), pool has {len(big_enough)}"
    return None


class Scheduler:
    """Collects jobs, then simulates them with :meth:`run_to_completion`."""

    def __init__(self, pool: ResourcePool):
        self.pool = pool
        self.jobs: list[Job] = []

    def submit(self, job: Job) -> str:
        reason = infeasibility(job.request, self.pool)
        if reason is not None:
            raise InfeasibleRequest(f"job {job.id!r}: {reason}")
        if any(j.id == job.id for j in self.jobs):
            raise ValueError(f"duplicate job id {job.id!r}")
        self.jobs.append(job)
        return job.id

    def queue(self) -> list[Job]:
        return sorted(self.jobs, key=lambda j: (j.submit, j.id))

    def run_to_completion(self, backfill: bool = True) -> ScheduleTrace:
        """Place every queued job; see the module docstring for the policy.

        Backfilling on its own can start a job later than FCFS would when QPUs
        are not interchangeable: an early job lands on the one multilevel QPU
        a later job needed whole.  So the FCFS plan is computed first and every
        job's FCFS slot is held as a reservation.  A job may then move to any
        earlier slot that fits around the jobs already placed *and* the
        reservations of all jobs still waiting.  Its own FCFS slot always
        qualifies, hence no job ever starts later than under FCFS.
        """
        queue = self.queue()
        shadow = _Profile(self.pool)
        fcfs_plan = []
        floor = 0
        for job in queue:
            start, alloc = _earliest(shadow, job, max(job.submit, floor))
            shadow.commit(alloc, start, job.duration)
            fcfs_plan.append((start, alloc))
            floor = start
        if not backfill:
            placements = [Placement(j.id, j.submit, s, s + j.duration, a) for j, (s, a) in zip(queue, fcfs_plan)]
            return ScheduleTrace(tuple(placements), policy="fcfs")

        combined = shadow  # placed jobs + reservations of waiting jobs
        placements = []
        for job, (f_start, f_alloc) in zip(queue, fcfs_plan):
            combined.commit(f_alloc, f_start, job.duration, sign=-1)
            start, alloc = _backfill(combined, job, f_start, f_alloc)
            combined.commit(alloc, start, job.duration)
            placements.append(Placement(job.id, job.submit, start, start + job.duration, alloc))
        return ScheduleTrace(tuple(placements), policy="conservative-backfill")


def _earliest(profile: _Profile, job: Job, after: int) -> tuple[int, Allocation]:
    for t in profile.change_points(after):
        if t < after:
            continue
        alloc = profile.fit(job.request, t, job.duration)
        if alloc is not None:
            return t, alloc
    raise AssertionError("a feasible job always fits once the profile is empty")


def _backfill(profile: _Profile, job: Job, f_start: int, f_alloc: Allocation) -> tuple[int, Allocation]:
    pinned = ResourceRequest(job.request.cpu_nodes, f_alloc.qpus, job.request.hybrid_nodes,
                             job.request.qpu_level)
    for t in range(job.submit, f_start):
        for req in (job.request, pinned):
            alloc = profile.fit(req, t, job.duration)
            if alloc is not None:
                return t, alloc
    return f_start, f_alloc


class Planner:
    """Online placement: each job gets the earliest slot given everything placed so far.

    Used by the runtime, where a task's submit time is only known once its
    predecessors are placed.
    """

    def __init__(self, pool: ResourcePool):
        self.pool = pool
        self._profile = _Profile(pool)
        self.placements: list[Placement] = []

    def place(self, job: Job) -> Placement:
        reason = infeasibility(job.request, self.pool)
        if reason is not None:
            raise InfeasibleRequest(f"job {job.id!r}: {reason}")
        start, alloc = _earliest(self._profile, job, job.submit)
        self._profile.commit(alloc, start, job.duration)
        placement = Placement(job.id, job.submit, start, start + job.duration, alloc)
        self.placements.append(placement)
        return placement

    def trace(self) -> ScheduleTrace:
        return ScheduleTrace(tuple(self.placements), policy="list")


def simulate(jobs: Iterable[Job], pool: ResourcePool, backfill: bool = True) -> ScheduleTrace:
    """Submit everything, run, and report infeasible jobs as rejected instead of raising."""
    sched = Scheduler(pool)
    rejected = []
    for job in jobs:
        try:
            sched.submit(job)
        except InfeasibleRequest as exc:
            rejected.append((job.id, str(exc)))
    trace = sched.run_to_completion(backfill)
    return ScheduleTrace(trace.placements, tuple(rejected), trace.policy)


def fcfs(jobs: Iterable[Job], pool: ResourcePool) -> ScheduleTrace:
    return simulate(jobs, pool, backfill=False)


def utilization(trace: ScheduleTrace, pool: ResourcePool) -> dict[str, float]:
    makespan = trace.makespan
    out = {"makespan": float(makespan), "mean_wait": 0.0, "cpu": 0.0, "qpu": 0.0, "hybrid": 0.0}
    if makespan == 0 or not trace.placements:
        return out
    busy_cpu = sum(p.allocation.cpu_nodes * (p.end - p.start) for p in trace.placements)
    busy_hyb = sum(p.allocation.hybrid_nodes * (p.end - p.start) for p in trace.placements)
    busy_qpu = sum(len(p.allocation.qpus) * p.allocation.qpu_level * (p.end - p.start)
                   for p in trace.placements)
    qpu_cap = sum(lv for _, lv in pool.qpus)
    out["cpu"] = busy_cpu / (pool.cpu_nodes * makespan) if pool.cpu_nodes else 0.0
    out["hybrid"] = busy_hyb / (pool.hybrid_nodes * makespan) if pool.hybrid_nodes else 0.0
    out["qpu"] = busy_qpu / (qpu_cap * makespan) if qpu_cap else 0.0
    out["mean_wait"] = sum(p.wait for p in trace.placements) / len(trace.placements)
    return out


def oversubscriptions(trace: ScheduleTrace, pool: ResourcePool) -> list[tuple[int, str]]:
    """Every (tick, resource) where the trace allocates more than the pool holds."""
    bad = []
    for t in range(trace.makespan):
        snap = trace.snapshot(t)
        if snap["cpu_nodes"] > pool.cpu_nodes:
            bad.append((t, "cpu"))
        if snap["hybrid_nodes"] > pool.hybrid_nodes:
            bad.append((t, "hybrid"))
        for h, used in snap["qpus"].items():
            if h not in pool.qpu_ids or used > pool.levels(h):
                bad.append((t, h))
    return bad


def load_workload(doc: str | list) -> list[Job]:
    if isinstance(doc, str):
        doc = json.loads(doc)
    if not isinstance(doc, list):
        raise ValueError("workload must be a JSON array of jobs")
    return [Job.from_json(item) for item in doc]


def gantt(trace: ScheduleTrace, width: int = 60) -> str:
    """Plain-text chart, one row per job; ``#`` marks running ticks, ``.`` waiting ones."""
    span = trace.makespan
    lines = [f"policy {trace.policy}  makespan {span}"]
    if span == 0:
        lines.append("(no jobs)")
    scale = max(1.0, span / width)
    name_w = max((len(p.job) for p in trace.placements), default=3)
    for p in trace.placements:
        cells = []
        for c in range(int(span / scale + 0.999999)):
            t = int(c * scale)
            cells.append("#" if p.start <= t < p.end else "." if p.submit <= t < p.start else " ")
        where = ",".join(p.allocation.qpus) or "-"
        lines.append(f"{p.job:<{name_w}} |{''.join(cells)}| {p.start}-{p.end} qpu={where}")
    for job, reason in trace.rejected:
        lines.append(f"{job:<{name_w}} rejected: {reason}")
    return "\n".join(lines) + "\n"


__all__ = [
    "Allocation", "Job", "Placement", "Planner", "ResourcePool", "ScheduleTrace", "Scheduler", "fcfs",
    "gantt", "infeasibility", "load_workload", "oversubscriptions", "simulate", "utilization",
]
