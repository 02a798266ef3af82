"""Hybrid orchestration: run a program's task graph on simulated backends.

Execution is planned first (dependency-aware list scheduling on the
scheduler's resource profile) and then carried out tick group by tick
group.  Tasks that share a start tick run concurrently on a thread pool,
at most one at a time per backend.  Each task writes its metadata into a
private buffer; buffers are committed in task-id order once the group is
done, so the store's contents never depend on thread interleaving.
"""

from __future__ import annotations

import json
import math
import re
import threading
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from .errors import InvalidProgram, PlanInvalid, TaskFailed, ToolchainError, WidthMismatch
from .hardware import HardwareModel, ShotResult, derive_seed, outcome_probabilities, simulate, uniforms
from .ir import (
    Artifact,
    ArtifactKind,
    Circuit,
    Gate,
    HybridProgram,
    ResourceRequest,
    Task,
    TaskKind,
    free_symbols,
)
from .metadata import EMPTY_CONTEXT, Context, Kind, MetadataStore, RecordBuffer
from .passman import (
    DEFAULT_SEQUENCE,
    CompilationContext,
    PassRegistry,
    PassSequence,
    compile_jit,
    compile_kernel,
    standard_registry,
)
from .scheduler import Job, Planner, ResourcePool, ScheduleTrace, infeasibility

CPU = "cpu"
SHOTS_PER_TICK = 100


# -- results ----------------------------------------------------------------

@dataclass(frozen=True)
class QuantumOutput:
    """Shots of one quantum task plus what is needed to read them back logically.

    ``measured`` lists the logical qubit behind each bitstring position.
    ``probabilities`` is filled in exact mode only.
    """

    result: ShotResult
    measured: tuple[int, ...]
    probabilities: Mapping[str, float] | None = None

    def expectation_z(self, qubit: int = 0) -> float:
        if qubit not in self.measured:
            raise ValueError(f"qubit {qubit} is not measured")
        k = self.measured.index(qubit)
        if self.probabilities is not None:
            return float(sum((1.0 if bits[k] == "0" else -1.0) * p for bits, p in self.probabilities.items()))
        total = sum((1 if bits[k] == "0" else -1) * c for bits, c in self.result.counts.items())
        return total / self.result.shots


@dataclass(frozen=True)
class Distribution:
    counts: Mapping[str, int]
    shots: int

    @property
    def frequencies(self) -> dict[str, float]:
        return {k: v / self.shots for k, v in self.counts.items()} if self.shots else {}

    def to_json(self) -> dict:
        return {"counts": dict(self.counts), "shots": self.shots, "frequencies": self.frequencies}


def consolidate(results) -> Distribution:
    """Sum the counts of several executions of one kernel."""
    results = list(results)
    widths = {r.width for r in results if r.counts}
    if len(widths) > 1:
        raise WidthMismatch(f"cannot merge results of widths {sorted(widths)}")
    counts: dict[str, int] = defaultdict(int)
    for r in results:
        for k, v in r.counts.items():
            counts[k] += v
    return Distribution(dict(sorted(counts.items())), sum(r.shots for r in results))


@dataclass(frozen=True)
class TaskReport:
    id: str
    kind: TaskKind
    status: str
    backend: str
    start: int
    end: int
    error: str | None = None
    result: ShotResult | None = None
    values: Mapping[str, float] | None = None
    binary: str | None = None
    probabilities: Mapping[str, float] | None = None

    def to_json(self) -> dict:
        doc: dict[str, Any] = {"id": self.id, "kind": self.kind.value, "status": self.status,
                               "backend": self.backend, "start": self.start, "end": self.end}
        if self.error is not None:
            doc["error"] = self.error
        if self.result is not None:
            doc["counts"] = dict(self.result.counts)
            doc["shots"] = self.result.shots
        if self.values is not None:
            doc["values"] = dict(sorted(self.values.items()))
        if self.binary is not None:
            doc["binary"] = self.binary
        if self.probabilities is not None:
            doc["probabilities"] = dict(self.probabilities)
        return doc


@dataclass(frozen=True)
class RunReport:
    program: str
    seed: int
    tasks: tuple[TaskReport, ...]
    distributions: Mapping[str, Distribution]
    variational_trace: tuple[tuple[float, float], ...] | None = None

    @property
    def ok(self) -> bool:
        return all(t.status == "completed" for t in self.tasks)

    def task(self, task_id: str) -> TaskReport:
        for t in self.tasks:
            if t.id == task_id:
                return t
        raise KeyError(task_id)

    def values(self) -> dict[str, dict[str, float]]:
        return {t.id: dict(t.values) for t in self.tasks if t.values is not None}

    def to_json(self) -> dict:
        doc: dict[str, Any] = {
            "program": self.program,
            "seed": self.seed,
            "tasks": [t.to_json() for t in self.tasks],
            "distributions": {k: d.to_json() for k, d in sorted(self.distributions.items())},
        }
        if self.variational_trace is not None:
            doc["variational_trace"] = [{"theta": th, "objective": obj} for th, obj in self.variational_trace]
        return doc

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True, allow_nan=False) + "\n"


# -- builtins ---------------------------------------------------------------

_CALL = re.compile(r"^\s*([A-Za-z_]\w*)\s*(?:\((.*)\))?\s*$")


def parse_op(op: str, args: Mapping[str, Any], positional: tuple[str, ...]) -> tuple[str, dict]:
    """Split ``"ghz(3)"`` into ``("ghz", {"n": 3})``; keyword ``args`` win over positional ones."""
    m = _CALL.match(op or "")
    if not m:
        raise PlanInvalid(f"cannot parse operation {op!r}")
    name, inner = m.group(1), m.group(2)
    out: dict[str, Any] = {}
    if inner and inner.strip():
        values = [v.strip() for v in inner.split(",")]
        if len(values) > len(positional):
            raise PlanInvalid(f"{name} takes at most {len(positional)} arguments")
        for key, text in zip(positional, values):
            try:
                out[key] = int(text)
            except ValueError:
                try:
                    out[key] = float(text)
                except ValueError:
                    raise PlanInvalid(f"{name}: argument {text!r} is not a number") from None
    out.update(args)
    return name, out


def _resolve(op: str, args: Mapping[str, Any], table: Mapping[str, tuple]) -> tuple[Callable, dict]:
    m = _CALL.match(op or "")
    if not m or m.group(1) not in table:
        raise PlanInvalid(f"unknown builtin {op!r}; known: {sorted(table)}")
    positional, fn = table[m.group(1)]
    return fn, parse_op(op, args, positional)[1]


def ghz(n: int) -> Circuit:
    if n < 1:
        raise ValueError("ghz needs n >= 1")
    gates = [Gate("h", (0,))] + [Gate("cx", (q, q + 1)) for q in range(n - 1)]
    gates += [Gate("measure", (q,)) for q in range(n)]
    return Circuit(n, tuple(gates), name=f"ghz{n}")


def random_circuit(n: int, depth: int, seed: int = 0) -> Circuit:
    """Reproducible random circuit over h, x, s, t, rz, rx and cx, measured in full."""
    if n < 1 or depth < 0:
        raise ValueError("random circuit needs n >= 1 and depth >= 0")
    u = iter(uniforms(seed, 4 * max(1, depth)).tolist())
    one = ("h", "x", "s", "t", "rz", "rx")
    gates = []
    for _ in range(depth):
        pick = next(u)
        if n > 1 and pick < 0.3:
            a = int(next(u) * n)
            b = (a + 1 + int(next(u) * (n - 1))) % n
            gates.append(Gate("cx", (a, b)))
        else:
            name = one[int(pick * len(one)) % len(one)]
            q = int(next(u) * n)
            angle = (next(u) * 2 - 1) * math.pi
            gates.append(Gate(name, (q,), (angle,) if name in ("rz", "rx") else ()))
    gates += [Gate("measure", (q,)) for q in range(n)]
    return Circuit(n, tuple(gates), name=f"random{n}x{depth}")


GENERATORS: dict[str, tuple[tuple[str, ...], Callable[..., Circuit]]] = {
    "ghz": (("n",), lambda a: ghz(int(a["n"]))),
    "random": (("n", "depth", "seed"),
               lambda a: random_circuit(int(a["n"]), int(a.get("depth", 10)), int(a.get("seed", 0)))),
}


def _single_value(inputs: Mapping[str, Any], task_id: str) -> float:
    values = [v["value"] for _, v in sorted(inputs.items()) if isinstance(v, Mapping) and "value" in v]
    if len(values) != 1:
        raise ValueError(f"{task_id}: expected exactly one predecessor with a 'value'")
    return float(values[0])


def _const(args, inputs, task_id):
    values = args.get("values", args)
    out = {}
    for k, v in values.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValueError(f"{task_id}: const value {k!r} is not a number")
        out[str(k)] = float(v)
    return out


def _expectation(args, inputs, task_id):
    quantum = {k: v for k, v in inputs.items() if isinstance(v, QuantumOutput)}
    source = args.get("task")
    if source is None:
        if len(quantum) != 1:
            raise ValueError(f"{task_id}: name the quantum predecessor with args.task")
        source = next(iter(quantum))
    if source not in quantum:
        raise ValueError(f"{task_id}: {source!r} is not a quantum predecessor")
    return {"value": quantum[source].expectation_z(int(args.get("qubit", 0)))}


def _reduce(fn):
    def run(args, inputs, task_id):
        values = [float(v["value"]) for _, v in sorted(inputs.items())
                  if isinstance(v, Mapping) and "value" in v]
        if not values:
            raise ValueError(f"{task_id}: no predecessor produced a 'value'")
        return {"value": fn(values)}
    return run


def _linear(args, inputs, task_id):
    x = _single_value(inputs, task_id)
    return {str(args.get("name", "value")): float(args.get("a", 1.0)) * x + float(args.get("b", 0.0))}


CLASSICAL: dict[str, tuple[tuple[str, ...], Callable]] = {
    "const": ((), _const),
    "expectation_z": (("qubit",), _expectation),
    "sum": ((), _reduce(sum)),
    "mean": ((), _reduce(lambda v: sum(v) / len(v))),
    "linear": (("a", "b"), _linear),
}


# -- plan -------------------------------------------------------------------

@dataclass
class JitCache:
    """Binary artifacts keyed by (bytecode hash, bindings, hardware id)."""

    entries: dict = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)
    hits: int = 0
    misses: int = 0

    @staticmethod
    def key(bytecode: Artifact, bindings: Mapping[str, float], hw_id: str):
        return bytecode.hash, tuple(sorted((k, float(v)) for k, v in bindings.items())), hw_id


@dataclass
class ExecutionPlan:
    program: HybridProgram
    assignments: Mapping[str, str]
    artifacts: Mapping[str, Artifact]
    catalog: Mapping[str, HardwareModel]
    metadata: MetadataStore = field(default_factory=MetadataStore)
    seed: int = 42
    exact: bool = False
    registry: PassRegistry = field(default_factory=standard_registry)
    sequence: PassSequence = DEFAULT_SEQUENCE
    context: Context = EMPTY_CONTEXT
    pool: ResourcePool | None = None
    cpu_nodes: int = 2
    jit_cache: JitCache = field(default_factory=JitCache)
    max_workers: int = 4

    def backend(self, task: Task) -> str:
        if task.kind is TaskKind.QUANTUM:
            return self.assignments[task.id]
        return CPU

    def validate(self) -> None:
        """Raise :class:`PlanInvalid` for anything that would fail before a task runs."""
        for task in self.program.tasks:
            if task.kind is TaskKind.QUANTUM:
                hw_id = self.assignments.get(task.id)
                if hw_id is None:
                    raise PlanInvalid(f"quantum task {task.id!r} has no backend assignment")
                if hw_id not in self.catalog:
                    raise PlanInvalid(f"task {task.id!r} is assigned to unknown hardware {hw_id!r}")
                if task.kernel is not None:
                    art = self.artifacts.get(task.id)
                    if art is None:
                        raise PlanInvalid(f"quantum task {task.id!r} has no compiled artifact")
                    if art.kind is ArtifactKind.BINARY and art.target != hw_id:
                        raise PlanInvalid(f"task {task.id!r}: binary targets {art.target!r}, assigned {hw_id!r}")
            else:
                table = CLASSICAL if task.kind is TaskKind.CLASSICAL else GENERATORS
                try:
                    _resolve(task.op, task.args, table)
                except PlanInvalid as exc:
                    raise PlanInvalid(f"task {task.id!r}: {exc}") from None

    def resource_pool(self) -> ResourcePool:
        if self.pool is not None:
            return self.pool
        used = sorted({self.assignments[t.id] for t in self.program.quantum_tasks})
        hybrid = max((t.resources.hybrid_nodes for t in self.program.tasks), default=0)
        level = max((t.resources.qpu_level for t in self.program.tasks), default=1)
        cpus = max([self.cpu_nodes] + [t.resources.cpu_nodes for t in self.program.tasks])
        return ResourcePool(cpus, tuple((h, level) for h in used), hybrid)

    def request(self, task: Task) -> ResourceRequest:
        r = task.resources
        if task.kind is TaskKind.QUANTUM:
            return ResourceRequest(r.cpu_nodes, (self.assignments[task.id],), r.hybrid_nodes, r.qpu_level)
        return ResourceRequest(max(1, r.cpu_nodes), 0, r.hybrid_nodes, 1)


def task_duration(task: Task) -> int:
    if task.kind is TaskKind.QUANTUM:
        return max(1, math.ceil(task.shots / SHOTS_PER_TICK))
    return 1


def plan_schedule(plan: ExecutionPlan) -> ScheduleTrace:
    """List-schedule the DAG: tasks in topological order, each submitted when its predecessors end."""
    pool = plan.resource_pool()
    planner = Planner(pool)
    ends: dict[str, int] = {}
    for tid in plan.program.topological_order():
        task = plan.program.task(tid)
        req = plan.request(task)
        reason = infeasibility(req, pool)
        if reason is not None:
            raise PlanInvalid(f"task {tid!r}: {reason}")
        submit = max((ends[p] for p in plan.program.predecessors(tid)), default=0)
        placement = planner.place(Job(tid, submit, task_duration(task), req))
        ends[tid] = placement.end
    return planner.trace()


# -- execution --------------------------------------------------------------

def _measured_logical(circuit: Circuit) -> tuple[int, ...]:
    return tuple(g.qubits[0] for g in circuit.instructions if g.is_measure)


class _Runner:
    def __init__(self, plan: ExecutionPlan):
        self.plan = plan
        self.outputs: dict[str, Any] = {}
        self.binaries: dict[str, Artifact] = {}

    def bindings_for(self, task: Task) -> dict[str, float]:
        values = dict(task.bindings)
        if task.bindings_from is not None:
            produced = self.outputs.get(task.bindings_from)
            if not isinstance(produced, Mapping):
                raise ValueError(f"{task.bindings_from!r} produced no classical values")
            values.update({k: float(v) for k, v in produced.items()})
        return values

    def inputs_for(self, task: Task) -> dict[str, Any]:
        return {p: self.outputs[p] for p in self.plan.program.predecessors(task.id) if p in self.outputs}

    def run(self, task: Task, buffer: RecordBuffer) -> Any:
        if task.kind is TaskKind.CLASSICAL:
            fn, args = _resolve(task.op, task.args, CLASSICAL)
            return fn(args, self.inputs_for(task), task.id)
        if task.kind is TaskKind.GENERATOR:
            fn, args = _resolve(task.op, task.args, GENERATORS)
            return fn(args)
        return self.run_quantum(task, buffer)

    def generator_of(self, task: Task) -> str:
        program = self.plan.program
        return next(p for p in program.predecessors(task.id) if program.task(p).kind is TaskKind.GENERATOR)

    def bytecode_for(self, task: Task, buffer: RecordBuffer) -> Artifact:
        if task.kernel is not None:
            return self.plan.artifacts[task.id]
        circuit = self.outputs[self.generator_of(task)]
        ctx = CompilationContext(metadata=buffer, context=self.plan.context, subject=task.id)
        return compile_kernel(circuit, self.plan.registry, self.plan.sequence, ctx)

    def run_quantum(self, task: Task, buffer: RecordBuffer) -> QuantumOutput:
        plan = self.plan
        hw = plan.catalog[plan.assignments[task.id]]
        artifact = self.bytecode_for(task, buffer)
        bindings = self.bindings_for(task)
        if artifact.kind is ArtifactKind.BYTECODE:
            needed = free_symbols(artifact.kernel)
            bindings = {k: v for k, v in bindings.items() if k in needed}
            key = JitCache.key(artifact, bindings, hw.id)
            with plan.jit_cache.lock:
                binary = plan.jit_cache.entries.get(key)
            if binary is None:
                ctx = CompilationContext(hardware=hw, metadata=buffer, context=plan.context,
                                         stage="jit", seed=plan.seed, subject=task.id)
                binary = compile_jit(artifact, bindings, hw, plan.registry, ctx, plan.sequence)
                with plan.jit_cache.lock:
                    plan.jit_cache.entries.setdefault(key, binary)
                    plan.jit_cache.misses += 1
                buffer.record("runtime", Kind.COMPILATION, task.id,
                              {"event": "compile_jit", "bytecode": artifact.hash, "binary": binary.hash,
                               "target": hw.id})
            else:
                with plan.jit_cache.lock:
                    plan.jit_cache.hits += 1
        else:
            binary = artifact
        self.binaries[task.id] = binary
        seed = derive_seed(plan.seed, task.id)
        result = simulate(binary.kernel, task.shots, seed)
        probs = outcome_probabilities(binary.kernel) if plan.exact else None
        kernel = (plan.program.kernels[task.kernel] if task.kernel is not None
                  else self.outputs[self.generator_of(task)])
        measured = _measured_logical(kernel)
        buffer.record("runtime", Kind.PERFORMANCE, task.id,
                      {"shots": task.shots, "distinct_outcomes": len(result.counts), "backend": hw.id,
                       "binary": binary.hash})
        return QuantumOutput(result, measured, probs)


def execute(plan: ExecutionPlan) -> RunReport:
    """Run the plan; failures are recorded per task and only poison descendants."""
    plan.validate()
    trace = plan_schedule(plan)
    program, store = plan.program, plan.metadata
    placements = trace.by_job()
    runner = _Runner(plan)
    status: dict[str, tuple[str, str | None]] = {}

    groups: dict[int, list[str]] = defaultdict(list)
    for tid, p in placements.items():
        groups[p.start].append(tid)

    for start in sorted(groups):
        ids = sorted(groups[start])
        runnable = []
        for tid in ids:
            bad = [p for p in program.predecessors(tid) if status.get(p, ("", None))[0] != "completed"]
            if bad:
                status[tid] = ("failed", f"upstream task {bad[0]!r} did not complete")
            else:
                runnable.append(tid)
        buffers = {tid: RecordBuffer() for tid in ids}
        for tid in ids:
            task = program.task(tid)
            payload = {"event": "start", "backend": plan.backend(task), "tick": start}
            if task.kind is TaskKind.QUANTUM:
                payload["shots"] = task.shots
            store.record("runtime", Kind.EXECUTION, tid, payload)

        by_backend: dict[str, list[str]] = defaultdict(list)
        for tid in runnable:
            by_backend[plan.backend(program.task(tid))].append(tid)
        results: dict[str, Any] = {}

        def lane(tids: list[str]) -> None:
            for tid in tids:
                try:
                    results[tid] = runner.run(program.task(tid), buffers[tid])
                except (ToolchainError, ValueError, KeyError) as exc:
                    results[tid] = TaskFailed(tid, exc)

        lanes = [by_backend[b] for b in sorted(by_backend)]
        if len(lanes) <= 1 or plan.max_workers <= 1:
            for tids in lanes:
                lane(tids)
        else:
            with ThreadPoolExecutor(max_workers=min(plan.max_workers, len(lanes))) as pool:
                list(pool.map(lane, lanes))

        for tid in ids:
            task = program.task(tid)
            if tid in results:
                out = results[tid]
                if isinstance(out, TaskFailed):
                    status[tid] = ("failed", str(out.cause))
                    buffers[tid].pending.clear()
                else:
                    status[tid] = ("completed", None)
                    runner.outputs[tid] = out
            buffers[tid].flush(store)
            payload = {"event": "end", "status": status[tid][0], "backend": plan.backend(task),
                       "tick": placements[tid].end}
            if task.kind is TaskKind.QUANTUM:
                payload["shots"] = task.shots
            if status[tid][1] is not None:
                payload["error"] = status[tid][1][:500]
            store.record("runtime", Kind.EXECUTION, tid, payload)

    reports = []
    for task in sorted(program.tasks, key=lambda t: t.id):
        p = placements[task.id]
        st, err = status[task.id]
        out = runner.outputs.get(task.id)
        reports.append(TaskReport(
            task.id, task.kind, st, plan.backend(task), p.start, p.end, err,
            result=out.result if isinstance(out, QuantumOutput) else None,
            values=out if isinstance(out, Mapping) else None,
            binary=runner.binaries[task.id].hash if task.id in runner.binaries else None,
            probabilities=out.probabilities if isinstance(out, QuantumOutput) else None))

    grouped: dict[str, list[ShotResult]] = defaultdict(list)
    for r in reports:
        if r.result is not None:
            task = program.task(r.id)
            grouped[task.kernel if task.kernel is not None else r.id].append(r.result)
    distributions = {k: consolidate(v) for k, v in sorted(grouped.items())}
    return RunReport(program.name, plan.seed, tuple(reports), distributions)


# -- variational loop ---------------------------------------------------------

@dataclass(frozen=True)
class VariationalStep:
    iteration: int
    theta: float
    objective: float


def run_variational_loop(kernel: Circuit, hw: HardwareModel, *, start: float = 0.0, step: float = 0.1,
                         iterations: int = 20, shots: int = 1000, qubit: int = 0, seed: int = 42,
                         exact: bool = False, metadata: MetadataStore | None = None,
                         registry: PassRegistry | None = None,
                         sequence: PassSequence = DEFAULT_SEQUENCE,
                         jit_cache: JitCache | None = None) -> list[VariationalStep]:
    """Minimise <Z_qubit> over the kernel's single parameter by fixed-step coordinate descent.

    theta_k = start + k * step for an integer k, so revisiting a point reuses
    the cached binary exactly.  The first move is +step; afterwards the
    direction flips whenever the latest objective is worse than the one before.
    """
    symbols = sorted(free_symbols(kernel))
    if len(symbols) != 1:
        raise InvalidProgram(f"variational kernel needs exactly one free symbol, has {symbols}")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    (symbol,) = symbols
    registry = registry or standard_registry()
    store = metadata if metadata is not None else MetadataStore()
    cache = jit_cache or JitCache()
    subject = kernel.name
    bytecode = compile_kernel(kernel, registry, sequence,
                              CompilationContext(metadata=store, subject=subject))

    trace: list[VariationalStep] = []
    k, direction = 0, 1
    for it in range(iterations):
        theta = start + k * step
        tid = f"{subject}@{it}"
        program = HybridProgram(f"{subject}-iter{it}",
                                (Task(tid, TaskKind.QUANTUM, kernel=subject, shots=shots,
                                      bindings={symbol: theta}),),
                                (), {subject: kernel})
        plan = ExecutionPlan(program, {tid: hw.id}, {tid: bytecode}, {hw.id: hw}, store, seed,
                             exact, registry, sequence, jit_cache=cache, max_workers=1)
        report = execute(plan)
        rep = report.task(tid)
        if rep.status != "completed":
            raise TaskFailed(tid, rep.error or "unknown error")
        out = QuantumOutput(rep.result, _measured_logical(kernel), rep.probabilities)
        objective = out.expectation_z(qubit)
        store.record("variational", Kind.PERFORMANCE, subject,
                     {"iteration": it, "theta": theta, "objective": objective})
        trace.append(VariationalStep(it, theta, objective))
        if len(trace) >= 2 and trace[-1].objective > trace[-2].objective:
            direction = -direction
        k += direction
    return trace


__all__ = [
    "CLASSICAL", "CPU", "Distribution", "ExecutionPlan", "GENERATORS", "JitCache", "QuantumOutput",
    "RunReport", "TaskReport", "VariationalStep", "consolidate", "execute", "ghz", "parse_op",
    "plan_schedule", "random_circuit", "run_variational_loop", "task_duration",
]
