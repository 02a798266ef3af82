"""Hybrid task graphs."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

from ..errors import InvalidProgram
from .circuit import Circuit


class TaskKind(str, Enum):
    CLASSICAL = "classical"
    QUANTUM = "quantum"
    GENERATOR = "generator"


@dataclass(frozen=True)
class ResourceRequest:
    cpu_nodes: int = 0
    qpus: int | tuple[str, ...] = 0
    hybrid_nodes: int = 0
    qpu_level: int = 1

    def __post_init__(self):
        if not isinstance(self.qpus, int):
            object.__setattr__(self, "qpus", tuple(self.qpus))
        if self.cpu_nodes < 0 or self.hybrid_nodes < 0 or self.qpu_count < 0:
            raise ValueError(f"negative resource request: {self}")
        if self.qpu_level < 1:
            raise ValueError("qpu_level must be >= 1")

    @property
    def qpu_count(self) -> int:
        return self.qpus if isinstance(self.qpus, int) else len(self.qpus)

    @property
    def specific_qpus(self) -> tuple[str, ...] | None:
        return None if isinstance(self.qpus, int) else self.qpus

    def to_json(self) -> dict:
        return {
            "cpu_nodes": self.cpu_nodes,
            "qpus": self.qpus if isinstance(self.qpus, int) else list(self.qpus),
            "hybrid_nodes": self.hybrid_nodes,
            "qpu_level": self.qpu_level,
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any] | None) -> "ResourceRequest":
        data = dict(data or {})
        qpus = data.get("qpus", 0)
        if isinstance(qpus, list):
            qpus = tuple(str(q) for q in qpus)
        return cls(
            cpu_nodes=int(data.get("cpu_nodes", 0)),
            qpus=qpus,
            hybrid_nodes=int(data.get("hybrid_nodes", 0)),
            qpu_level=int(data.get("qpu_level", 1)),
        )


@dataclass(frozen=True)
class Task:
    """One node of a hybrid program.

    Classical and generator tasks name a builtin in ``op`` with ``args``.
    Quantum tasks reference ``kernel`` (or take the circuit of a generator
    predecessor when ``kernel`` is None) and get parameters either from the
    static ``bindings`` or from the outputs of task ``bindings_from``.
    """

    id: str
    kind: TaskKind
    op: str | None = None
    args: Mapping[str, Any] = field(default_factory=dict)
    kernel: str | None = None
    shots: int = 1
    bindings: Mapping[str, float] = field(default_factory=dict)
    bindings_from: str | None = None
    resources: ResourceRequest = field(default_factory=ResourceRequest)
    hardware: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", TaskKind(self.kind))
        if self.kind is TaskKind.QUANTUM and self.shots < 1:
            raise InvalidProgram(f"task {self.id!r}: shots must be >= 1")


@dataclass(frozen=True)
class HybridProgram:
    name: str
    tasks: tuple[Task, ...]
    edges: tuple[tuple[str, str], ...] = ()
    kernels: Mapping[str, Circuit] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        ids = [t.id for t in self.tasks]
        if len(set(ids)) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise InvalidProgram(f"duplicate task id {dup!r}")
        known = set(ids)
        for u, v in self.edges:
            if u not in known or v not in known:
                raise InvalidProgram(f"edge ({u}, {v}) references an unknown task")
        cycle = find_cycle(ids, self.edges)
        if cycle:
            raise InvalidProgram(f"dependency cycle: {' -> '.join(cycle)}")
        for t in self.tasks:
            if t.kind is not TaskKind.QUANTUM:
                continue
            if t.kernel is not None:
                if t.kernel not in self.kernels:
                    raise InvalidProgram(f"task {t.id!r} references unknown kernel {t.kernel!r}")
            elif not any(self.task(p).kind is TaskKind.GENERATOR for p in self.predecessors(t.id)):
                raise InvalidProgram(f"quantum task {t.id!r} has neither a kernel nor a generator predecessor")
            if t.bindings_from is not None and t.bindings_from not in self.predecessors(t.id):
                raise InvalidProgram(f"task {t.id!r} takes bindings from non-predecessor {t.bindings_from!r}")

    def task(self, task_id: str) -> Task:
        for t in self.tasks:
            if t.id == task_id:
                return t
        raise KeyError(task_id)

    def predecessors(self, task_id: str) -> list[str]:
        return sorted(u for u, v in self.edges if v == task_id)

    def successors(self, task_id: str) -> list[str]:
        return sorted(v for u, v in self.edges if u == task_id)

    def descendants(self, task_id: str) -> set[str]:
        out: set[str] = set()
        stack = [task_id]
        while stack:
            for s in self.successors(stack.pop()):
                if s not in out:
                    out.add(s)
                    stack.append(s)
        return out

    def topological_order(self) -> list[str]:
        """Kahn's algorithm, smallest id first among ready tasks."""
        indeg = {t.id: 0 for t in self.tasks}
        for _, v in self.edges:
            indeg[v] += 1
        ready = [i for i, d in indeg.items() if d == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            u = heapq.heappop(ready)
            order.append(u)
            for v in self.successors(u):
                indeg[v] -= 1
                if indeg[v] == 0:
                    heapq.heappush(ready, v)
        return order

    @property
    def quantum_tasks(self) -> list[Task]:
        return [t for t in self.tasks if t.kind is TaskKind.QUANTUM]


def find_cycle(nodes, edges) -> list[str] | None:
    """Return one dependency cycle as ``[a, b, ..., a]``, or None."""
    succ: dict[str, list[str]] = {n: [] for n in nodes}
    for u, v in edges:
        succ.setdefault(u, []).append(v)
        succ.setdefault(v, [])
    for n in succ:
        succ[n].sort()
    color = {n: 0 for n in succ}
    path: list[str] = []

    def visit(n):
        color[n] = 1
        path.append(n)
        for m in succ[n]:
            if color[m] == 1:
                return path[path.index(m):] + [m]
            if color[m] == 0:
                found = visit(m)
                if found:
                    return found
        path.pop()
        color[n] = 2
        return None

    for n in sorted(succ):
        if color[n] == 0:
            found = visit(n)
            if found:
                return found
    return None
