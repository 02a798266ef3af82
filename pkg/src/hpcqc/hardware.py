"""Hardware descriptors, conformance, fidelity estimates and the sampling backend."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Mapping

import numpy as np

from .errors import NoMeasurement, NonConformant, RangeError, SchemaError, TooLarge, UnboundSymbol
from .ir import GATE_TABLE, Circuit, free_symbols, statevector
from .ir.oracle import MAX_QUBITS

UNITARY_GATES = frozenset(g for g in GATE_TABLE if g != "measure")


@dataclass(frozen=True)
class HardwareModel:
    id: str
    technology: str
    num_qubits: int
    coupling: frozenset[tuple[int, int]]
    native_gates: frozenset[str]
    gate_error: Mapping[tuple[str, tuple[int, ...]], float] = field(default_factory=dict)
    readout_error: Mapping[int, float] = field(default_factory=dict)
    qubit_ok: tuple[bool, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "coupling", frozenset(tuple(sorted(e)) for e in self.coupling))
        object.__setattr__(self, "native_gates", frozenset(self.native_gates))
        if not self.qubit_ok:
            object.__setattr__(self, "qubit_ok", (True,) * self.num_qubits)
        object.__setattr__(self, "qubit_ok", tuple(bool(b) for b in self.qubit_ok))
        _validate(self)

    def __hash__(self):
        return hash((self.id, self.num_qubits, self.coupling))

    @cached_property
    def neighbours(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {q: [] for q in range(self.num_qubits)}
        for a, b in self.coupling:
            adj[a].append(b)
            adj[b].append(a)
        for q in adj:
            adj[q].sort()
        return adj

    def adjacent(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.coupling

    def error_of(self, name: str, qubits: tuple[int, ...]) -> float:
        """Calibrated error of a gate; 2-qubit entries are looked up in either orientation."""
        p = self.gate_error.get((name, tuple(qubits)))
        if p is None and len(qubits) == 2:
            p = self.gate_error.get((name, (qubits[1], qubits[0])))
        return 0.0 if p is None else p

    @property
    def usable_qubits(self) -> list[int]:
        return [q for q in range(self.num_qubits) if self.qubit_ok[q]]

    def shortest_path(self, src: int, dst: int) -> list[int] | None:
        """Lexicographically smallest among the shortest coupling paths."""
        if src == dst:
            return [src]
        dist = {dst: 0}
        queue = deque([dst])
        while queue:
            u = queue.popleft()
            for v in self.neighbours[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        if src not in dist:
            return None
        # walking from src, the smallest neighbour one step closer gives the lexicographic minimum
        path = [src]
        while path[-1] != dst:
            here = path[-1]
            path.append(min(v for v in self.neighbours[here] if dist.get(v) == dist[here] - 1))
        return path

    def with_qubit_ok(self, flags) -> "HardwareModel":
        return HardwareModel(self.id, self.technology, self.num_qubits, self.coupling, self.native_gates,
                             self.gate_error, self.readout_error, tuple(flags))

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "technology": self.technology,
            "num_qubits": self.num_qubits,
            "coupling": [list(e) for e in sorted(self.coupling)],
            "native_gates": sorted(self.native_gates),
            "gate_errors": [{"gate": g, "qubits": list(q), "p": p}
                            for (g, q), p in sorted(self.gate_error.items())],
            "readout_errors": [{"qubit": q, "p": p} for q, p in sorted(self.readout_error.items())],
            "qubit_ok": list(self.qubit_ok),
        }


def _check_prob(p, what: str) -> float:
    if isinstance(p, bool) or not isinstance(p, (int, float)):
        raise SchemaError(f"{what}: probability must be a number", "p")
    if not 0.0 <= p <= 1.0:
        raise RangeError(f"{what}: probability {p} outside [0, 1]")
    return float(p)


def _validate(hw: HardwareModel) -> None:
    n = hw.num_qubits
    if isinstance(n, bool) or not isinstance(n, int) or n < 0:
        raise SchemaError(f"num_qubits must be a non-negative integer, got {n!r}", "num_qubits")
    for a, b in hw.coupling:
        if a == b or not (0 <= a < n and 0 <= b < n):
            raise SchemaError(f"coupling edge ({a}, {b}) out of range", "coupling")
    unknown = hw.native_gates - UNITARY_GATES
    if unknown:
        raise SchemaError(f"unknown native gate(s) {sorted(unknown)}", "native_gates")
    for (name, qubits), p in hw.gate_error.items():
        _check_prob(p, f"gate error {name}{qubits}")
        if name not in UNITARY_GATES:
            raise SchemaError(f"gate error for unknown gate {name!r}", "gate_errors")
        if len(qubits) != GATE_TABLE[name][0] or any(not 0 <= q < n for q in qubits):
            raise SchemaError(f"gate error key {name}{qubits} has bad qubits", "gate_errors")
        if len(qubits) == 2 and (min(qubits), max(qubits)) not in hw.coupling:
            raise SchemaError(f"gate error for {name}{qubits} is not on a coupling edge", "gate_errors")
    for q, p in hw.readout_error.items():
        _check_prob(p, f"readout error on qubit {q}")
        if not 0 <= q < n:
            raise SchemaError(f"readout error for qubit {q} out of range", "readout_errors")
    if len(hw.qubit_ok) != n:
        raise SchemaError(f"qubit_ok has {len(hw.qubit_ok)} entries for {n} qubits", "qubit_ok")


_DESCRIPTOR_KEYS = {"id", "technology", "num_qubits", "coupling", "native_gates",
                    "gate_errors", "readout_errors", "qubit_ok"}


def load_descriptor(source: str | Mapping[str, Any]) -> HardwareModel:
    """Build a validated model from descriptor JSON text or an already-decoded dict."""
    if isinstance(source, str):
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from None
    else:
        doc = source
    if not isinstance(doc, Mapping):
        raise SchemaError("descriptor must be a JSON object")
    for key in ("id", "num_qubits", "coupling", "native_gates"):
        if key not in doc:
            raise SchemaError(f"missing key {key!r}", key)
    extra = set(doc) - _DESCRIPTOR_KEYS
    if extra:
        raise SchemaError(f"unknown key {sorted(extra)[0]!r}", sorted(extra)[0])
    try:
        coupling = [tuple(int(x) for x in e) for e in doc["coupling"]]
        if any(len(e) != 2 for e in coupling):
            raise ValueError
    except (TypeError, ValueError):
        raise SchemaError("coupling must be an array of [i, j] pairs", "coupling") from None
    gate_error = {}
    for entry in doc.get("gate_errors", []):
        if not isinstance(entry, Mapping) or {"gate", "qubits", "p"} - set(entry):
            raise SchemaError("gate_errors entries need 'gate', 'qubits' and 'p'", "gate_errors")
        gate_error[(entry["gate"], tuple(entry["qubits"]))] = _check_prob(entry["p"], f"gate error {entry['gate']}")
    readout = {}
    for entry in doc.get("readout_errors", []):
        if not isinstance(entry, Mapping) or {"qubit", "p"} - set(entry):
            raise SchemaError("readout_errors entries need 'qubit' and 'p'", "readout_errors")
        readout[int(entry["qubit"])] = _check_prob(entry["p"], f"readout error q{entry['qubit']}")
    native = doc["native_gates"]
    if not isinstance(native, list) or not all(isinstance(g, str) for g in native):
        raise SchemaError("native_gates must be an array of gate names", "native_gates")
    qubit_ok = doc.get("qubit_ok", [])
    if not isinstance(qubit_ok, list) or not all(isinstance(b, bool) for b in qubit_ok):
        raise SchemaError("qubit_ok must be an array of booleans", "qubit_ok")
    return HardwareModel(
        id=str(doc["id"]),
        technology=str(doc.get("technology", "unknown")),
        num_qubits=doc["num_qubits"],
        coupling=frozenset(coupling),
        native_gates=frozenset(native),
        gate_error=gate_error,
        readout_error=readout,
        qubit_ok=tuple(qubit_ok) if qubit_ok else (True,) * int(doc["num_qubits"]),
    )


# -- conformance and fidelity -----------------------------------------------

@dataclass(frozen=True)
class Violation:
    index: int | None
    reason: str
    detail: str = ""

    def __str__(self) -> str:
        where = "circuit" if self.index is None else f"@{self.index}"
        return f"{self.reason}{where}" + (f": {self.detail}" if self.detail else "")


def check_conformance(circuit: Circuit, hw: HardwareModel) -> list[Violation]:
    symbols = free_symbols(circuit)
    if symbols:
        raise UnboundSymbol(f"unbound symbols: {', '.join(sorted(symbols))}")
    out = []
    if circuit.num_qubits > hw.num_qubits:
        out.append(Violation(None, "TooManyQubits", f"{circuit.num_qubits} > {hw.num_qubits}"))
    for i, g in enumerate(circuit.instructions):
        if g.is_measure:
            continue
        if g.name not in hw.native_gates:
            out.append(Violation(i, "NonNativeGate", g.name))
        elif len(g.qubits) == 2 and not hw.adjacent(*g.qubits):
            out.append(Violation(i, "NonAdjacent", f"{g.name} q{g.qubits[0]},q{g.qubits[1]}"))
    return out


def estimate_fidelity(circuit: Circuit, hw: HardwareModel) -> float:
    """Independent-error success probability of running ``circuit`` on ``hw``."""
    violations = check_conformance(circuit, hw)
    if violations:
        raise NonConformant(f"{len(violations)} violation(s), first: {violations[0]}")
    f = 1.0
    for g in circuit.instructions:
        if g.is_measure:
            f *= 1.0 - hw.readout_error.get(g.qubits[0], 0.0)
        else:
            f *= 1.0 - hw.error_of(g.name, g.qubits)
    return f


# -- sampling backend -------------------------------------------------------

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
MASK64 = (1 << 64) - 1


def splitmix64(seed: int, n: int) -> np.ndarray:
    """First ``n`` outputs of SplitMix64 started at ``seed`` (as uint64)."""
    with np.errstate(over="ignore"):
        z = np.uint64(seed & MASK64) + np.arange(1, n + 1, dtype=np.uint64) * _GAMMA
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def uniforms(seed: int, n: int) -> np.ndarray:
    """``n`` doubles in [0, 1) from the top 53 bits of SplitMix64."""
    return (splitmix64(seed, n) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


def derive_seed(seed: int, *labels: str) -> int:
    """Mix string labels into a seed so parallel streams stay independent and order-free."""
    from .ir import fnv1a64

    h = seed & MASK64
    for label in labels:
        h = int(splitmix64(h ^ fnv1a64(label.encode("utf-8")), 1)[0])
    return h


@dataclass(frozen=True)
class ShotResult:
    """Bitstring counts; character k is the outcome of the k-th measurement."""

    counts: Mapping[str, int]
    shots: int
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "counts", dict(sorted(self.counts.items())))
        if sum(self.counts.values()) != self.shots:
            raise ValueError("counts do not sum to shots")

    @property
    def width(self) -> int:
        return len(next(iter(self.counts))) if self.counts else 0

    def frequencies(self) -> dict[str, float]:
        return {k: v / self.shots for k, v in self.counts.items()}


def _check_runnable(circuit: Circuit) -> None:
    if circuit.num_qubits > MAX_QUBITS:
        raise TooLarge(f"{circuit.num_qubits} qubits exceeds the {MAX_QUBITS}-qubit simulator")
    symbols = free_symbols(circuit)
    if symbols:
        raise UnboundSymbol(f"unbound symbols: {', '.join(sorted(symbols))}")
    if not circuit.measured_qubits:
        raise NoMeasurement("circuit has no measurements")


def outcome_probabilities(circuit: Circuit) -> dict[str, float]:
    """Exact distribution over measured bitstrings (noise-free dynamics)."""
    _check_runnable(circuit)
    probs = np.abs(statevector(circuit)) ** 2
    probs[probs < 1e-15] = 0.0  # numerical dust from native-gate rewrites
    measured = circuit.measured_qubits
    index = np.arange(probs.size)
    key = np.zeros(probs.size, dtype=np.int64)
    for k, q in enumerate(measured):
        key |= ((index >> q) & 1) << (len(measured) - 1 - k)
    marginal = np.bincount(key, weights=probs, minlength=2 ** len(measured))
    marginal /= marginal.sum()
    width = len(measured)
    return {format(i, f"0{width}b"): float(p) for i, p in enumerate(marginal) if p > 0.0}


def simulate(circuit: Circuit, shots: int, seed: int) -> ShotResult:
    """Sample ``shots`` measurement outcomes; identical inputs give identical counts."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    dist = outcome_probabilities(circuit)
    keys = list(dist)
    cumulative = np.cumsum([dist[k] for k in keys])
    cumulative[-1] = 1.0
    picks = np.searchsorted(cumulative, uniforms(seed, shots), side="right")
    tally = np.bincount(picks, minlength=len(keys))
    counts = {keys[i]: int(c) for i, c in enumerate(tally) if c}
    return ShotResult(counts, shots, seed)
