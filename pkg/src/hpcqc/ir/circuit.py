"""Quantum kernels: gates, circuits and their canonical text form."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from ..errors import InvalidCircuit, MissingBinding, NonFiniteValue
from .expr import ExprLike, ExprSyntaxError, Lit, ParamExpr, as_expr, format_expr, parse_expr

# name -> (qubit arity, parameter count)
GATE_TABLE: dict[str, tuple[int, int]] = {
    "h": (1, 0), "x": (1, 0), "y": (1, 0), "z": (1, 0),
    "s": (1, 0), "sdg": (1, 0), "t": (1, 0), "tdg": (1, 0),
    "rx": (1, 1), "ry": (1, 1), "rz": (1, 1),
    "cx": (2, 0), "cz": (2, 0), "swap": (2, 0),
    "measure": (1, 0),
}

ROTATIONS = frozenset({"rx", "ry", "rz"})


@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple[int, ...]
    params: tuple[ParamExpr, ...] = ()

    def __post_init__(self):
        if self.name not in GATE_TABLE:
            raise InvalidCircuit(f"unknown gate {self.name!r}")
        arity, nparams = GATE_TABLE[self.name]
        qubits = tuple(self.qubits)
        params = tuple(as_expr(p) for p in self.params)
        object.__setattr__(self, "qubits", qubits)
        object.__setattr__(self, "params", params)
        if len(qubits) != arity:
            raise InvalidCircuit(f"{self.name} acts on {arity} qubit(s), got {len(qubits)}")
        if len(params) != nparams:
            raise InvalidCircuit(f"{self.name} takes {nparams} parameter(s), got {len(params)}")
        if any(not isinstance(q, int) or isinstance(q, bool) or q < 0 for q in qubits):
            raise InvalidCircuit(f"qubit indices must be non-negative integers: {qubits}")
        if len(set(qubits)) != len(qubits):
            raise InvalidCircuit(f"{self.name} has repeated qubit operands {qubits}")

    @property
    def is_measure(self) -> bool:
        return self.name == "measure"

    def symbols(self) -> frozenset[str]:
        out: frozenset[str] = frozenset()
        for p in self.params:
            out |= p.symbols()
        return out

    def on(self, *qubits: int) -> "Gate":
        return Gate(self.name, tuple(qubits), self.params)

    def __str__(self) -> str:
        return format_gate(self)


def gate(name: str, *qubits: int, params: Sequence[ExprLike] = ()) -> Gate:
    return Gate(name, tuple(qubits), tuple(as_expr(p) for p in params))


@dataclass(frozen=True)
class Circuit:
    """An ordered gate list over ``num_qubits`` qubits.

    After mapping, instructions address physical qubits; ``layout`` holds the
    initial logical->physical assignment and ``final_layout`` where each
    logical qubit ended up after routing swaps.  ``layers`` is an optional
    scheduling annotation and takes no part in equality.
    """

    num_qubits: int
    instructions: tuple[Gate, ...] = ()
    name: str = "circuit"
    layout: tuple[int, ...] | None = None
    final_layout: tuple[int, ...] | None = None
    layers: tuple[int, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "instructions", tuple(self.instructions))
        if self.layout is not None:
            object.__setattr__(self, "layout", tuple(self.layout))
        if self.final_layout is not None:
            object.__setattr__(self, "final_layout", tuple(self.final_layout))
        if not isinstance(self.num_qubits, int) or self.num_qubits < 0:
            raise InvalidCircuit(f"invalid qubit count {self.num_qubits!r}")
        seen_measure = False
        measured: set[int] = set()
        for i, g in enumerate(self.instructions):
            if not isinstance(g, Gate):
                raise InvalidCircuit(f"instruction {i} is not a Gate")
            if any(q >= self.num_qubits for q in g.qubits):
                raise InvalidCircuit(
                    f"instruction {i} ({g.name}) addresses qubit {max(g.qubits)} "
                    f"of a {self.num_qubits}-qubit circuit")
            if g.is_measure:
                seen_measure = True
                if g.qubits[0] in measured:
                    raise InvalidCircuit(f"qubit {g.qubits[0]} measured twice")
                measured.add(g.qubits[0])
            elif seen_measure:
                raise InvalidCircuit(f"instruction {i} ({g.name}) follows a measurement")
        for label, lay in (("layout", self.layout), ("final_layout", self.final_layout)):
            if lay is None:
                continue
            if len(set(lay)) != len(lay) or any(not 0 <= p < self.num_qubits for p in lay):
                raise InvalidCircuit(f"{label} {lay} is not an injective map into {self.num_qubits} qubits")
        if self.layers is not None and len(self.layers) != len(self.instructions):
            raise InvalidCircuit("layer annotation length differs from instruction count")

    def __len__(self) -> int:
        return len(self.instructions)

    def __iter__(self):
        return iter(self.instructions)

    @property
    def gate_count(self) -> int:
        """Number of non-measurement instructions."""
        return sum(1 for g in self.instructions if not g.is_measure)

    @property
    def logical_qubits(self) -> int:
        return len(self.layout) if self.layout is not None else self.num_qubits

    @property
    def measured_qubits(self) -> tuple[int, ...]:
        return tuple(g.qubits[0] for g in self.instructions if g.is_measure)

    def with_instructions(self, instructions: Iterable[Gate], **changes) -> "Circuit":
        changes.setdefault("layers", None)
        return replace(self, instructions=tuple(instructions), **changes)

    def without_measurements(self) -> "Circuit":
        return self.with_instructions(g for g in self.instructions if not g.is_measure)

    def __str__(self) -> str:
        return serialize(self)


def free_symbols(circuit: Circuit) -> frozenset[str]:
    out: frozenset[str] = frozenset()
    for g in circuit.instructions:
        out |= g.symbols()
    return out


def bind_parameters(kernel: Circuit, bindings: Mapping[str, float]) -> Circuit:
    """Evaluate every parameter under ``bindings``; the structure is untouched."""
    missing = sorted(free_symbols(kernel) - set(bindings))
    if missing:
        raise MissingBinding(missing[0])
    out = []
    for g in kernel.instructions:
        if not g.params:
            out.append(g)
            continue
        values = []
        for p in g.params:
            v = p.evaluate(bindings)
            if not math.isfinite(v):
                raise NonFiniteValue(f"{g.name} parameter {format_expr(p)} evaluates to {v}")
            values.append(Lit(v))
        out.append(Gate(g.name, g.qubits, tuple(values)))
    return kernel.with_instructions(out, layers=kernel.layers)


def asap_layers(circuit: Circuit) -> list[int]:
    """1-based layer of each instruction under greedy as-soon-as-possible layering."""
    last = [0] * circuit.num_qubits
    layers = []
    for g in circuit.instructions:
        layer = 1 + max(last[q] for q in g.qubits)
        for q in g.qubits:
            last[q] = layer
        layers.append(layer)
    return layers


def circuit_depth(circuit: Circuit) -> int:
    return max(asap_layers(circuit), default=0)


# -- canonical text ---------------------------------------------------------

def format_gate(g: Gate) -> str:
    text = f"{g.name} " + ",".join(f"q{q}" for q in g.qubits)
    if g.params:
        text += " " + " ".join(format_expr(p) for p in g.params)
    return text


def serialize(circuit: Circuit) -> str:
    """Canonical text: ``qubits <n>`` header, optional layouts, one gate per line."""
    lines = [f"qubits {circuit.num_qubits}"]
    if circuit.layout is not None:
        lines.append("layout " + ",".join(map(str, circuit.layout)))
    if circuit.final_layout is not None:
        lines.append("final " + ",".join(map(str, circuit.final_layout)))
    lines.extend(format_gate(g) for g in circuit.instructions)
    return "\n".join(lines) + "\n"


def _int_list(text: str, lineno: int) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",")) if text else ()
    except ValueError:
        raise InvalidCircuit(f"line {lineno}: bad integer list {text!r}") from None


def deserialize(text: str, name: str = "circuit") -> Circuit:
    """Inverse of :func:`serialize`.  Blank lines and ``#`` comments are skipped."""
    num_qubits = None
    layout = final = None
    gates = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        head, _, rest = line.partition(" ")
        rest = rest.strip()
        if num_qubits is None:
            if head != "qubits":
                raise InvalidCircuit(f"line {lineno}: expected 'qubits <n>' header")
            try:
                num_qubits = int(rest)
            except ValueError:
                raise InvalidCircuit(f"line {lineno}: bad qubit count {rest!r}") from None
            continue
        if head == "layout":
            layout = _int_list(rest, lineno)
            continue
        if head == "final":
            final = _int_list(rest, lineno)
            continue
        operands, _, params = rest.partition(" ")
        try:
            qubits = tuple(int(tok[1:]) for tok in operands.split(",") if tok.startswith("q"))
            if len(qubits) != len(operands.split(",")):
                raise ValueError(operands)
            exprs = tuple(parse_expr(p) for p in params.split())
            gates.append(Gate(head, qubits, exprs))
        except (ValueError, ExprSyntaxError) as exc:
            raise InvalidCircuit(f"line {lineno}: {exc}") from None
    if num_qubits is None:
        raise InvalidCircuit("missing 'qubits <n>' header")
    return Circuit(num_qubits, tuple(gates), name=name, layout=layout, final_layout=final)


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def content_hash(circuit: Circuit) -> str:
    return f"{fnv1a64(serialize(circuit).encode('utf-8')):016x}"
