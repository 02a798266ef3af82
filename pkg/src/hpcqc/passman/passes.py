"""Circuit transformations.

Every transform has the signature ``transform(circuit, ctx, **options)``.
"Adjacent" always means adjacent on each operand's own qubit stream: gates
on other qubits in between do not block a rewrite.
"""

from __future__ import annotations

import math
from collections import defaultdict

from ..errors import InsufficientQubits, InvalidCircuit, UnsupportedNativeSet, Unroutable
from ..ir import Add, Circuit, Gate, Lit, asap_layers, fold
from ..ir.circuit import ROTATIONS
from .registry import CompilationContext

INVERSES = {
    "h": "h", "x": "x", "y": "y", "z": "z",
    "s": "sdg", "sdg": "s", "t": "tdg", "tdg": "t",
    "cx": "cx", "cz": "cz", "swap": "swap",
}
SYMMETRIC = frozenset({"cz", "swap"})
ZERO_ANGLE_TOL = 1e-12


def _same_operands(a: Gate, b: Gate) -> bool:
    if a.qubits == b.qubits:
        return True
    return a.name in SYMMETRIC and set(a.qubits) == set(b.qubits)


class _Streams:
    """Output list with per-qubit stacks of the live instructions touching each qubit."""

    def __init__(self):
        self.out: list[Gate | None] = []
        self.stacks: dict[int, list[int]] = defaultdict(list)

    def last_common(self, qubits) -> int | None:
        tops = {self.stacks[q][-1] if self.stacks[q] else None for q in qubits}
        if len(tops) != 1:
            return None
        return tops.pop()

    def push(self, g: Gate) -> None:
        self.out.append(g)
        for q in g.qubits:
            self.stacks[q].append(len(self.out) - 1)

    def drop(self, j: int) -> None:
        for q in self.out[j].qubits:
            self.stacks[q].pop()
        self.out[j] = None

    def gates(self) -> list[Gate]:
        return [g for g in self.out if g is not None]


def _cancel_sweep(instructions) -> tuple[list[Gate], bool]:
    s = _Streams()
    changed = False
    for g in instructions:
        if g.name in INVERSES:
            j = s.last_common(g.qubits)
            if j is not None:
                prev = s.out[j]
                if INVERSES.get(prev.name) == g.name and _same_operands(prev, g):
                    s.drop(j)
                    changed = True
                    continue
        s.push(g)
    return s.gates(), changed


def cancel_inverses(circuit: Circuit, ctx: CompilationContext | None = None) -> Circuit:
    gates, changed = _cancel_sweep(circuit.instructions)
    while changed:
        gates, changed = _cancel_sweep(gates)
    return circuit.with_instructions(gates)


def _is_zero_angle(expr) -> bool:
    if not isinstance(expr, Lit):
        return False
    return abs(math.remainder(expr.value, 2 * math.pi)) <= ZERO_ANGLE_TOL


def _merge_sweep(instructions) -> tuple[list[Gate], bool]:
    s = _Streams()
    changed = False
    for g in instructions:
        if g.name not in ROTATIONS:
            s.push(g)
            continue
        if _is_zero_angle(g.params[0]):
            changed = True
            continue
        j = s.last_common(g.qubits)
        prev = s.out[j] if j is not None else None
        if prev is None or prev.name != g.name:
            s.push(g)
            continue
        a, b = prev.params[0], g.params[0]
        total = fold(Add(a, b))
        changed = True
        if _is_zero_angle(total):
            s.drop(j)
        else:
            s.out[j] = Gate(g.name, g.qubits, (total,))
    return s.gates(), changed


def merge_rotations(circuit: Circuit, ctx: CompilationContext | None = None) -> Circuit:
    """Sum adjacent same-axis rotations; drop literal rotations that are 0 mod 2*pi."""
    gates, changed = _merge_sweep(circuit.instructions)
    while changed:
        gates, changed = _merge_sweep(gates)
    return circuit.with_instructions(gates)


def fold_constants(circuit: Circuit, ctx: CompilationContext | None = None) -> Circuit:
    gates = [Gate(g.name, g.qubits, tuple(fold(p) for p in g.params)) if g.params else g
             for g in circuit.instructions]
    return circuit.with_instructions(gates)


# -- decomposition ------------------------------------------------------------

_PI = math.pi


def _rz(q, angle):
    return Gate("rz", (q,), (angle if not isinstance(angle, float) else Lit(angle),))


def _rx(q, angle):
    return Gate("rx", (q,), (angle if not isinstance(angle, float) else Lit(angle),))


def _h_native(q):
    return [_rz(q, _PI / 2), _rx(q, _PI / 2), _rz(q, _PI / 2)]


# instruction order (first applied first)
RULES = {
    "h": lambda g: _h_native(g.qubits[0]),
    "x": lambda g: [_rx(g.qubits[0], _PI)],
    "y": lambda g: [_rz(g.qubits[0], -_PI / 2), _rx(g.qubits[0], _PI), _rz(g.qubits[0], _PI / 2)],
    "z": lambda g: [_rz(g.qubits[0], _PI)],
    "s": lambda g: [_rz(g.qubits[0], _PI / 2)],
    "sdg": lambda g: [_rz(g.qubits[0], -_PI / 2)],
    "t": lambda g: [_rz(g.qubits[0], _PI / 4)],
    "tdg": lambda g: [_rz(g.qubits[0], -_PI / 4)],
    "ry": lambda g: [_rz(g.qubits[0], -_PI / 2), _rx(g.qubits[0], g.params[0]), _rz(g.qubits[0], _PI / 2)],
    "swap": lambda g: [Gate("cx", g.qubits), Gate("cx", g.qubits[::-1]), Gate("cx", g.qubits)],
    "cz": lambda g: [Gate("h", (g.qubits[1],)), Gate("cx", g.qubits), Gate("h", (g.qubits[1],))],
}


def _expand(g: Gate, native: frozenset[str], depth: int = 0) -> list[Gate]:
    if g.is_measure or g.name in native:
        return [g]
    if g.name not in RULES or depth > 3:
        raise UnsupportedNativeSet(f"no rewrite from {g.name!r} into native set {sorted(native)}")
    out = []
    for sub in RULES[g.name](g):
        out.extend(_expand(sub, native, depth + 1))
    return out


def decompose_to_native(circuit: Circuit, ctx: CompilationContext) -> Circuit:
    hw = ctx.hardware
    out = []
    for g in circuit.instructions:
        out.extend(_expand(g, hw.native_gates))
    return circuit.with_instructions(out)


# -- mapping and routing ------------------------------------------------------

def choose_layout(circuit: Circuit, hw, qubit_ok=None) -> tuple[int, ...]:
    """Greedy calibration-aware initial layout (logical -> physical).

    Logical qubits with more two-qubit gates pick first; physical qubits are
    ranked by summed ``1 - error`` over native one-qubit gates, lowest index
    on ties, with miscalibrated qubits used only when the healthy ones run out.
    """
    n = circuit.num_qubits
    ok = tuple(qubit_ok) if qubit_ok is not None else hw.qubit_ok
    if n > hw.num_qubits:
        raise InsufficientQubits(f"{n} logical qubits on {hw.num_qubits}-qubit {hw.id}")
    participation = [0] * n
    for g in circuit.instructions:
        if len(g.qubits) == 2:
            for q in g.qubits:
                participation[q] += 1
    logical_order = sorted(range(n), key=lambda q: (-participation[q], q))
    one_qubit_native = sorted(g for g in hw.native_gates if g in ("h", "x", "y", "z", "s", "sdg",
                                                                   "t", "tdg", "rx", "ry", "rz"))

    def score(p):
        return sum(1.0 - hw.error_of(g, (p,)) for g in one_qubit_native)

    ranked = sorted(range(hw.num_qubits), key=lambda p: (-score(p), p))
    pool = [p for p in ranked if ok[p]] + [p for p in ranked if not ok[p]]
    layout = [0] * n
    for logical, physical in zip(logical_order, pool):
        layout[logical] = physical
    return tuple(layout)


def _swap_gates(a: int, b: int, native) -> list[Gate]:
    if "swap" in native:
        return [Gate("swap", (a, b))]
    if "cx" in native:
        return [Gate("cx", (a, b)), Gate("cx", (b, a)), Gate("cx", (a, b))]
    raise UnsupportedNativeSet("routing needs a native swap or cx")


def map_and_route(circuit: Circuit, ctx: CompilationContext, initial_layout=None) -> Circuit:
    """Place logical qubits and insert swaps so every two-qubit gate sits on an edge."""
    hw = ctx.hardware
    if circuit.layout is not None:
        return circuit
    qubit_ok = ctx.context.qubit_ok(hw.id, hw.num_qubits) if ctx.context is not None else None
    if initial_layout is None:
        layout = choose_layout(circuit, hw, qubit_ok)
    else:
        layout = tuple(int(p) for p in initial_layout)
        if len(layout) != circuit.num_qubits or len(set(layout)) != len(layout) \
                or any(not 0 <= p < hw.num_qubits for p in layout):
            raise InvalidCircuit(f"initial layout {layout} does not fit {hw.id}")
    pos = list(layout)
    occupant: dict[int, int] = {p: q for q, p in enumerate(pos)}
    out: list[Gate] = []
    for g in circuit.instructions:
        if len(g.qubits) == 2:
            a, b = g.qubits
            if not hw.adjacent(pos[a], pos[b]):
                path = hw.shortest_path(pos[a], pos[b])
                if path is None:
                    raise Unroutable(f"physical qubits {pos[a]} and {pos[b]} are not connected on {hw.id}")
                for u, v in zip(path[:-2], path[1:-1]):
                    out.extend(_swap_gates(u, v, hw.native_gates))
                    lu, lv = occupant.pop(u, None), occupant.pop(v, None)
                    if lu is not None:
                        pos[lu] = v
                        occupant[v] = lu
                    if lv is not None:
                        pos[lv] = u
                        occupant[u] = lv
        out.append(Gate(g.name, tuple(pos[q] for q in g.qubits), g.params))
    return Circuit(hw.num_qubits, tuple(out), name=circuit.name, layout=layout, final_layout=tuple(pos))


def schedule_asap(circuit: Circuit, ctx: CompilationContext | None = None) -> Circuit:
    """Reorder layer-major (stable within a layer) and annotate ASAP layers.

    Measurements stay a terminal block in their original order.
    """
    layers = asap_layers(circuit)
    body = [(layers[i], i) for i, g in enumerate(circuit.instructions) if not g.is_measure]
    tail = [(layers[i], i) for i, g in enumerate(circuit.instructions) if g.is_measure]
    order = sorted(body) + tail
    return circuit.with_instructions((circuit.instructions[i] for _, i in order),
                                     layers=tuple(layer for layer, _ in order))
