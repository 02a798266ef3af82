"""Dense linear-algebra reference for small circuits.

Qubit 0 is the least significant bit of a basis index.  Multi-qubit gate
matrices are written with their first operand as the most significant local
bit, so ``cx`` is ``|0><0| (x) I + |1><1| (x) X`` over (control, target).
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import DimensionMismatch, MeasurementPresent, TooLarge, UnboundSymbol
from .circuit import Circuit, Gate, free_symbols

MAX_QUBITS = 12

_S2 = 1.0 / math.sqrt(2.0)

FIXED_MATRICES: dict[str, np.ndarray] = {
    "h": np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    "s": np.array([[1, 0], [0, 1j]], dtype=complex),
    "sdg": np.array([[1, 0], [0, -1j]], dtype=complex),
    "t": np.array([[1, 0], [0, np.exp(1j * math.pi / 4)]], dtype=complex),
    "tdg": np.array([[1, 0], [0, np.exp(-1j * math.pi / 4)]], dtype=complex),
    "cx": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "cz": np.diag([1, 1, 1, -1]).astype(complex),
    "swap": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}


def rx(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=complex)


_ROTATION = {"rx": rx, "ry": ry, "rz": rz}


def gate_matrix(g: Gate) -> np.ndarray:
    if g.name in FIXED_MATRICES:
        return FIXED_MATRICES[g.name]
    if g.name in _ROTATION:
        if g.params[0].symbols():
            raise UnboundSymbol(f"{g.name} has unbound parameter {g.params[0]}")
        return _ROTATION[g.name](g.params[0].evaluate())
    raise MeasurementPresent(f"{g.name} has no unitary matrix")


def apply_matrix(state: np.ndarray, matrix: np.ndarray, qubits: tuple[int, ...],
                 num_qubits: int) -> np.ndarray:
    """Apply ``matrix`` to ``qubits`` of ``state``.

    ``state`` has shape ``(2**n,)`` or ``(2**n, batch)``; the batch axis lets
    the same routine build full unitaries column by column.
    """
    k = len(qubits)
    batch = state.shape[1:]
    tensor = state.reshape((2,) * num_qubits + batch)
    axes = [num_qubits - 1 - q for q in qubits]
    op = matrix.reshape((2,) * (2 * k))
    out = np.tensordot(op, tensor, axes=(list(range(k, 2 * k)), axes))
    out = np.moveaxis(out, list(range(k)), axes)
    return out.reshape(state.shape)


def _check_executable(circuit: Circuit) -> None:
    if circuit.num_qubits > MAX_QUBITS:
        raise TooLarge(f"{circuit.num_qubits} qubits exceeds the {MAX_QUBITS}-qubit limit")
    symbols = free_symbols(circuit)
    if symbols:
        raise UnboundSymbol(f"unbound symbols: {', '.join(sorted(symbols))}")


def unitary_of(circuit: Circuit) -> np.ndarray:
    _check_executable(circuit)
    if any(g.is_measure for g in circuit.instructions):
        raise MeasurementPresent("unitary_of needs a measurement-free circuit")
    dim = 2 ** circuit.num_qubits
    u = np.eye(dim, dtype=complex)
    for g in circuit.instructions:
        u = apply_matrix(u, gate_matrix(g), g.qubits, circuit.num_qubits)
    return u


def statevector(circuit: Circuit) -> np.ndarray:
    """State after all non-measurement gates, starting from ``|0...0>``."""
    _check_executable(circuit)
    state = np.zeros(2 ** circuit.num_qubits, dtype=complex)
    state[0] = 1.0
    for g in circuit.instructions:
        if not g.is_measure:
            state = apply_matrix(state, gate_matrix(g), g.qubits, circuit.num_qubits)
    return state


def equivalent_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> bool:
    """True if ``a`` equals ``e^{i phi} b`` entrywise within ``tol``.

    The phase is read off the largest-magnitude entry of ``b``.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    if b.size == 0:
        return True
    idx = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    if abs(b[idx]) == 0.0:
        return bool(np.max(np.abs(a)) <= tol)
    ratio = a[idx] / b[idx]
    if abs(ratio) == 0.0:
        return False
    phase = ratio / abs(ratio)
    return bool(np.max(np.abs(a - phase * b)) <= tol)


def layout_isometry(layout: tuple[int, ...], num_physical: int) -> np.ndarray:
    """Embed logical basis states into the physical register, spare qubits at 0."""
    n = len(layout)
    iso = np.zeros((2 ** num_physical, 2 ** n))
    for x in range(2 ** n):
        y = 0
        for logical, physical in enumerate(layout):
            if (x >> logical) & 1:
                y |= 1 << physical
        iso[y, x] = 1.0
    return iso


def mapped_equivalent(original: Circuit, mapped: Circuit, tol: float = 1e-9) -> bool:
    """Check a mapped/routed circuit against its logical source.

    Compares ``U_mapped @ E_initial`` with ``E_final @ U_original`` up to
    global phase, where ``E`` embeds logical states through a layout with the
    spare physical qubits held at ``|0>``.  Falls back to a plain comparison
    when ``mapped`` carries no layout.
    """
    u_orig = unitary_of(original.without_measurements())
    u_mapped = unitary_of(mapped.without_measurements())
    if mapped.layout is None:
        return equivalent_up_to_phase(u_mapped, u_orig, tol)
    final = mapped.final_layout if mapped.final_layout is not None else mapped.layout
    lhs = u_mapped @ layout_isometry(mapped.layout, mapped.num_qubits)
    rhs = layout_isometry(final, mapped.num_qubits) @ u_orig
    return equivalent_up_to_phase(lhs, rhs, tol)
