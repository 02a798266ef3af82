import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hpcqc.errors import DimensionMismatch, InvalidCircuit, MissingBinding, NonFiniteValue
from hpcqc.ir import (
    Circuit,
    Gate,
    HybridProgram,
    Lit,
    Sym,
    Task,
    asap_layers,
    bind_parameters,
    circuit_depth,
    content_hash,
    deserialize,
    equivalent_up_to_phase,
    fold,
    free_symbols,
    gate,
    parse_expr,
    serialize,
    statevector,
    unitary_of,
)
from hpcqc.ir.artifact import Artifact, ArtifactKind, dump_artifact, load_artifact

from _support import circuits


def circ(n, *gates):
    return Circuit(n, tuple(gates))


class TestSymbols:
    def test_single_symbol(self):
        assert free_symbols(circ(1, gate("rz", 0, params=["theta"]))) == {"theta"}

    def test_literal_only(self):
        assert free_symbols(circ(1, gate("rz", 0, params=[0.5]))) == set()

    def test_union(self):
        c = circ(1, gate("rz", 0, params=[parse_expr("theta+phi")]), gate("rx", 0, params=["theta"]))
        assert free_symbols(c) == {"theta", "phi"}


class TestBinding:
    def test_substitution(self):
        bound = bind_parameters(circ(1, gate("rz", 0, params=["theta"])), {"theta": 0.5})
        assert bound.instructions == (gate("rz", 0, params=[0.5]),)

    def test_expression_is_evaluated(self):
        bound = bind_parameters(circ(1, gate("rz", 0, params=[parse_expr("theta+theta")])), {"theta": 0.25})
        assert bound.instructions[0].params[0] == Lit(0.5)

    def test_missing(self):
        with pytest.raises(MissingBinding) as info:
            bind_parameters(circ(1, gate("rz", 0, params=["theta"])), {})
        assert "theta" in str(info.value)

    def test_non_finite(self):
        with pytest.raises(NonFiniteValue):
            bind_parameters(circ(1, gate("rz", 0, params=["theta"])), {"theta": math.inf})

    def test_extra_bindings_are_ignored(self):
        c = circ(1, gate("h", 0))
        assert bind_parameters(c, {"unused": 1.0}) == c


class TestDepth:
    def test_empty(self):
        assert circuit_depth(Circuit(2, ())) == 0

    def test_disjoint(self):
        assert circuit_depth(circ(2, gate("h", 0), gate("h", 1))) == 1

    def test_chain(self):
        assert circuit_depth(circ(2, gate("h", 0), gate("cx", 0, 1), gate("h", 1))) == 3

    @given(circuits(max_qubits=4, max_gates=15))
    def test_matches_longest_path(self, c):
        # brute force: longest path in the qubit-dependency DAG
        n = len(c.instructions)
        longest = [1] * n
        for j in range(n):
            for i in range(j):
                if set(c.instructions[i].qubits) & set(c.instructions[j].qubits):
                    longest[j] = max(longest[j], longest[i] + 1)
        assert circuit_depth(c) == max(longest, default=0)


class TestGateValidation:
    def test_unknown_gate(self):
        with pytest.raises(InvalidCircuit):
            Gate("foo", (0,))

    def test_arity(self):
        with pytest.raises(InvalidCircuit):
            Gate("cx", (0,))

    def test_repeated_operand(self):
        with pytest.raises(InvalidCircuit):
            Gate("cx", (1, 1))

    def test_operand_out_of_range(self):
        with pytest.raises(InvalidCircuit):
            Circuit(2, (gate("h", 2),))


class TestOracle:
    def test_identity(self):
        assert np.allclose(unitary_of(Circuit(1, ())), np.eye(2))

    def test_pauli_x(self):
        assert np.allclose(unitary_of(circ(1, gate("x", 0))), [[0, 1], [1, 0]])

    def test_h_self_inverse(self):
        assert np.abs(unitary_of(circ(1, gate("h", 0), gate("h", 0))) - np.eye(2)).max() < 1e-12

    def test_little_endian(self):
        # x on qubit 0 flips the least significant index bit
        state = statevector(circ(2, gate("x", 0)))
        assert abs(state[1]) == pytest.approx(1.0)

    def test_cx_control_first(self):
        state = statevector(circ(2, gate("x", 0), gate("cx", 0, 1)))
        assert abs(state[3]) == pytest.approx(1.0)

    def test_phase_equivalence(self):
        u = unitary_of(circ(2, gate("h", 0), gate("cx", 0, 1), gate("t", 1)))
        assert equivalent_up_to_phase(u, u, 1e-9)
        assert equivalent_up_to_phase(u, -u, 1e-9)
        assert equivalent_up_to_phase(u, np.exp(0.7j) * u, 1e-9)
        x = unitary_of(circ(1, gate("x", 0)))
        z = unitary_of(circ(1, gate("z", 0)))
        assert not equivalent_up_to_phase(x, z, 1e-9)

    def test_shape_mismatch_raises(self):
        with pytest.raises(DimensionMismatch):
            equivalent_up_to_phase(np.eye(2), np.eye(4), 1e-9)

    @given(circuits(max_qubits=3, max_gates=12))
    def test_unitarity(self, c):
        u = unitary_of(c)
        assert np.allclose(u @ u.conj().T, np.eye(2 ** c.num_qubits), atol=1e-10)


class TestFold:
    def test_arithmetic(self):
        assert fold(parse_expr("0.25*2")) == Lit(0.5)

    def test_zero_elimination(self):
        assert fold(parse_expr("theta + (1-1)")) == Sym("theta")

    def test_untouched_symbol(self):
        assert fold(Sym("theta")) == Sym("theta")

    def test_self_cancellation(self):
        assert fold(parse_expr("theta - theta")) == Lit(0.0)

    @given(st.floats(-5, 5), st.floats(-5, 5))
    def test_fold_preserves_value(self, a, b):
        e = parse_expr(f"({a!r}*theta + {b!r}) - theta*2")
        for theta in (-1.3, 0.0, 2.2):
            assert fold(e).evaluate({"theta": theta}) == pytest.approx(e.evaluate({"theta": theta}), abs=1e-9)


class TestSerialization:
    @given(circuits(max_qubits=4, max_gates=20, symbols=("theta", "phi")))
    def test_round_trip(self, c):
        text = serialize(c)
        back = deserialize(text)
        assert serialize(back) == text
        assert content_hash(back) == content_hash(c)

    def test_hash_ignores_name(self):
        a = Circuit(1, (gate("h", 0),), name="a")
        b = Circuit(1, (gate("h", 0),), name="b")
        assert content_hash(a) == content_hash(b)

    def test_hash_sees_layout(self):
        a = Circuit(2, (gate("h", 0),))
        b = Circuit(2, (gate("h", 0),), layout=(1, 0), final_layout=(1, 0))
        assert content_hash(a) != content_hash(b)

    def test_bad_header(self):
        with pytest.raises(InvalidCircuit):
            deserialize("h q0\n")

    def test_artifact_round_trip(self):
        c = Circuit(1, (gate("rz", 0, params=["theta"]),))
        art = Artifact(ArtifactKind.BYTECODE, c, provenance=(("fold-constants", content_hash(c)),), subject="k")
        back = load_artifact(dump_artifact(art))
        assert back.kind is ArtifactKind.BYTECODE
        assert serialize(back.kernel) == serialize(c)
        assert back.applied_passes == ("fold-constants",)


class TestLayers:
    def test_disjoint(self):
        assert asap_layers(circ(2, gate("h", 0), gate("h", 1))) == [1, 1]

    def test_dependency(self):
        assert asap_layers(circ(2, gate("h", 0), gate("cx", 0, 1))) == [1, 2]


class TestProgram:
    def test_topological_order_and_descendants(self):
        tasks = [Task("a", "classical", op="const"), Task("b", "classical", op="const"),
                 Task("c", "classical", op="const")]
        prog = HybridProgram("p", tasks, edges=[("a", "b"), ("b", "c")])
        assert prog.topological_order() == ["a", "b", "c"]
        assert prog.descendants("a") == {"b", "c"}
        assert prog.predecessors("c") == ["b"]
