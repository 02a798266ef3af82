import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hpcqc.errors import NonConformant, NoMeasurement, RangeError, SchemaError, TooLarge, UnboundSymbol
from hpcqc.hardware import (
    HardwareModel,
    check_conformance,
    derive_seed,
    estimate_fidelity,
    load_descriptor,
    outcome_probabilities,
    simulate,
    splitmix64,
)
from hpcqc.ir import Circuit, gate

from _support import linear3, load_hw


def descriptor(**changes):
    doc = {"id": "lin", "num_qubits": 3, "coupling": [[0, 1], [1, 2]], "native_gates": ["rx", "rz", "cx"]}
    doc.update(changes)
    return json.dumps(doc)


def bare(native=("rx", "rz", "cx"), errors=None, readout=None, n=2):
    return HardwareModel("m", "test", n, frozenset({(0, 1)}), frozenset(native),
                         gate_error=errors or {}, readout_error=readout or {})


class TestDescriptor:
    def test_linear_three(self):
        hw = load_descriptor(descriptor())
        assert len(hw.coupling) == 2
        assert hw.usable_qubits == [0, 1, 2]

    def test_error_out_of_range(self):
        with pytest.raises(RangeError):
            load_descriptor(descriptor(gate_errors=[{"gate": "rx", "qubits": [0], "p": 1.5}]))

    def test_two_qubit_error_on_non_edge(self):
        with pytest.raises(SchemaError):
            load_descriptor(descriptor(gate_errors=[{"gate": "cx", "qubits": [0, 2], "p": 0.01}]))

    def test_missing_key(self):
        with pytest.raises(SchemaError):
            load_descriptor(json.dumps({"id": "x", "num_qubits": 1}))

    def test_unknown_native_gate(self):
        with pytest.raises(SchemaError):
            load_descriptor(descriptor(native_gates=["rx", "toffoli"]))

    def test_round_trip(self):
        hw = load_hw("tshape5")
        assert load_descriptor(hw.to_json()) == hw

    def test_shortest_path(self):
        hw = load_hw("tshape5")
        assert hw.shortest_path(0, 4) == [0, 1, 3, 4]


class TestConformance:
    def test_conformant(self):
        c = Circuit(3, (gate("rx", 0, params=[0.1]), gate("rz", 1, params=[0.2]), gate("cx", 0, 1)))
        assert check_conformance(c, linear3()) == []

    def test_non_native(self):
        v = check_conformance(Circuit(1, (gate("h", 0),)), linear3())
        assert [(x.reason, x.index) for x in v] == [("NonNativeGate", 0)]

    def test_non_adjacent(self):
        v = check_conformance(Circuit(3, (gate("cx", 0, 2),)), linear3())
        assert [(x.reason, x.index) for x in v] == [("NonAdjacent", 0)]

    def test_measurements_always_allowed(self):
        assert check_conformance(Circuit(1, (gate("measure", 0),)), linear3()) == []

    def test_symbolic_rejected(self):
        with pytest.raises(UnboundSymbol):
            check_conformance(Circuit(1, (gate("rz", 0, params=["t"]),)), linear3())


class TestFidelity:
    def test_empty(self):
        assert estimate_fidelity(Circuit(2, ()), bare()) == 1.0

    def test_product_of_gates(self):
        hw = bare(errors={("rx", (0,)): 0.01, ("rz", (1,)): 0.02})
        c = Circuit(2, (gate("rx", 0, params=[0.3]), gate("rz", 1, params=[0.3])))
        assert estimate_fidelity(c, hw) == pytest.approx(0.9702)

    def test_readout(self):
        hw = bare(errors={("rx", (0,)): 0.01}, readout={0: 0.05})
        c = Circuit(2, (gate("rx", 0, params=[0.3]), gate("measure", 0)))
        assert estimate_fidelity(c, hw) == pytest.approx(0.9405)

    def test_non_conformant_raises(self):
        with pytest.raises(NonConformant):
            estimate_fidelity(Circuit(1, (gate("h", 0),)), bare())


class TestSampling:
    def test_deterministic_outcome(self):
        r = simulate(Circuit(1, (gate("x", 0), gate("measure", 0))), 100, seed=1)
        assert r.counts == {"1": 100}

    def test_hadamard_interval(self):
        r = simulate(Circuit(1, (gate("h", 0), gate("measure", 0))), 4096, seed=7)
        assert 1843 <= r.counts["0"] <= 2253

    @given(st.integers(1, 3000), st.integers(0, 2**63))
    def test_bell_never_mixes(self, shots, seed):
        c = Circuit(2, (gate("h", 0), gate("cx", 0, 1), gate("measure", 0), gate("measure", 1)))
        r = simulate(c, shots, seed)
        assert set(r.counts) <= {"00", "11"}
        assert sum(r.counts.values()) == shots

    def test_reproducible(self):
        c = Circuit(2, (gate("h", 0), gate("ry", 1, params=[0.7]), gate("measure", 0), gate("measure", 1)))
        assert simulate(c, 500, 9).counts == simulate(c, 500, 9).counts

    def test_measure_order_defines_bit_order(self):
        c = Circuit(2, (gate("x", 1), gate("measure", 0), gate("measure", 1)))
        assert outcome_probabilities(c) == {"01": 1.0}
        c = Circuit(2, (gate("x", 1), gate("measure", 1), gate("measure", 0)))
        assert outcome_probabilities(c) == {"10": 1.0}

    def test_requires_measurement(self):
        with pytest.raises(NoMeasurement):
            simulate(Circuit(1, (gate("h", 0),)), 10, 0)

    def test_size_limit(self):
        with pytest.raises(TooLarge):
            simulate(Circuit(40, (gate("measure", 0),)), 10, 0)

    def test_splitmix_reference_values(self):
        # first outputs of SplitMix64 seeded with 0
        assert [int(v) for v in splitmix64(0, 3)] == [
            0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]

    def test_derived_seeds_differ_per_label(self):
        assert derive_seed(42, "a") != derive_seed(42, "b")
        assert derive_seed(42, "a") == derive_seed(42, "a")

    def test_uniform_mean(self):
        from hpcqc.hardware import uniforms
        u = uniforms(123, 20000)
        assert ((u >= 0) & (u < 1)).all()
        assert abs(u.mean() - 0.5) < 0.01
        assert np.unique(u).size == u.size
