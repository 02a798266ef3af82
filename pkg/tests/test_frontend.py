import json

import pytest
from hypothesis import given

from hpcqc.errors import NonConformant, UnboundSymbol
from hpcqc.frontend import ParseError, emit_exchange, load_manifest, parse_exchange, parse_manifest, parse_qasm, to_qasm
from hpcqc.ir import Circuit, TaskKind, free_symbols, gate, serialize

from _support import circuits, data_path


def diag(text):
    with pytest.raises(ParseError) as info:
        parse_qasm(text)
    return info.value.first


class TestQasm:
    def test_bell_prefix(self):
        c = parse_qasm("qreg q[2]; h q[0]; cx q[0],q[1];")
        assert c.num_qubits == 2
        assert c.instructions == (gate("h", 0), gate("cx", 0, 1))

    def test_symbol_capture(self):
        c = parse_qasm("qreg q[1]; rz(theta) q[0];")
        assert free_symbols(c) == {"theta"}

    def test_index_out_of_range_points_at_gate(self):
        d = diag("qreg q[1]; h q[3];")
        assert d.code == "IndexOutOfRange"
        assert (d.line, d.column) == (1, 12)

    def test_multiline_position(self):
        d = diag("OPENQASM 2.0;\nqreg q[2];\n\n   foo q[0];\n")
        assert d.line == 4
        assert d.column == 4

    def test_measure(self):
        c = parse_qasm("qreg q[2]; creg c[2]; h q[0]; measure q[1] -> c[0]; measure q[0] -> c[1];")
        assert c.measured_qubits == (1, 0)

    def test_comments_and_pi(self):
        c = parse_qasm("// header\nqreg q[1];\nrz(pi/2) q[0]; // trailing\n")
        assert c.instructions[0].params[0].evaluate() == pytest.approx(1.5707963267948966)

    def test_missing_semicolon(self):
        assert diag("qreg q[1]; h q[0]").severity.value == "error"

    def test_bytes_must_be_utf8(self):
        with pytest.raises(ParseError):
            parse_qasm(b"qreg q[1]; \xff")

    def test_malformed_demo_file(self):
        with open(data_path("kernels", "malformed.qasm"), encoding="utf-8") as fh:
            d = diag(fh.read())
        assert d.line == 4

    @given(circuits(max_qubits=4, max_gates=15, symbols=("theta", "phi")))
    def test_round_trip_through_qasm(self, c):
        assert serialize(parse_qasm(to_qasm(c))) == serialize(c)


def manifest(tasks, kernels=None, **extra):
    doc = {"name": "t", "kernels": kernels or {}, "tasks": tasks, **extra}
    return json.dumps(doc)


SOURCES = {"rz.qasm": "qreg q[1]; creg c[1]; rz(theta) q[0]; measure q[0] -> c[0];"}


class TestManifest:
    def test_edge(self):
        prog = parse_manifest(manifest([
            {"id": "A", "kind": "classical", "op": "const", "args": {"value": 0.5}},
            {"id": "B", "kind": "classical", "op": "const", "depends_on": ["A"]},
        ]))
        assert prog.edges == (("A", "B"),)

    def test_cycle(self):
        with pytest.raises(ParseError) as info:
            parse_manifest(manifest([
                {"id": "A", "kind": "classical", "op": "const", "depends_on": ["B"]},
                {"id": "B", "kind": "classical", "op": "const", "depends_on": ["A"]},
            ]))
        d = info.value.first
        assert d.code == "CycleDetected"
        assert "A" in d.message and "B" in d.message

    def test_undeclared_kernel(self):
        with pytest.raises(ParseError) as info:
            parse_manifest(manifest([{"id": "Q", "kind": "quantum", "kernel": "vqe.qasm", "shots": 10}]))
        assert info.value.first.code == "UnresolvedKernel"

    def test_binding_flow(self):
        prog = parse_manifest(manifest([
            {"id": "A", "kind": "classical", "op": "const", "args": {"value": 0.5}},
            {"id": "B", "kind": "quantum", "kernel": "rz", "shots": 10, "depends_on": ["A"], "bindings": "A"},
        ], kernels={"rz": "rz.qasm"}), sources=SOURCES)
        b = prog.task("B")
        assert b.kind is TaskKind.QUANTUM
        assert b.bindings_from == "A"
        assert "rz" in prog.kernels

    def test_kernel_by_path(self):
        prog = parse_manifest(manifest([{"id": "Q", "kernel": "rz.qasm", "bindings": {"theta": 1}}],
                                       kernels={"rz": "rz.qasm"}), sources=SOURCES)
        assert prog.task("Q").kernel == "rz"

    def test_bad_json_position(self):
        with pytest.raises(ParseError) as info:
            parse_manifest('{"tasks": [\n  }')
        assert info.value.first.line == 2

    def test_unknown_task_key(self):
        with pytest.raises(ParseError):
            parse_manifest(manifest([{"id": "A", "kind": "classical", "op": "const", "bogus": 1}]))

    def test_demo_manifests_load(self):
        for name in ("bell", "hybrid", "variational"):
            path = data_path("manifests", f"{name}.json")
            with open(path, encoding="utf-8") as fh:
                m = load_manifest(fh.read(), base_dir=data_path("manifests"))
            assert m.program.tasks
        assert m.variational is not None and m.variational.iterations == 40


class TestExchange:
    def test_single_rotation(self):
        c = Circuit(1, (gate("rz", 0, params=[0.5]),), layout=(0,), final_layout=(0,))
        assert emit_exchange(c) == "xq1 1\nrz 0 0.50000000000000000\n"

    def test_unbound(self):
        c = Circuit(1, (gate("rz", 0, params=["theta"]),), layout=(0,), final_layout=(0,))
        with pytest.raises(UnboundSymbol):
            emit_exchange(c)

    def test_empty_is_header_only(self):
        assert emit_exchange(Circuit(2, (), layout=(0, 1), final_layout=(0, 1))) == "xq1 2\n"

    def test_needs_layout(self):
        with pytest.raises(NonConformant):
            emit_exchange(Circuit(1, (gate("x", 0),)))

    def test_round_trip(self):
        c = Circuit(3, (gate("rx", 1, params=[0.25]), gate("cx", 1, 2), gate("measure", 2)),
                    layout=(1, 2, 0), final_layout=(1, 2, 0))
        back = parse_exchange(emit_exchange(c))
        assert back.instructions == c.instructions
