import math

import pytest

from hpcqc.errors import InvalidProgram, PlanInvalid, WidthMismatch
from hpcqc.hardware import ShotResult
from hpcqc.ir import Circuit, HybridProgram, Task, gate
from hpcqc.metadata import Kind, MetadataStore
from hpcqc.passman import compile_aot, standard_registry
from hpcqc.runtime import (
    ExecutionPlan,
    JitCache,
    consolidate,
    execute,
    ghz,
    parse_op,
    random_circuit,
    run_variational_loop,
    task_duration,
)

from _support import linear3, load_hw

REG = standard_registry()

BELL = Circuit(2, (gate("h", 0), gate("cx", 0, 1), gate("measure", 0), gate("measure", 1)), name="bell")
RZ = Circuit(1, (gate("h", 0), gate("rz", 0, params=["theta"]), gate("h", 0), gate("measure", 0)), name="rz")
RX = Circuit(1, (gate("rx", 0, params=["theta"]), gate("measure", 0)), name="rx")


def make_plan(program, hw=None, **kw):
    hw = hw or linear3()
    arts = {a.subject: a for a in compile_aot(program, REG, per_task=True)}
    assignments = {t.id: hw.id for t in program.quantum_tasks}
    return ExecutionPlan(program, assignments, arts, {hw.id: hw}, **kw)


def events(store, subject):
    return {r.payload["event"]: r for r in store.query(kind=Kind.EXECUTION, subject=subject)}


class TestExecute:
    def test_bell(self):
        prog = HybridProgram("p", (Task("A", "quantum", kernel="bell", shots=100),), kernels={"bell": BELL})
        report = execute(make_plan(prog))
        assert report.ok
        assert set(report.task("A").result.counts) <= {"00", "11"}
        assert report.distributions["bell"].shots == 100

    def test_binding_flow(self):
        prog = HybridProgram("p", (
            Task("A", "classical", op="const", args={"theta": 0.5}),
            Task("B", "quantum", kernel="rz", shots=200, bindings_from="A"),
        ), edges=(("A", "B"),), kernels={"rz": RZ})
        store = MetadataStore()
        report = execute(make_plan(prog, metadata=store, exact=True))
        jit = [r for r in store.query(kind=Kind.COMPILATION, subject="B") if r.payload.get("event") == "compile_jit"]
        assert len(jit) == 1
        # h rz(0.5) h: P(0) = cos^2(0.25)
        assert report.task("B").probabilities["0"] == pytest.approx(math.cos(0.25) ** 2, abs=1e-12)

    def test_diamond_ordering(self):
        tasks = (Task("A", "classical", op="const", args={"value": 1.0}),
                 Task("B", "classical", op="linear", args={"a": 2.0}),
                 Task("C", "classical", op="linear", args={"b": 3.0}),
                 Task("D", "classical", op="sum"))
        edges = (("A", "B"), ("A", "C"), ("B", "D"), ("C", "D"))
        store = MetadataStore()
        report = execute(make_plan(HybridProgram("d", tasks, edges), metadata=store))
        for u, v in edges:
            assert events(store, u)["end"].t < events(store, v)["start"].t
        assert report.values()["D"] == {"value": 6.0}

    def test_jit_cache_hit(self):
        prog = HybridProgram("p", (
            Task("a", "quantum", kernel="rx", shots=50, bindings={"theta": 0.3}),
            Task("b", "quantum", kernel="rx", shots=50, bindings={"theta": 0.3}),
        ), kernels={"rx": RX})
        store, cache = MetadataStore(), JitCache()
        report = execute(make_plan(prog, metadata=store, jit_cache=cache))
        jit = [r for r in store.query(kind=Kind.COMPILATION) if r.payload.get("event") == "compile_jit"]
        assert len(jit) == 1
        assert (cache.hits, cache.misses) == (1, 1)
        ends = [r for r in store.query(kind=Kind.EXECUTION) if r.payload["event"] == "end"]
        assert len(ends) == 2
        assert report.distributions["rx"].shots == 100

    def test_failure_isolation(self):
        tasks = (Task("bad", "classical", op="const", args={"x": "oops"}),
                 Task("child", "classical", op="sum"),
                 Task("other", "quantum", kernel="bell", shots=20))
        report = execute(make_plan(HybridProgram("f", tasks, (("bad", "child"),), {"bell": BELL})))
        assert report.task("bad").status == "failed"
        assert report.task("child").status == "failed"
        assert "upstream" in report.task("child").error
        assert report.task("other").status == "completed"
        assert not report.ok

    def test_generator_task(self):
        tasks = (Task("gen", "generator", op="ghz(3)"), Task("q", "quantum", shots=300))
        prog = HybridProgram("g", tasks, (("gen", "q"),))
        store = MetadataStore()
        report = execute(make_plan(prog, metadata=store))
        assert set(report.task("q").result.counts) <= {"000", "111"}
        assert "q" in report.distributions
        assert store.query(kind=Kind.CIRCUIT_INFO, subject="q")

    def test_unknown_builtin_is_plan_error(self):
        prog = HybridProgram("x", (Task("a", "classical", op="nope"),))
        store = MetadataStore()
        with pytest.raises(PlanInvalid):
            execute(make_plan(prog, metadata=store))
        assert len(store) == 0

    def test_missing_assignment(self):
        prog = HybridProgram("p", (Task("A", "quantum", kernel="bell", shots=10),), kernels={"bell": BELL})
        plan = make_plan(prog)
        plan.assignments = {}
        with pytest.raises(PlanInvalid):
            execute(plan)

    def test_deterministic(self):
        prog = HybridProgram("p", (
            Task("a", "quantum", kernel="bell", shots=333),
            Task("b", "quantum", kernel="rx", shots=250, bindings={"theta": 1.1}),
        ), kernels={"bell": BELL, "rx": RX})
        runs = []
        for _ in range(2):
            store = MetadataStore()
            rep = execute(make_plan(prog, metadata=store, seed=7))
            runs.append((rep.dumps(), store.dumps()))
        assert runs[0] == runs[1]

    def test_seed_changes_counts(self):
        prog = HybridProgram("p", (Task("a", "quantum", kernel="bell", shots=500),), kernels={"bell": BELL})
        a = execute(make_plan(prog, seed=1)).task("a").result.counts
        b = execute(make_plan(prog, seed=2)).task("a").result.counts
        assert a != b

    def test_independent_tasks_share_a_tick(self):
        prog = HybridProgram("p", (
            Task("q", "quantum", kernel="bell", shots=100),
            Task("c", "classical", op="const", args={"v": 1}),
        ), kernels={"bell": BELL})
        report = execute(make_plan(prog))
        assert report.task("q").start == report.task("c").start == 0

    def test_durations(self):
        assert task_duration(Task("q", "quantum", kernel="k", shots=250)) == 3
        assert task_duration(Task("c", "classical", op="const")) == 1


class TestConsolidate:
    def test_addition(self):
        d = consolidate([ShotResult({"0": 60, "1": 40}, 100, 0), ShotResult({"0": 30, "1": 70}, 100, 1)])
        assert d.counts == {"0": 90, "1": 110} and d.shots == 200
        assert d.frequencies["1"] == 0.55

    def test_identity(self):
        d = consolidate([ShotResult({"01": 5}, 5, 0)])
        assert d.counts == {"01": 5} and d.shots == 5

    def test_width_mismatch(self):
        with pytest.raises(WidthMismatch):
            consolidate([ShotResult({"0": 1}, 1, 0), ShotResult({"00": 1}, 1, 0)])


class TestBuiltins:
    def test_parse_op(self):
        assert parse_op("ghz(3)", {}, ("n",)) == ("ghz", {"n": 3})
        assert parse_op("random(2, 5)", {"seed": 9}, ("n", "depth", "seed")) == \
            ("random", {"n": 2, "depth": 5, "seed": 9})

    def test_bad_op(self):
        with pytest.raises(PlanInvalid):
            parse_op("ghz(x)", {}, ("n",))

    def test_ghz_shape(self):
        c = ghz(4)
        assert c.num_qubits == 4 and len(c.measured_qubits) == 4

    def test_random_is_reproducible(self):
        assert random_circuit(3, 12, 5) == random_circuit(3, 12, 5)
        assert random_circuit(3, 12, 5) != random_circuit(3, 12, 6)


class TestVariational:
    def test_exact_trace_follows_cosine(self):
        trace = run_variational_loop(RX, linear3(), start=3.0, step=0.1, iterations=20, exact=True)
        for s in trace:
            assert s.objective == pytest.approx(math.cos(s.theta), abs=1e-9)
        assert trace[1].objective < trace[0].objective
        best = [min(s.objective for s in trace[:k + 1]) for k in range(len(trace))]
        assert best == sorted(best, reverse=True)
        assert min(s.objective for s in trace) < -0.99

    def test_single_iteration(self):
        trace = run_variational_loop(RX, linear3(), start=0.4, iterations=1, exact=True)
        assert len(trace) == 1 and trace[0].theta == 0.4

    def test_reproducible(self):
        a = run_variational_loop(RX, linear3(), start=1.0, iterations=6, shots=200, seed=3)
        b = run_variational_loop(RX, linear3(), start=1.0, iterations=6, shots=200, seed=3)
        assert a == b

    def test_revisits_hit_the_cache(self):
        store, cache = MetadataStore(), JitCache()
        run_variational_loop(RX, linear3(), start=3.0, step=0.1, iterations=8, exact=True,
                             metadata=store, jit_cache=cache)
        jit = [r for r in store.query(kind=Kind.COMPILATION) if r.payload.get("event") == "compile_jit"]
        assert len(jit) == cache.misses == 3
        assert cache.hits == 5
        assert len(store.query(producer="variational", kind=Kind.PERFORMANCE)) == 8

    def test_needs_one_symbol(self):
        with pytest.raises(InvalidProgram):
            run_variational_loop(BELL, linear3(), iterations=2)

    def test_sampled_mode_descends(self):
        trace = run_variational_loop(RX, load_hw("ring4"), start=2.0, step=0.2, iterations=15, shots=2000)
        assert min(s.objective for s in trace) < -0.9
