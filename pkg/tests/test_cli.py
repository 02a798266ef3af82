import json
import os

import pytest

from hpcqc.cli import main
from hpcqc.ir import ArtifactKind, load_artifact
from hpcqc.metadata import Kind, MetadataStore

from _support import data_path

HW = data_path("hardware")


def run(*argv):
    return main([str(a) for a in argv])


def test_compile_bell_binary(tmp_path, capsys):
    assert run("compile", data_path("kernels", "bell.qasm"), "--hw", data_path("hardware", "linear3.json"),
               "--output-dir", tmp_path) == 0
    with open(tmp_path / "bell.bin", encoding="utf-8") as fh:
        art = load_artifact(fh.read())
    assert art.kind is ArtifactKind.BINARY
    assert (tmp_path / "bell.xq1").read_text().startswith("xq1 3\n")
    assert "violations 0" in capsys.readouterr().out


def test_compile_symbolic_is_bytecode(tmp_path):
    assert run("compile", data_path("kernels", "vqe.qasm"), "--output-dir", tmp_path) == 0
    assert (tmp_path / "vqe.bc").exists()
    assert not (tmp_path / "vqe.bin").exists()


def test_compile_malformed(tmp_path, capsys):
    assert run("compile", data_path("kernels", "malformed.qasm"), "--output-dir", tmp_path) == 1
    err = capsys.readouterr().err
    assert "malformed.qasm:4:" in err and "error" in err


def test_compile_too_wide_for_hardware(tmp_path):
    assert run("compile", data_path("kernels", "big.qasm"), "--hw", data_path("hardware", "linear3.json"),
               "--output-dir", tmp_path) == 2


def test_compile_metaopt(tmp_path, capsys):
    assert run("compile", data_path("kernels", "coin.qasm"), "--hw", data_path("hardware", "ring4.json"),
               "--metaopt", "--output-dir", tmp_path) == 0
    assert "metaopt chose" in capsys.readouterr().out


def test_compile_custom_sequence(tmp_path):
    seq = tmp_path / "seq.json"
    seq.write_text(json.dumps([{"pass": "decompose-to-native"}, {"pass": "map-and-route"},
                               {"pass": "schedule-asap"}]))
    assert run("compile", data_path("kernels", "bell.qasm"), "--hw", data_path("hardware", "linear3.json"),
               "--sequence", seq, "--output-dir", tmp_path / "o") == 0


def test_compile_missing_file(tmp_path):
    assert run("compile", tmp_path / "nope.qasm", "--output-dir", tmp_path) == 1


def test_run_bell(tmp_path):
    assert run("run", data_path("manifests", "bell.json"), "--hw-catalog", HW, "--output-dir", tmp_path) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert set(report["distributions"]["bell"]["counts"]) <= {"00", "11"}
    store = MetadataStore.load(tmp_path / "metadata.mdjl")
    assert store.query(kind=Kind.SYSTEM)


def test_run_hybrid(tmp_path):
    assert run("run", data_path("manifests", "hybrid.json"), "--hw-catalog", HW, "--output-dir", tmp_path) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert all(t["status"] == "completed" for t in report["tasks"])
    assert report["distributions"]["bell"]["shots"] == 500
    assert set(report["distributions"]["ghz"]["counts"]) <= {"000", "111"}


def test_run_no_feasible_hardware(tmp_path):
    assert run("run", data_path("manifests", "too_big.json"), "--hw-catalog", HW, "--output-dir", tmp_path) == 3


def test_run_bad_manifest(tmp_path):
    bad = tmp_path / "m.json"
    bad.write_text('{"tasks": [{"id": "a", "kind": "classical", "op": "nope"}]}')
    assert run("run", bad, "--hw-catalog", HW, "--output-dir", tmp_path / "o") == 1


def test_run_failed_task_exit_code(tmp_path):
    bad = tmp_path / "m.json"
    bad.write_text('{"tasks": [{"id": "a", "kind": "classical", "op": "mean"}]}')
    assert run("run", bad, "--hw-catalog", HW, "--output-dir", tmp_path / "o") == 4


def test_schedsim(tmp_path, capsys):
    assert run("schedsim", data_path("sched", "workload.json"), data_path("sched", "pool.json"),
               "--output-dir", tmp_path) == 0
    out = capsys.readouterr().out
    metrics = json.loads(out.strip().splitlines()[-1])
    assert set(metrics) == {"makespan", "mean_wait", "cpu", "qpu", "hybrid"}
    doc = json.loads((tmp_path / "trace.json").read_text())
    assert [r["id"] for r in doc["trace"]["rejected"]] == ["huge"]
    assert (tmp_path / "gantt.txt").exists()


def test_meta_query(tmp_path, capsys):
    run("run", data_path("manifests", "bell.json"), "--hw-catalog", HW, "--output-dir", tmp_path)
    capsys.readouterr()
    assert run("meta", tmp_path / "metadata.mdjl", "--kind", "ExecutionMeta") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(json.loads(x)["kind"] == "execution" for x in lines)


def test_meta_bad_kind(tmp_path, capsys):
    f = tmp_path / "m.mdjl"
    f.write_text("")
    assert run("meta", f, "--kind", "Bogus") == 1
    assert "usage" in capsys.readouterr().err


def test_meta_malformed(tmp_path):
    f = tmp_path / "m.mdjl"
    f.write_text("not json\n")
    assert run("meta", f) == 1
