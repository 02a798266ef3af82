"""Command-line entry point: ``hpcqc compile | run | schedsim | meta``.

Exit codes: 0 success, 1 input/parse errors, 2 compilation (pass) errors,
3 no feasible hardware, 4 execution failures (the report is still written).
Data goes to stdout and files under ``--output-dir``; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys
from dataclasses import replace
from typing import Sequence

from . import __version__
from .errors import NoFeasibleHardware, PlanInvalid, ToolchainError
from .frontend import ParseError, emit_exchange, load_manifest, parse_qasm
from .hardware import HardwareModel, check_conformance, estimate_fidelity, load_descriptor
from .ir import ArtifactKind, HybridProgram, Task, TaskKind, circuit_depth, dump_artifact, free_symbols
from .metadata import MetadataStore, as_kind, build_context, ingest_hardware
from .metaopt import CostWeights, select_sequence, suggest_resources
from .passman import (
    DEFAULT_SEQUENCE,
    MANDATORY_TAIL,
    CompilationContext,
    PassSequence,
    apply_pass,
    compile_aot,
    compile_kernel,
    standard_registry,
)
from .runtime import ExecutionPlan, RunReport, execute, run_variational_loop
from .scheduler import ResourcePool, gantt, load_workload, simulate, utilization

EXIT_OK, EXIT_INPUT, EXIT_PASS, EXIT_NO_HW, EXIT_EXEC = 0, 1, 2, 3, 4


class _InputError(Exception):
    pass


def _err(message: str) -> None:
    print(message, file=sys.stderr)


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise _InputError(f"{path}: {exc.strerror}") from None


def _write(out_dir: str, name: str, text: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def _load_hw(path: str) -> HardwareModel:
    try:
        return load_descriptor(_read(path))
    except (ToolchainError, ValueError) as exc:
        raise _InputError(f"{path}: {exc}") from None


def _load_catalog(path: str) -> list[HardwareModel]:
    files = [path] if os.path.isfile(path) else sorted(glob.glob(os.path.join(path, "*.json")))
    if not files:
        raise _InputError(f"{path}: no hardware descriptors found")
    models = [_load_hw(f) for f in files]
    ids = [m.id for m in models]
    if len(set(ids)) != len(ids):
        raise _InputError(f"{path}: duplicate hardware ids {sorted(ids)}")
    return sorted(models, key=lambda m: m.id)


def _load_sequence(path: str | None) -> PassSequence:
    if path is None:
        return DEFAULT_SEQUENCE
    try:
        return PassSequence.from_json(_read(path))
    except (ValueError, ToolchainError) as exc:
        raise _InputError(f"{path}: {exc}") from None


def _weights(args) -> CostWeights:
    try:
        return CostWeights(args.w_gates, args.w_depth, args.w_infidelity)
    except ValueError as exc:
        raise _InputError(str(exc)) from None


def _parse_diag(path: str, exc: ParseError) -> str:
    d = exc.first
    return f"{path}:{d.line}:{d.column}: {d.severity.value}: {d.message} [{d.code}]"


# -- compile ------------------------------------------------------------------

def _program_from_input(path: str) -> HybridProgram:
    text = _read(path)
    if path.endswith(".json"):
        return load_manifest(text, base_dir=os.path.dirname(os.path.abspath(path))).program
    name = os.path.splitext(os.path.basename(path))[0]
    kernel = parse_qasm(text, name=name)
    return HybridProgram(name, (Task(name, TaskKind.QUANTUM, kernel=name),), (), {name: kernel})


def _fidelity_line(circuit, hw, registry) -> str:
    try:
        return f"{estimate_fidelity(circuit, hw):.6f}"
    except ToolchainError:
        return "n/a"


def cmd_compile(args) -> int:
    registry = standard_registry()
    sequence = _load_sequence(args.sequence)
    hw = _load_hw(args.hw) if args.hw else None
    try:
        program = _program_from_input(args.input)
    except ParseError as exc:
        _err(_parse_diag(args.input, exc))
        return EXIT_INPUT
    store = MetadataStore()
    if hw is not None:
        ingest_hardware(store, hw)
    ctx = CompilationContext(hardware=hw, metadata=store, context=build_context(store.records()),
                             seed=args.seed, wall_clock=args.wall_clock)
    summary = []
    try:
        sequence.validate(registry)
        used = sorted({t.kernel for t in program.quantum_tasks if t.kernel is not None})
        for kid in used:
            kernel = program.kernels[kid]
            seq = sequence
            if args.metaopt:
                if hw is None or free_symbols(kernel):
                    _err(f"{kid}: --metaopt needs --hw and a bound kernel; using the given sequence")
                else:
                    proposal = select_sequence(kernel, hw, registry, _weights(args), args.metaopt_budget,
                                               ctx.context, store, subject=kid)
                    seq = proposal.sequence
                    summary.append(f"{kid}: metaopt chose {' -> '.join(seq.names)} "
                                   f"(cost {proposal.evaluated_cost:.4f}, {proposal.trials} trials)")
            artifact = compile_kernel(kernel, registry, seq, replace(ctx, subject=kid))
            ext = "bin" if artifact.kind is ArtifactKind.BINARY else "bc"
            _write(args.output_dir, f"{kid}.{ext}", dump_artifact(artifact))
            line = (f"{kid}: {artifact.kind.value} gates {kernel.gate_count} -> {artifact.kernel.gate_count}, "
                    f"depth {circuit_depth(kernel)} -> {circuit_depth(artifact.kernel)}")
            if artifact.kind is ArtifactKind.BINARY:
                _write(args.output_dir, f"{kid}.xq1", emit_exchange(artifact.kernel))
                baseline = kernel
                for step in MANDATORY_TAIL:
                    baseline = apply_pass(registry, step, baseline, replace(ctx, metadata=None))
                line += (f", fidelity {_fidelity_line(baseline, hw, registry)} -> "
                         f"{_fidelity_line(artifact.kernel, hw, registry)}, "
                         f"violations {len(check_conformance(artifact.kernel, hw))}")
            else:
                pending = [s for s in seq.names if s not in artifact.applied_passes]
                line += f", deferred to JIT: {', '.join(pending) or 'binding only'}"
            summary.append(line)
    except ToolchainError as exc:
        _err(f"compilation failed: {exc}")
        _write(args.output_dir, "metadata.mdjl", store.dumps())
        return EXIT_PASS
    text = "\n".join(summary) + "\n"
    _write(args.output_dir, "summary.txt", text)
    _write(args.output_dir, "metadata.mdjl", store.dumps())
    sys.stdout.write(text)
    return EXIT_OK


# -- run ------------------------------------------------------------------------

def cmd_run(args) -> int:
    registry = standard_registry()
    sequence = _load_sequence(args.sequence)
    catalog = _load_catalog(args.hw_catalog)
    try:
        manifest = load_manifest(_read(args.manifest),
                                 base_dir=os.path.dirname(os.path.abspath(args.manifest)))
    except ParseError as exc:
        _err(_parse_diag(args.manifest, exc))
        return EXIT_INPUT
    program = manifest.program
    store = MetadataStore()
    for hw in catalog:
        ingest_hardware(store, hw)
    context = build_context(store.records())
    by_id = {hw.id: hw for hw in catalog}

    try:
        sequence.validate(registry)
        ctx = CompilationContext(metadata=store, context=context, seed=args.seed, wall_clock=args.wall_clock)
        artifacts = {a.subject: a for a in compile_aot(program, registry, sequence, ctx, per_task=True)}
    except ToolchainError as exc:
        _err(f"compilation failed: {exc}")
        _write(args.output_dir, "metadata.mdjl", store.dumps())
        return EXIT_PASS
    try:
        assignments = suggest_resources(program, context, catalog, registry, sequence)
    except NoFeasibleHardware as exc:
        _err(str(exc))
        _write(args.output_dir, "metadata.mdjl", store.dumps())
        return EXIT_NO_HW

    plan = ExecutionPlan(program, assignments, artifacts, by_id, store, args.seed, args.exact, registry,
                         sequence, context)
    try:
        report = execute(plan)
    except PlanInvalid as exc:
        _err(f"invalid plan: {exc}")
        _write(args.output_dir, "metadata.mdjl", store.dumps())
        return EXIT_INPUT

    if manifest.variational is not None:
        v = manifest.variational
        kernel = program.kernels[v.kernel]
        probe = HybridProgram(v.kernel, (Task(v.kernel, TaskKind.QUANTUM, kernel=v.kernel),), (),
                              {v.kernel: kernel})
        try:
            hw_id = suggest_resources(probe, context, catalog, registry, sequence)[v.kernel]
            trace = run_variational_loop(kernel, by_id[hw_id], start=v.start, step=v.step,
                                         iterations=v.iterations, shots=v.shots, qubit=v.qubit,
                                         seed=args.seed, exact=args.exact, metadata=store,
                                         registry=registry, sequence=sequence)
        except NoFeasibleHardware as exc:
            _err(str(exc))
            _write(args.output_dir, "metadata.mdjl", store.dumps())
            return EXIT_NO_HW
        except ToolchainError as exc:
            _err(f"variational loop failed: {exc}")
            trace = []
        report = replace(report, variational_trace=tuple((s.theta, s.objective) for s in trace))

    _write(args.output_dir, "report.json", report.dumps())
    _write(args.output_dir, "metadata.mdjl", store.dumps())
    failed = [t for t in report.tasks if t.status != "completed"]
    for t in failed:
        _err(f"task {t.id}: {t.error}")
    done = len(report.tasks) - len(failed)
    print(f"{program.name}: {done}/{len(report.tasks)} tasks completed; "
          f"report at {os.path.join(args.output_dir, 'report.json')}")
    for kid, dist in sorted(report.distributions.items()):
        print(f"  {kid}: {json.dumps(dict(dist.counts), sort_keys=True)}")
    if report.variational_trace:
        theta, objective = report.variational_trace[-1]
        print(f"  variational: theta={theta:.6f} objective={objective:.9f}")
    if failed or (manifest.variational is not None and not report.variational_trace):
        return EXIT_EXEC
    return EXIT_OK


# -- schedsim ---------------------------------------------------------------------

def cmd_schedsim(args) -> int:
    try:
        jobs = load_workload(_read(args.workload))
        pool = ResourcePool.from_json(_read(args.pool))
    except (ValueError, TypeError) as exc:
        _err(f"schema error: {exc}")
        return EXIT_INPUT
    trace = simulate(jobs, pool, backfill=not args.fcfs)
    metrics = utilization(trace, pool)
    doc = {"trace": trace.to_json(), "metrics": metrics}
    _write(args.output_dir, "trace.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    chart = gantt(trace)
    _write(args.output_dir, "gantt.txt", chart)
    sys.stdout.write(chart)
    print(json.dumps(metrics, sort_keys=True))
    return EXIT_OK


# -- meta -------------------------------------------------------------------------

def cmd_meta(args, parser) -> int:
    try:
        kind = as_kind(args.kind) if args.kind is not None else None
    except ToolchainError as exc:
        parser.print_usage(sys.stderr)
        _err(str(exc))
        return EXIT_INPUT
    try:
        store = MetadataStore.loads(_read(args.file))
    except (ValueError, TypeError, KeyError) as exc:
        _err(f"{args.file}: malformed metadata file: {exc}")
        return EXIT_INPUT
    for r in store.query(producer=args.producer, kind=kind, subject=args.subject):
        print(r.to_line())
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hpcqc", description="Hybrid HPC-quantum toolchain.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output-dir", default="./out")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--sequence", help="JSON array of {pass, options}")
    common.add_argument("--wall-clock", action="store_true",
                        help="also record pass durations (makes metadata non-reproducible)")

    c = sub.add_parser("compile", parents=[common], help="compile a kernel or a manifest ahead of time")
    c.add_argument("input", help="kernel .qasm or program manifest .json")
    c.add_argument("--hw", help="hardware descriptor JSON")
    c.add_argument("--metaopt", action="store_true", help="let the meta-optimizer pick the pass sequence")
    c.add_argument("--w-gates", type=float, default=1.0)
    c.add_argument("--w-depth", type=float, default=1.0)
    c.add_argument("--w-infidelity", type=float, default=100.0)
    c.add_argument("--metaopt-budget", type=int, default=50)

    r = sub.add_parser("run", parents=[common], help="compile, schedule and execute a manifest")
    r.add_argument("manifest")
    r.add_argument("--hw-catalog", required=True, help="directory of hardware descriptors (or one file)")
    r.add_argument("--exact", action="store_true", help="analytic expectations instead of sampled ones")

    s = sub.add_parser("schedsim", help="simulate the batch scheduler on a workload")
    s.add_argument("workload")
    s.add_argument("pool")
    s.add_argument("--output-dir", default="./out")
    s.add_argument("--fcfs", action="store_true", help="pure FCFS instead of conservative backfill")

    m = sub.add_parser("meta", help="query a metadata file")
    m.add_argument("file")
    m.add_argument("--kind")
    m.add_argument("--producer")
    m.add_argument("--subject")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "compile":
            return cmd_compile(args)
        if args.command == "run":
            return cmd_run(args)
        if args.command == "schedsim":
            return cmd_schedsim(args)
        return cmd_meta(args, parser)
    except _InputError as exc:
        _err(str(exc))
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
