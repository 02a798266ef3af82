"""The shared pass manager driving both ahead-of-time and just-in-time compilation."""

from __future__ import annotations

import time
from dataclasses import replace
from typing import Mapping

from ..errors import PassError, ToolchainError
from ..hardware import check_conformance, estimate_fidelity
from ..ir import (
    Artifact,
    ArtifactKind,
    Circuit,
    HybridProgram,
    bind_parameters,
    circuit_depth,
    content_hash,
    free_symbols,
)
from ..metadata import Kind
from . import passes
from .registry import Category, CompilationContext, PassDescriptor, PassRegistry, PassSequence, Stage

CANCEL = "cancel-inverses"
MERGE = "merge-rotations"
FOLD = "fold-constants"
DECOMPOSE = "decompose-to-native"
MAP_ROUTE = "map-and-route"
SCHEDULE = "schedule-asap"

STANDARD_DESCRIPTORS = (
    (PassDescriptor(FOLD, Category.CLASSICAL, outputs={"folded"}, errors=("NonFiniteValue",),
                    description="fold constant parameter subtrees"), passes.fold_constants),
    (PassDescriptor(CANCEL, Category.OPTIMIZE, outputs={"cancelled"},
                    description="remove adjacent inverse pairs"), passes.cancel_inverses),
    (PassDescriptor(MERGE, Category.OPTIMIZE, outputs={"merged"},
                    description="merge adjacent same-axis rotations"), passes.merge_rotations),
    (PassDescriptor(DECOMPOSE, Category.DECOMPOSE, hardware_aware=True, mandatory=True,
                    outputs={"native-gates"}, errors=("UnsupportedNativeSet",),
                    description="rewrite into the hardware's native gates"), passes.decompose_to_native),
    (PassDescriptor(MAP_ROUTE, Category.MAP_ROUTE, hardware_aware=True, mandatory=True,
                    outputs={"routed", "mapped"}, errors=("Unroutable", "InsufficientQubits"),
                    description="calibration-aware layout and swap routing"), passes.map_and_route),
    (PassDescriptor(SCHEDULE, Category.SCHEDULE, hardware_aware=True, mandatory=True,
                    inputs={"routed"}, outputs={"scheduled"},
                    description="as-soon-as-possible layering"), passes.schedule_asap),
)

DEFAULT_SEQUENCE = PassSequence.of(FOLD, CANCEL, MERGE, DECOMPOSE, CANCEL, MERGE, MAP_ROUTE, SCHEDULE)
MANDATORY_TAIL = PassSequence.of(DECOMPOSE, MAP_ROUTE, SCHEDULE)


def standard_registry(freeze: bool = True) -> PassRegistry:
    registry = PassRegistry()
    for descriptor, transform in STANDARD_DESCRIPTORS:
        registry.register(descriptor, transform)
    return registry.freeze() if freeze else registry


def _circuit_stats(circuit: Circuit) -> dict:
    return {"gates": circuit.gate_count, "depth": circuit_depth(circuit)}


def apply_pass(registry: PassRegistry, step, circuit: Circuit, ctx: CompilationContext) -> Circuit:
    """Run one pass, wrap failures in :class:`PassError` and emit a CompilationData record."""
    transform = registry.transform(step.name)
    start = time.perf_counter() if ctx.wall_clock else 0.0
    try:
        out = transform(circuit, ctx, **dict(step.options))
    except ToolchainError as exc:
        raise PassError(step.name, ctx.subject, exc) from exc
    before, after = _circuit_stats(circuit), _circuit_stats(out)
    payload = {
        "pass": step.name,
        "stage": ctx.stage.value,
        "gates_before": before["gates"],
        "gates_after": after["gates"],
        "depth_before": before["depth"],
        "depth_after": after["depth"],
        "hash": content_hash(out),
    }
    if ctx.wall_clock:
        payload["duration_s"] = time.perf_counter() - start
    ctx.emit(Kind.COMPILATION, payload)
    return out


def _emit_performance(artifact: Artifact, ctx: CompilationContext) -> None:
    payload = {"gate_count": artifact.kernel.gate_count, "depth": circuit_depth(artifact.kernel),
               "artifact": artifact.kind.value, "stage": ctx.stage.value}
    if artifact.kind is ArtifactKind.BINARY:
        payload["estimated_fidelity"] = estimate_fidelity(artifact.kernel, ctx.hardware)
        payload["target"] = artifact.target
    ctx.emit(Kind.PERFORMANCE, payload)


def _finish(circuit: Circuit, provenance, ctx: CompilationContext) -> Artifact:
    hw = ctx.hardware
    binary = (hw is not None and not free_symbols(circuit)
              and circuit.layout is not None and not check_conformance(circuit, hw))
    artifact = Artifact(ArtifactKind.BINARY if binary else ArtifactKind.BYTECODE, circuit,
                        target=hw.id if hw is not None else None, provenance=tuple(provenance),
                        subject=ctx.subject)
    _emit_performance(artifact, ctx)
    return artifact


def compile_kernel(kernel: Circuit, registry: PassRegistry, sequence: PassSequence = DEFAULT_SEQUENCE,
                   ctx: CompilationContext | None = None) -> Artifact:
    """Ahead-of-time compile one kernel.

    Without hardware the sequence stops at its first hardware-aware pass; that
    pass and everything after it is left for :func:`compile_jit`.
    """
    ctx = ctx or CompilationContext()
    sequence.validate(registry)
    ctx.emit(Kind.CIRCUIT_INFO, {
        "qubits": kernel.num_qubits, "gate_count": kernel.gate_count, "depth": circuit_depth(kernel),
        "free_symbols": len(free_symbols(kernel)), "measured": len(kernel.measured_qubits),
        "hash": content_hash(kernel)})
    circuit, provenance = kernel, []
    for step in sequence:
        if ctx.hardware is None and registry.descriptor(step.name).hardware_aware:
            break
        circuit = apply_pass(registry, step, circuit, ctx)
        provenance.append((step.name, content_hash(circuit)))
    return _finish(circuit, provenance, ctx)


def compile_aot(program: HybridProgram, registry: PassRegistry, sequence: PassSequence = DEFAULT_SEQUENCE,
                ctx: CompilationContext | None = None, per_task: bool = False) -> list[Artifact]:
    """Compile every kernel of ``program`` (or every kernel-backed quantum task).

    With ``per_task`` the artifact subject is the task id, otherwise the kernel id.
    The sequence is validated before any kernel is touched.
    """
    ctx = ctx or CompilationContext()
    sequence.validate(registry)
    if per_task:
        jobs = [(t.id, program.kernels[t.kernel]) for t in program.quantum_tasks if t.kernel is not None]
    else:
        used = sorted({t.kernel for t in program.quantum_tasks if t.kernel is not None})
        jobs = [(k, program.kernels[k]) for k in used]
    return [compile_kernel(kernel, registry, sequence, replace(ctx, subject=subject))
            for subject, kernel in jobs]


def remaining_steps(sequence: PassSequence, applied: tuple[str, ...]) -> list:
    """Steps of ``sequence`` not covered by the ``applied`` pass names.

    ``applied`` is matched against the sequence in order; a sequence step equal
    to the next applied name is treated as done.
    """
    todo, k = [], 0
    for step in sequence:
        if k < len(applied) and step.name == applied[k]:
            k += 1
        else:
            todo.append(step)
    return todo


def compile_jit(bytecode: Artifact, bindings: Mapping[str, float], hw, registry: PassRegistry,
                ctx: CompilationContext | None = None,
                sequence: PassSequence = DEFAULT_SEQUENCE) -> Artifact:
    """Bind parameters, then run the passes the bytecode has not seen yet."""
    if bytecode.kind is not ArtifactKind.BYTECODE:
        raise ValueError(f"compile_jit needs a bytecode artifact, got {bytecode.kind.value}")
    ctx = replace(ctx or CompilationContext(hardware=hw), hardware=hw, stage=Stage.JIT)
    if bytecode.subject is not None and ctx.subject == "kernel":
        ctx = replace(ctx, subject=bytecode.subject)
    sequence.validate(registry)
    symbols = free_symbols(bytecode.kernel)
    circuit = bind_parameters(bytecode.kernel, {k: v for k, v in bindings.items() if k in symbols})
    provenance = list(bytecode.provenance)
    for step in remaining_steps(sequence, bytecode.applied_passes):
        circuit = apply_pass(registry, step, circuit, ctx)
        provenance.append((step.name, content_hash(circuit)))
    artifact = _finish(circuit, provenance, ctx)
    if artifact.kind is not ArtifactKind.BINARY:
        raise PassError("jit", ctx.subject, ValueError("JIT result does not conform to the hardware"))
    return artifact
