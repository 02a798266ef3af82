"""Meta-optimizer: a cost model, greedy pass-sequence search and hardware suggestion.

The search is deliberately simple and deterministic.  Anything smarter (a
learned policy, say) plugs in through :class:`SequencePolicy`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Protocol

from .errors import BudgetExhausted, NoFeasibleHardware, ToolchainError
from .hardware import HardwareModel, estimate_fidelity
from .ir import Circuit, HybridProgram, bind_parameters, circuit_depth, free_symbols
from .metadata import EMPTY_CONTEXT, Context
from .passman import (
    DEFAULT_SEQUENCE,
    MANDATORY_TAIL,
    CompilationContext,
    PassRegistry,
    PassSequence,
    apply_pass,
)


@dataclass(frozen=True)
class CostWeights:
    w_gates: float = 1.0
    w_depth: float = 1.0
    w_infidelity: float = 100.0

    def __post_init__(self):
        ws = (self.w_gates, self.w_depth, self.w_infidelity)
        if any(not math.isfinite(w) or w < 0 for w in ws):
            raise ValueError(f"weights must be finite and non-negative, got {ws}")
        if not any(w > 0 for w in ws):
            raise ValueError("at least one weight must be positive")


DEFAULT_WEIGHTS = CostWeights()


def cost(circuit: Circuit, hw: HardwareModel | None = None, weights: CostWeights = DEFAULT_WEIGHTS) -> float:
    value = weights.w_gates * circuit.gate_count + weights.w_depth * circuit_depth(circuit)
    if hw is not None and weights.w_infidelity > 0:
        value += weights.w_infidelity * (1.0 - estimate_fidelity(circuit, hw))
    return value


@dataclass(frozen=True)
class SequenceProposal:
    sequence: PassSequence
    predicted_cost: float
    evaluated_cost: float
    trials: int = 0
    baseline_cost: float | None = None


class SequencePolicy(Protocol):
    """Extension hook: anything mapping (circuit, context) to a proposal."""

    def propose(self, circuit: Circuit, hw: HardwareModel, registry: PassRegistry,
                context: Context) -> SequenceProposal: ...


def _run(circuit: Circuit, sequence: PassSequence, registry: PassRegistry,
         ctx: CompilationContext) -> Circuit:
    for step in sequence:
        circuit = apply_pass(registry, step, circuit, ctx)
    return circuit


class _Trials:
    def __init__(self, circuit, hw, registry, weights, budget, ctx):
        self.circuit, self.hw, self.registry, self.weights = circuit, hw, registry, weights
        self.budget, self.ctx, self.used = budget, ctx, 0
        self.cache: dict[tuple[str, ...], float | None] = {}

    @property
    def left(self) -> int:
        return self.budget - self.used

    def evaluate(self, sequence: PassSequence) -> float | None:
        """Cost of the compiled output, or None when the sequence is invalid or a pass fails."""
        key = sequence.names
        if key in self.cache:
            return self.cache[key]
        self.used += 1
        try:
            sequence.validate(self.registry)
            out = _run(self.circuit, sequence, self.registry, self.ctx)
            value = cost(out, self.hw, self.weights)
        except ToolchainError:
            value = None
        self.cache[key] = value
        return value


def select_sequence(circuit: Circuit, hw: HardwareModel, registry: PassRegistry,
                    weights: CostWeights = DEFAULT_WEIGHTS, budget: int = 50,
                    context: Context = EMPTY_CONTEXT, metadata=None,
                    subject: str = "metaopt") -> SequenceProposal:
    """Greedy forward insertion starting from the mandatory tail.

    Each round tries every non-mandatory pass at every position and keeps the
    cheapest strict improvement (ties: lower position, then pass name).  The
    default sequence is evaluated right after the tail so the result is never
    worse than it whenever the budget allows that second trial.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if free_symbols(circuit):
        raise ValueError("select_sequence needs a bound circuit")
    ctx = CompilationContext(hardware=hw, metadata=metadata, context=context, subject=subject)
    trials = _Trials(circuit, hw, registry, weights, budget, ctx)

    best_seq = MANDATORY_TAIL
    best = trials.evaluate(best_seq)
    if best is None:
        raise BudgetExhausted("the mandatory passes cannot compile this circuit")
    baseline = trials.evaluate(DEFAULT_SEQUENCE) if trials.left > 0 else None

    optional = sorted(d.name for d in registry.descriptors() if not d.mandatory)
    current_seq, current = best_seq, best
    while trials.left > 0:
        round_best: tuple[float, int, str] | None = None
        for pos in range(len(current_seq) + 1):
            for name in optional:
                if trials.left <= 0:
                    break
                value = trials.evaluate(current_seq.insert(pos, name))
                if value is not None and (round_best is None or (value, pos, name) < round_best):
                    round_best = (value, pos, name)
        if round_best is None or round_best[0] >= current:
            break
        current, pos, name = round_best
        current_seq = current_seq.insert(pos, name)
    best_seq, best = current_seq, current
    if baseline is not None and baseline < best:
        best_seq, best = DEFAULT_SEQUENCE, baseline

    predicted = _predict(circuit, best_seq, context, hw, weights)
    return SequenceProposal(best_seq, predicted, best, trials.used, baseline)


def _predict(circuit: Circuit, sequence: PassSequence, context: Context, hw, weights) -> float:
    """Cheap estimate from historical per-pass improvement ratios (1.0 when unknown)."""
    ratio = 1.0
    for name in sequence.names:
        ratio *= context.pass_improvement.get(name, 1.0)
    gates = circuit.gate_count * ratio
    return weights.w_gates * gates + weights.w_depth * circuit_depth(circuit) * ratio


class GreedyPolicy:
    def __init__(self, weights: CostWeights = DEFAULT_WEIGHTS, budget: int = 50):
        self.weights, self.budget = weights, budget

    def propose(self, circuit, hw, registry, context=EMPTY_CONTEXT) -> SequenceProposal:
        return select_sequence(circuit, hw, registry, self.weights, self.budget, context)


# -- resource suggestion ------------------------------------------------------

def _usable_count(hw: HardwareModel, context: Context) -> int:
    flags = context.qubit_ok(hw.id, hw.num_qubits) or hw.qubit_ok
    return sum(bool(f) for f in flags)


def _estimation_kernel(circuit: Circuit, bindings: Mapping[str, float]) -> Circuit:
    symbols = free_symbols(circuit)
    if not symbols:
        return circuit
    values = {s: float(bindings.get(s, 0.0)) for s in symbols}
    return bind_parameters(circuit, values)


def suggest_resources(program: HybridProgram, context: Context, catalog: Iterable[HardwareModel],
                      registry: PassRegistry, sequence: PassSequence = DEFAULT_SEQUENCE,
                      demand: Mapping[str, Circuit] | None = None) -> dict[str, str]:
    """Map each quantum task to the catalog model with the best estimated fidelity.

    Only models with at least as many usable qubits as the kernel needs are
    considered; ties go to the smaller hardware id.  Symbolic kernels are
    estimated with their static bindings (zero where unbound).  ``demand``
    supplies circuits for tasks without a kernel (generator-fed tasks).
    A task's explicit ``hardware`` field wins over the suggestion.
    """
    models = sorted(catalog, key=lambda h: h.id)
    by_id = {h.id: h for h in models}
    out: dict[str, str] = {}
    for task in program.quantum_tasks:
        if task.hardware is not None:
            if task.hardware not in by_id:
                raise NoFeasibleHardware(task.id)
            out[task.id] = task.hardware
            continue
        kernel = program.kernels[task.kernel] if task.kernel is not None else (demand or {}).get(task.id)
        if kernel is None:
            # size is unknown until the generator runs: pick the largest usable model
            ranked = sorted(models, key=lambda h: (-_usable_count(h, context), h.id))
            if not ranked:
                raise NoFeasibleHardware(task.id)
            out[task.id] = ranked[0].id
            continue
        kernel = _estimation_kernel(kernel, task.bindings)
        best: tuple[float, str] | None = None
        for hw in models:
            if _usable_count(hw, context) < kernel.num_qubits:
                continue
            ctx = CompilationContext(hardware=hw, context=context, subject=task.id)
            try:
                compiled = _run(kernel, sequence, registry, ctx)
            except ToolchainError:
                continue
            fid = estimate_fidelity(compiled, hw)
            if best is None or (-fid, hw.id) < (-best[0], best[1]):
                best = (fid, hw.id)
        if best is None:
            raise NoFeasibleHardware(task.id)
        out[task.id] = best[1]
    return out


__all__ = [
    "CostWeights", "DEFAULT_WEIGHTS", "GreedyPolicy", "SequencePolicy", "SequenceProposal",
    "cost", "select_sequence", "suggest_resources",
]
