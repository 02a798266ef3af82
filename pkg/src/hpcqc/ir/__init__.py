"""Hybrid intermediate representation and the small-circuit unitary oracle."""

from .artifact import Artifact, ArtifactKind, dump_artifact, load_artifact
from .circuit import (
    GATE_TABLE,
    Circuit,
    Gate,
    asap_layers,
    bind_parameters,
    circuit_depth,
    content_hash,
    deserialize,
    fnv1a64,
    free_symbols,
    gate,
    serialize,
)
from .expr import Add, Lit, Mul, Neg, ParamExpr, Sub, Sym, fold, format_expr, format_real, parse_expr
from .oracle import (
    equivalent_up_to_phase,
    gate_matrix,
    layout_isometry,
    mapped_equivalent,
    statevector,
    unitary_of,
)
from .program import HybridProgram, ResourceRequest, Task, TaskKind, find_cycle

__all__ = [
    "Add", "Artifact", "ArtifactKind", "Circuit", "GATE_TABLE", "Gate", "HybridProgram",
    "Lit", "Mul", "Neg", "ParamExpr", "ResourceRequest", "Sub", "Sym", "Task", "TaskKind",
    "asap_layers", "bind_parameters", "circuit_depth", "content_hash", "deserialize",
    "dump_artifact", "equivalent_up_to_phase", "find_cycle", "fnv1a64", "fold",
    "format_expr", "format_real", "free_symbols", "gate", "gate_matrix", "layout_isometry",
    "load_artifact", "mapped_equivalent", "parse_expr", "serialize", "statevector", "unitary_of",
]
