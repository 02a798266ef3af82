"""Pass framework, the standard passes, and the AOT/JIT pipelines sharing them."""

from .passes import (
    cancel_inverses,
    choose_layout,
    decompose_to_native,
    fold_constants,
    map_and_route,
    merge_rotations,
    schedule_asap,
)
from .pipeline import (
    CANCEL,
    DECOMPOSE,
    DEFAULT_SEQUENCE,
    FOLD,
    MANDATORY_TAIL,
    MAP_ROUTE,
    MERGE,
    SCHEDULE,
    apply_pass,
    compile_aot,
    compile_jit,
    compile_kernel,
    remaining_steps,
    standard_registry,
)
from .registry import (
    Category,
    CompilationContext,
    PassDescriptor,
    PassRegistry,
    PassSequence,
    PassStep,
    Stage,
    register_pass,
)

__all__ = [
    "CANCEL", "Category", "CompilationContext", "DECOMPOSE", "DEFAULT_SEQUENCE", "FOLD",
    "MANDATORY_TAIL", "MAP_ROUTE", "MERGE", "PassDescriptor", "PassRegistry", "PassSequence",
    "PassStep", "SCHEDULE", "Stage", "apply_pass", "cancel_inverses", "choose_layout",
    "compile_aot", "compile_jit", "compile_kernel", "decompose_to_native", "fold_constants",
    "map_and_route", "merge_rotations", "register_pass", "remaining_steps", "schedule_asap",
    "standard_registry",
]
