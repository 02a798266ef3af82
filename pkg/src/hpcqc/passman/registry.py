"""Pass descriptors, the registry, pass sequences and the compilation context."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterable, Mapping, Protocol

from ..errors import DuplicatePass, InvalidSequence, UnknownPass
from ..hardware import HardwareModel
from ..ir import Circuit
from ..metadata import EMPTY_CONTEXT, Context


class Category(str, Enum):
    OPTIMIZE = "optimize"
    DECOMPOSE = "decompose"
    MAP_ROUTE = "map-route"
    SCHEDULE = "schedule"
    CLASSICAL = "classical"
    ANALYSIS = "analysis"


@dataclass(frozen=True)
class PassDescriptor:
    """What a pass promises: the properties it needs and the ones it establishes."""

    name: str
    category: Category
    hardware_aware: bool = False
    mandatory: bool = False
    inputs: frozenset[str] = frozenset({"any"})
    outputs: frozenset[str] = frozenset()
    errors: tuple[str, ...] = ()
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "category", Category(self.category))
        object.__setattr__(self, "inputs", frozenset(self.inputs))
        object.__setattr__(self, "outputs", frozenset(self.outputs))
        object.__setattr__(self, "errors", tuple(self.errors))
        if self.mandatory and not self.hardware_aware:
            raise ValueError(f"pass {self.name!r}: mandatory passes must be hardware-aware")


class Recorder(Protocol):
    def record(self, producer: str, kind, subject: str, payload=None, t=None) -> Any: ...


class Stage(str, Enum):
    AOT = "aot"
    JIT = "jit"


@dataclass(frozen=True)
class CompilationContext:
    hardware: HardwareModel | None = None
    metadata: Recorder | None = None
    context: Context = EMPTY_CONTEXT
    stage: Stage = Stage.AOT
    seed: int = 42
    subject: str = "kernel"
    wall_clock: bool = False

    def __post_init__(self):
        object.__setattr__(self, "stage", Stage(self.stage))
        if self.stage is Stage.JIT and self.hardware is None:
            raise ValueError("JIT compilation needs a hardware model")

    def emit(self, kind, payload: Mapping[str, Any], producer: str = "passman") -> None:
        if self.metadata is not None:
            self.metadata.record(producer, kind, self.subject, payload)


Transform = Callable[..., Circuit]


class PassRegistry:
    """Name -> (descriptor, transform), enumerated in registration order."""

    def __init__(self):
        self._entries: dict[str, tuple[PassDescriptor, Transform]] = {}
        self._frozen = False

    def register(self, descriptor: PassDescriptor, transform: Transform) -> None:
        if self._frozen:
            raise RuntimeError("registry is frozen")
        if descriptor.name in self._entries:
            raise DuplicatePass(descriptor.name)
        self._entries[descriptor.name] = (descriptor, transform)

    def freeze(self) -> "PassRegistry":
        self._frozen = True
        return self

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def names(self) -> list[str]:
        return list(self._entries)

    def descriptor(self, name: str) -> PassDescriptor:
        return self._resolve(name)[0]

    def transform(self, name: str) -> Transform:
        return self._resolve(name)[1]

    def descriptors(self) -> list[PassDescriptor]:
        return [d for d, _ in self._entries.values()]

    def _resolve(self, name: str):
        try:
            return self._entries[name]
        except KeyError:
            raise UnknownPass(name) from None


def register_pass(registry: PassRegistry, descriptor: PassDescriptor, transform: Transform) -> None:
    registry.register(descriptor, transform)


@dataclass(frozen=True)
class PassStep:
    name: str
    options: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class PassSequence:
    steps: tuple[PassStep, ...]

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))

    @classmethod
    def of(cls, *names: str | PassStep) -> "PassSequence":
        return cls(tuple(n if isinstance(n, PassStep) else PassStep(n) for n in names))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.steps)

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def insert(self, position: int, name: str) -> "PassSequence":
        steps = list(self.steps)
        steps.insert(position, PassStep(name))
        return PassSequence(tuple(steps))

    def validate(self, registry: PassRegistry, initial: Iterable[str] = ("any",)) -> None:
        """Resolve every name and check each pass's inputs are already established."""
        have = set(initial) | {"any"}
        for k, step in enumerate(self.steps):
            desc = registry.descriptor(step.name)
            missing = desc.inputs - have
            if missing:
                raise InvalidSequence(
                    f"step {k} ({step.name}) needs {sorted(missing)} which no earlier pass provides")
            have |= desc.outputs

    def to_json(self) -> list[dict]:
        return [{"pass": s.name, "options": dict(s.options)} for s in self.steps]

    @classmethod
    def from_json(cls, doc: str | list) -> "PassSequence":
        if isinstance(doc, str):
            doc = json.loads(doc)
        if not isinstance(doc, list):
            raise InvalidSequence("a pass sequence is a JSON array")
        steps = []
        for item in doc:
            if isinstance(item, str):
                steps.append(PassStep(item))
            elif isinstance(item, dict) and isinstance(item.get("pass"), str):
                options = item.get("options", {})
                if not isinstance(options, dict):
                    raise InvalidSequence(f"options of {item['pass']!r} must be an object")
                steps.append(PassStep(item["pass"], options))
            else:
                raise InvalidSequence(f"bad sequence entry {item!r}")
        return cls(tuple(steps))
