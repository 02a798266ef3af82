"""Compilation outputs handed from the compile stage to the run stage."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from ..errors import InvalidCircuit
from .circuit import Circuit, content_hash, deserialize, free_symbols, serialize


class ArtifactKind(str, Enum):
    BINARY = "binary"
    BYTECODE = "bytecode"
    METADATA = "metadata"


@dataclass(frozen=True)
class Artifact:
    """A compiled kernel.

    ``provenance`` lists ``(pass name, content hash after the pass)``; a
    Bytecode artifact therefore records exactly which passes already ran.
    """

    kind: ArtifactKind
    kernel: Circuit
    target: str | None = None
    provenance: tuple[tuple[str, str], ...] = ()
    subject: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ArtifactKind(self.kind))
        object.__setattr__(self, "provenance", tuple(tuple(p) for p in self.provenance))
        if self.kind is ArtifactKind.BINARY:
            if free_symbols(self.kernel):
                raise InvalidCircuit("a binary artifact cannot contain free symbols")
            if self.target is None:
                raise InvalidCircuit("a binary artifact needs a target hardware id")

    @property
    def applied_passes(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.provenance)

    @property
    def hash(self) -> str:
        """Hash of the final kernel, or of the unmodified kernel if no pass ran."""
        return self.provenance[-1][1] if self.provenance else content_hash(self.kernel)


def dump_artifact(artifact: Artifact) -> str:
    lines = [f"#artifact {artifact.kind.value}"]
    if artifact.subject is not None:
        lines.append(f"#subject {artifact.subject}")
    if artifact.target is not None:
        lines.append(f"#target {artifact.target}")
    lines.extend(f"#pass {name} {h}" for name, h in artifact.provenance)
    return "\n".join(lines) + "\n" + serialize(artifact.kernel)


def load_artifact(text: str, name: str = "circuit") -> Artifact:
    kind = None
    target = subject = None
    provenance = []
    for line in text.splitlines():
        if not line.startswith("#"):
            continue
        key, _, rest = line[1:].partition(" ")
        if key == "artifact":
            kind = rest.strip()
        elif key == "target":
            target = rest.strip()
        elif key == "subject":
            subject = rest.strip()
        elif key == "pass":
            pname, _, h = rest.strip().partition(" ")
            provenance.append((pname, h))
    if kind is None:
        raise InvalidCircuit("missing '#artifact <kind>' header")
    return Artifact(ArtifactKind(kind), deserialize(text, name=name), target, tuple(provenance), subject)
