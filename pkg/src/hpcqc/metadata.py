"""Append-only metadata store and the aggregated contexts built from it.

Records are persisted as line-delimited JSON (``*.mdjl``)::

    {"seq":1,"t":1,"producer":"passman","kind":"compilation","subject":"k1","payload":{...}}
"""

from __future__ import annotations

import json
import threading
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping

from .errors import InvalidKind, PayloadTooLarge

MAX_PAYLOAD_BYTES = 64 * 1024


class Kind(str, Enum):
    CIRCUIT_INFO = "circuit_info"
    COMPILATION = "compilation"
    EXECUTION = "execution"
    PERFORMANCE = "performance"
    SYSTEM = "system"


_ALIASES = {
    "CircuitInfo": Kind.CIRCUIT_INFO,
    "CompilationData": Kind.COMPILATION,
    "ExecutionMeta": Kind.EXECUTION,
    "PerformanceMetric": Kind.PERFORMANCE,
    "SystemStatus": Kind.SYSTEM,
}


def as_kind(kind: Kind | str) -> Kind:
    if isinstance(kind, Kind):
        return kind
    if isinstance(kind, str):
        if kind in _ALIASES:
            return _ALIASES[kind]
        try:
            return Kind(kind)
        except ValueError:
            pass
    raise InvalidKind(f"unknown metadata kind {kind!r}")


Scalar = int | float | str | bool


def _dump(obj: Any) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


@dataclass(frozen=True)
class MetadataRecord:
    seq: int
    t: int
    producer: str
    kind: Kind
    subject: str
    payload: Mapping[str, Scalar] = field(default_factory=dict)

    def to_line(self) -> str:
        return _dump({
            "seq": self.seq, "t": self.t, "producer": self.producer,
            "kind": self.kind.value, "subject": self.subject, "payload": dict(self.payload),
        })

    @classmethod
    def from_line(cls, line: str) -> "MetadataRecord":
        doc = json.loads(line)
        if not isinstance(doc, dict) or set(doc) != {"seq", "t", "producer", "kind", "subject", "payload"}:
            raise ValueError(f"malformed metadata record: {line[:80]!r}")
        payload = doc["payload"]
        _check_payload(payload)
        return cls(int(doc["seq"]), int(doc["t"]), str(doc["producer"]), as_kind(doc["kind"]),
                   str(doc["subject"]), payload)


def _check_payload(payload: Mapping[str, Any]) -> str:
    if not isinstance(payload, Mapping):
        raise TypeError("payload must be a mapping")
    for k, v in payload.items():
        if not isinstance(k, str):
            raise TypeError(f"payload key {k!r} is not a string")
        if not isinstance(v, (int, float, str, bool)):
            raise TypeError(f"payload value for {k!r} must be a number, string or bool")
    try:
        text = _dump(dict(payload))
    except ValueError as exc:
        raise TypeError(f"payload is not serialisable: {exc}") from None
    if len(text.encode("utf-8")) > MAX_PAYLOAD_BYTES:
        raise PayloadTooLarge(f"payload is {len(text)} bytes, limit {MAX_PAYLOAD_BYTES}")
    return text


class MetadataStore:
    """Thread-safe append-only record list; ``seq`` is gapless from 1."""

    def __init__(self, records: Iterable[MetadataRecord] = ()):
        self._records: list[MetadataRecord] = []
        self._lock = threading.Lock()
        for r in records:
            if r.seq != len(self._records) + 1:
                raise ValueError(f"record seq {r.seq} breaks the gapless sequence")
            self._records.append(r)

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self):
        return iter(self.records())

    def records(self) -> list[MetadataRecord]:
        with self._lock:
            return list(self._records)

    def record(self, producer: str, kind: Kind | str, subject: str,
               payload: Mapping[str, Scalar] | None = None, t: int | None = None) -> MetadataRecord:
        kind = as_kind(kind)
        payload = dict(payload or {})
        _check_payload(payload)
        with self._lock:
            seq = len(self._records) + 1
            rec = MetadataRecord(seq, seq if t is None else int(t), str(producer), kind, str(subject), payload)
            self._records.append(rec)
        return rec

    def query(self, producer: str | None = None, kind: Kind | str | None = None,
              subject: str | None = None, seq_range: tuple[int, int] | None = None) -> list[MetadataRecord]:
        return query(self.records(), producer=producer, kind=kind, subject=subject, seq_range=seq_range)

    def dumps(self) -> str:
        return "".join(r.to_line() + "\n" for r in self.records())

    @classmethod
    def loads(cls, text: str) -> "MetadataStore":
        return cls(MetadataRecord.from_line(line) for line in text.split("\n") if line.strip())

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> "MetadataStore":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())


class RecordBuffer:
    """Collects records privately so a caller can commit them in a chosen order."""

    def __init__(self):
        self.pending: list[tuple[str, Kind, str, dict]] = []

    def record(self, producer, kind, subject, payload=None, t=None) -> None:
        payload = dict(payload or {})
        _check_payload(payload)
        self.pending.append((producer, as_kind(kind), subject, payload))

    def flush(self, store: MetadataStore) -> list[MetadataRecord]:
        out = [store.record(*entry) for entry in self.pending]
        self.pending.clear()
        return out


def query(records: Iterable[MetadataRecord], producer=None, kind=None, subject=None,
          seq_range=None) -> list[MetadataRecord]:
    kind = as_kind(kind) if kind is not None else None
    out = []
    for r in records:
        if producer is not None and r.producer != producer:
            continue
        if kind is not None and r.kind is not kind:
            continue
        if subject is not None and r.subject != subject:
            continue
        if seq_range is not None and not seq_range[0] <= r.seq <= seq_range[1]:
            continue
        out.append(r)
    return sorted(out, key=lambda r: r.seq)


# -- contexts ---------------------------------------------------------------

@dataclass(frozen=True)
class Context:
    """Aggregated view of a record list.

    ``subjects`` keeps the latest value of every payload key per subject,
    ``hardware`` the latest calibration snapshot per hardware id and
    ``pass_improvement`` the mean gates_after/gates_before ratio per pass.
    """

    subjects: Mapping[str, Mapping[str, Scalar]] = field(default_factory=dict)
    hardware: Mapping[str, Mapping[str, Scalar]] = field(default_factory=dict)
    pass_improvement: Mapping[str, float] = field(default_factory=dict)

    def value(self, subject: str, key: str, default=None):
        return self.subjects.get(subject, {}).get(key, default)

    def qubit_ok(self, hardware_id: str, num_qubits: int) -> tuple[bool, ...] | None:
        snap = self.hardware.get(hardware_id)
        if not snap or not any(k.startswith("qubit_ok:") for k in snap):
            return None
        return tuple(bool(snap.get(f"qubit_ok:{q}", True)) for q in range(num_qubits))


EMPTY_CONTEXT = Context()


def build_context(records: Iterable[MetadataRecord]) -> Context:
    subjects: dict[str, dict[str, Scalar]] = defaultdict(dict)
    hardware: dict[str, dict[str, Scalar]] = defaultdict(dict)
    ratios: dict[str, list[float]] = defaultdict(list)
    for r in sorted(records, key=lambda r: r.seq):
        if r.kind is Kind.SYSTEM:
            hardware[r.subject].update(r.payload)
            continue
        subjects[r.subject].update(r.payload)
        if r.kind is Kind.COMPILATION and "pass" in r.payload:
            before, after = r.payload.get("gates_before"), r.payload.get("gates_after")
            if isinstance(before, (int, float)) and isinstance(after, (int, float)) and before > 0:
                ratios[str(r.payload["pass"])].append(after / before)
    improvement = {name: sum(v) / len(v) for name, v in sorted(ratios.items())}
    return Context({k: dict(v) for k, v in sorted(subjects.items())},
                   {k: dict(v) for k, v in sorted(hardware.items())}, improvement)


def hardware_payload(hw) -> dict[str, Scalar]:
    """Flatten a hardware model's calibration data into a SystemStatus payload."""
    payload: dict[str, Scalar] = {"technology": hw.technology, "num_qubits": hw.num_qubits}
    for q, ok in enumerate(hw.qubit_ok):
        payload[f"qubit_ok:{q}"] = ok
    for q, p in sorted(hw.readout_error.items()):
        payload[f"readout:{q}"] = p
    for (name, qubits), p in sorted(hw.gate_error.items()):
        payload[f"gate:{name}:{'-'.join(map(str, qubits))}"] = p
    return payload


def ingest_hardware(store, hw, producer: str = "calibration") -> MetadataRecord | None:
    return store.record(producer, Kind.SYSTEM, hw.id, hardware_payload(hw))
