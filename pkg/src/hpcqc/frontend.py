"""Kernel and manifest readers, plus the ``xq1`` hardware exchange format.

The kernel language is a small OpenQASM 2 subset: ``qreg``/``creg``
declarations, the gates of :data:`hpcqc.ir.GATE_TABLE`, ``measure q[i] ->
c[j];`` and ``//`` comments.  Parameter expressions accept literals, ``pi``,
identifiers (free symbols), ``+ - *``, parentheses and division by a constant.
Failures raise :class:`ParseError` carrying positioned diagnostics.
"""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

from .errors import InvalidCircuit, InvalidProgram, NonConformant, ToolchainError, UnboundSymbol
from .ir import (
    GATE_TABLE,
    Circuit,
    Gate,
    HybridProgram,
    Lit,
    ResourceRequest,
    Task,
    TaskKind,
    find_cycle,
    format_expr,
    format_real,
    free_symbols,
    parse_expr,
)
from .ir.expr import ExprSyntaxError


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    line: int
    column: int
    message: str
    code: str = "SyntaxError"

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: {self.severity.value}: [{self.code}] {self.message}"


class ParseError(ToolchainError, ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = sorted(diagnostics, key=lambda d: (d.severity is not Severity.ERROR, d.line, d.column))
        super().__init__(str(self.diagnostics[0]) if self.diagnostics else "parse error")

    @property
    def first(self) -> Diagnostic:
        return self.diagnostics[0]


# -- QASM -------------------------------------------------------------------

_QASM_TOKEN = re.compile(
    r"(?P<ws>[ \t\r\n]+)|(?P<comment>//[^\n]*)"
    r"|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<id>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<str>\"[^\"\n]*\")"
    r"|(?P<arrow>->)|(?P<sym>[\[\](),;+\-*/])"
)


@dataclass
class _Tok:
    kind: str
    text: str
    offset: int
    line: int
    col: int


class _Abort(Exception):
    def __init__(self, diag: Diagnostic):
        self.diag = diag


def _tokenize_qasm(text: str) -> list[_Tok]:
    tokens = []
    line, line_start = 1, 0
    pos = 0
    while pos < len(text):
        m = _QASM_TOKEN.match(text, pos)
        if not m:
            raise _Abort(Diagnostic(Severity.ERROR, line, pos - line_start + 1,
                                    f"unexpected character {text[pos]!r}"))
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            tokens.append(_Tok(kind, m.group(), pos, line, pos - line_start + 1))
        chunk = m.group()
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    tokens.append(_Tok("eof", "", len(text), line, len(text) - line_start + 1))
    return tokens


class _QasmParser:
    def __init__(self, text: str, name: str):
        self.text = text
        self.name = name
        self.toks = _tokenize_qasm(text)
        self.i = 0
        self.qregs: dict[str, tuple[int, int]] = {}  # name -> (offset, size)
        self.cregs: dict[str, int] = {}
        self.num_qubits = 0
        self.gates: list[Gate] = []
        self.warnings: list[Diagnostic] = []

    def error(self, tok: _Tok, message: str, code: str = "SyntaxError") -> _Abort:
        return _Abort(Diagnostic(Severity.ERROR, tok.line, tok.col, message, code))

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        tok = self.toks[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.take()
        if tok.text != text:
            raise self.error(tok, f"expected {text!r}, found {tok.text or 'end of input'!r}")
        return tok

    def expect_kind(self, kind: str, what: str) -> _Tok:
        tok = self.take()
        if tok.kind != kind:
            raise self.error(tok, f"expected {what}, found {tok.text or 'end of input'!r}")
        return tok

    def parse(self) -> Circuit:
        while self.peek().kind != "eof":
            self.statement()
        try:
            return Circuit(self.num_qubits, tuple(self.gates), name=self.name)
        except InvalidCircuit as exc:
            raise self.error(self.toks[0], str(exc), "InvalidCircuit")

    def statement(self) -> None:
        tok = self.take()
        if tok.kind != "id":
            raise self.error(tok, f"expected a statement, found {tok.text!r}")
        word = tok.text
        if word == "OPENQASM":
            self.expect_kind("num", "a version number")
            self.expect(";")
        elif word == "include":
            path = self.expect_kind("str", "a file name")
            if path.text.strip('"') != "qelib1.inc":
                raise self.error(path, "include files are not supported", "Unsupported")
            self.expect(";")
        elif word in ("qreg", "creg"):
            self.declaration(word)
        elif word == "measure":
            self.measure(tok)
        elif word in GATE_TABLE:
            self.application(tok)
        elif word in ("gate", "opaque", "if", "barrier", "reset"):
            raise self.error(tok, f"'{word}' statements are not supported", "Unsupported")
        else:
            raise self.error(tok, f"unknown gate {word!r}", "UnknownGate")

    def declaration(self, word: str) -> None:
        ident = self.expect_kind("id", "a register name")
        self.expect("[")
        size_tok = self.expect_kind("num", "a register size")
        self.expect("]")
        self.expect(";")
        if not size_tok.text.isdigit() or int(size_tok.text) < 1:
            raise self.error(size_tok, f"invalid register size {size_tok.text!r}")
        size = int(size_tok.text)
        if ident.text in self.qregs or ident.text in self.cregs:
            raise self.error(ident, f"register {ident.text!r} already declared", "Redeclared")
        if word == "qreg":
            self.qregs[ident.text] = (self.num_qubits, size)
            self.num_qubits += size
        else:
            self.cregs[ident.text] = size

    def operand(self, regs: Mapping[str, Any], what: str) -> tuple[_Tok, list[int]]:
        """Return the operand token and the flat indices it denotes."""
        ident = self.expect_kind("id", f"a {what} register")
        if ident.text not in regs:
            raise self.error(ident, f"undeclared {what} register {ident.text!r}", "UndeclaredRegister")
        entry = regs[ident.text]
        offset, size = entry if isinstance(entry, tuple) else (0, entry)
        if self.peek().text != "[":
            return ident, [offset + k for k in range(size)]
        self.take()
        idx = self.expect_kind("num", "an index")
        self.expect("]")
        if not idx.text.isdigit():
            raise self.error(idx, f"invalid index {idx.text!r}")
        k = int(idx.text)
        if k >= size:
            return ident, [-(k + 1)]  # flagged by caller with the statement position
        return ident, [offset + k]

    def params(self) -> tuple:
        if self.peek().text != "(":
            return ()
        open_tok = self.take()
        depth = 1
        start = self.peek()
        chunks: list[tuple[_Tok, _Tok]] = []
        first = start
        while True:
            tok = self.take()
            if tok.kind == "eof":
                raise self.error(open_tok, "unterminated parameter list")
            if tok.text == "(":
                depth += 1
            elif tok.text == ")":
                depth -= 1
                if depth == 0:
                    chunks.append((first, tok))
                    break
            elif tok.text == "," and depth == 1:
                chunks.append((first, tok))
                first = self.peek()
        out = []
        for begin, end in chunks:
            source = self.text[begin.offset:end.offset]
            try:
                out.append(parse_expr(source, allow_division=True))
            except ExprSyntaxError as exc:
                at = self._locate(begin.offset + exc.offset)
                raise _Abort(Diagnostic(Severity.ERROR, at[0], at[1], str(exc), "BadExpression"))
        return tuple(out)

    def _locate(self, offset: int) -> tuple[int, int]:
        line = self.text.count("\n", 0, offset) + 1
        col = offset - (self.text.rfind("\n", 0, offset) + 1) + 1
        return line, col

    def application(self, name_tok: _Tok) -> None:
        name = name_tok.text
        arity, nparams = GATE_TABLE[name]
        params = self.params()
        if len(params) != nparams:
            raise self.error(name_tok, f"{name} takes {nparams} parameter(s), got {len(params)}", "ArityMismatch")
        operands = [self.operand(self.qregs, "quantum")]
        while self.peek().text == ",":
            self.take()
            operands.append(self.operand(self.qregs, "quantum"))
        self.expect(";")
        if len(operands) != arity:
            raise self.error(name_tok, f"{name} acts on {arity} qubit(s), got {len(operands)}", "ArityMismatch")
        for _, idx in operands:
            if any(i < 0 for i in idx):
                raise self.error(name_tok, f"qubit index {-idx[0] - 1} out of range", "IndexOutOfRange")
        lists = [idx for _, idx in operands]
        width = max(len(x) for x in lists)
        if any(len(x) not in (1, width) for x in lists):
            raise self.error(name_tok, "register operands have different sizes", "ArityMismatch")
        for k in range(width):
            qubits = tuple(x[0] if len(x) == 1 else x[k] for x in lists)
            self._append(name_tok, Gate(name, qubits, params) if len(set(qubits)) == len(qubits) else None)

    def measure(self, name_tok: _Tok) -> None:
        q_tok, qubits = self.operand(self.qregs, "quantum")
        self.expect("->")
        c_tok, bits = self.operand(self.cregs, "classical")
        self.expect(";")
        if any(i < 0 for i in qubits):
            raise self.error(name_tok, f"qubit index {-qubits[0] - 1} out of range", "IndexOutOfRange")
        if any(i < 0 for i in bits):
            raise self.error(name_tok, f"bit index {-bits[0] - 1} out of range", "IndexOutOfRange")
        if len(qubits) != len(bits):
            raise self.error(name_tok, "measure operands have different sizes", "ArityMismatch")
        for q in qubits:
            self._append(name_tok, Gate("measure", (q,)))

    def _append(self, tok: _Tok, g: Gate | None) -> None:
        if g is None:
            raise self.error(tok, "repeated qubit operand", "InvalidCircuit")
        if self.gates and self.gates[-1].is_measure and not g.is_measure:
            raise self.error(tok, f"{g.name} after measurement (only terminal measurements are supported)",
                             "InvalidCircuit")
        if g.is_measure and any(m.is_measure and m.qubits == g.qubits for m in self.gates):
            raise self.error(tok, f"qubit {g.qubits[0]} measured twice", "InvalidCircuit")
        self.gates.append(g)


def parse_qasm(text: str | bytes, name: str = "kernel") -> Circuit:
    """Parse a kernel; raise :class:`ParseError` with the earliest error."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError([Diagnostic(Severity.ERROR, 1, exc.start + 1, "input is not valid UTF-8", "Encoding")])
    try:
        return _QasmParser(text, name).parse()
    except _Abort as abort:
        raise ParseError([abort.diag]) from None
    except (RecursionError, ValueError) as exc:
        raise ParseError([Diagnostic(Severity.ERROR, 1, 1, str(exc) or type(exc).__name__, "Internal")]) from None


def to_qasm(circuit: Circuit) -> str:
    """Write a circuit in the accepted QASM subset (layouts are not represented)."""
    lines = ["OPENQASM 2.0;", f"qreg q[{circuit.num_qubits}];"]
    measured = circuit.measured_qubits
    if measured:
        lines.append(f"creg c[{len(measured)}];")
    bit = 0
    for g in circuit.instructions:
        if g.is_measure:
            lines.append(f"measure q[{g.qubits[0]}] -> c[{bit}];")
            bit += 1
            continue
        args = ",".join(f"q[{q}]" for q in g.qubits)
        if g.params:
            lines.append(f"{g.name}({','.join(format_expr(p) for p in g.params)}) {args};")
        else:
            lines.append(f"{g.name} {args};")
    return "\n".join(lines) + "\n"


# -- manifest ---------------------------------------------------------------

@dataclass(frozen=True)
class VariationalSpec:
    kernel: str
    start: float = 0.0
    step: float = 0.1
    iterations: int = 20
    shots: int = 1000
    qubit: int = 0


@dataclass(frozen=True)
class Manifest:
    name: str
    kernel_files: Mapping[str, str]
    program: HybridProgram
    variational: VariationalSpec | None = None


_TASK_KEYS = {"id", "kind", "depends_on", "kernel", "shots", "bindings", "resources",
              "op", "args", "generator", "hardware"}


def _schema(message: str, code: str = "SchemaError") -> _Abort:
    return _Abort(Diagnostic(Severity.ERROR, 1, 1, message, code))


def load_manifest(text: str, base_dir: str | os.PathLike | None = None,
                  sources: Mapping[str, str] | None = None) -> Manifest:
    """Parse a hybrid-program manifest and resolve its kernel files.

    Kernel paths are read from ``sources`` when present there, otherwise from
    disk relative to ``base_dir``.
    """
    try:
        return _load_manifest(text, base_dir, sources)
    except _Abort as abort:
        raise ParseError([abort.diag]) from None


def parse_manifest(text: str, base_dir=None, sources=None) -> HybridProgram:
    return load_manifest(text, base_dir, sources).program


def _load_manifest(text, base_dir, sources) -> Manifest:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise _Abort(Diagnostic(Severity.ERROR, exc.lineno, exc.colno, exc.msg, "SyntaxError"))
    if not isinstance(doc, dict):
        raise _schema("manifest must be a JSON object")
    name = doc.get("name", "program")
    kernel_files = doc.get("kernels", {})
    tasks_doc = doc.get("tasks")
    if not isinstance(name, str):
        raise _schema("'name' must be a string")
    if not isinstance(kernel_files, dict) or not all(isinstance(v, str) for v in kernel_files.values()):
        raise _schema("'kernels' must map kernel ids to file paths")
    if not isinstance(tasks_doc, list):
        raise _schema("'tasks' must be an array")

    kernels: dict[str, Circuit] = {}
    for kid, path in sorted(kernel_files.items()):
        if sources is not None and path in sources:
            source = sources[path]
        else:
            full = os.path.join(base_dir or ".", path)
            try:
                with open(full, encoding="utf-8") as fh:
                    source = fh.read()
            except OSError as exc:
                raise _schema(f"kernel {kid!r}: cannot read {path!r}: {exc.strerror}", "UnresolvedKernel")
        try:
            kernels[kid] = parse_qasm(source, name=kid)
        except ParseError as exc:
            d = exc.first
            raise _Abort(Diagnostic(d.severity, d.line, d.column, f"{path}: {d.message}", d.code))
    path_to_id = {p: k for k, p in kernel_files.items()}

    tasks, edges, seen = [], [], set()
    for k, item in enumerate(tasks_doc):
        if not isinstance(item, dict) or not isinstance(item.get("id"), str):
            raise _schema(f"task #{k} must be an object with a string 'id'")
        tid = item["id"]
        unknown = set(item) - _TASK_KEYS
        if unknown:
            raise _schema(f"task {tid!r}: unknown key(s) {sorted(unknown)}")
        if tid in seen:
            raise _schema(f"duplicate task id {tid!r}", "DuplicateTaskId")
        seen.add(tid)
        deps = item.get("depends_on", [])
        if isinstance(deps, str):
            deps = [deps]
        if not isinstance(deps, list) or not all(isinstance(d, str) for d in deps):
            raise _schema(f"task {tid!r}: 'depends_on' must be a list of task ids")
        edges.extend((d, tid) for d in deps)
        tasks.append(_task_from_json(item, kernels, path_to_id))

    for u, v in edges:
        if u not in seen:
            raise _schema(f"task {v!r} depends on unknown task {u!r}", "UnknownTask")
    cycle = find_cycle([t.id for t in tasks], edges)
    if cycle:
        raise _schema(f"dependency cycle {cycle}", "CycleDetected")
    try:
        program = HybridProgram(name, tuple(tasks), tuple(edges), kernels)
    except InvalidProgram as exc:
        raise _schema(str(exc), "InvalidProgram")

    variational = None
    if "variational" in doc:
        v = doc["variational"]
        if not isinstance(v, dict) or v.get("kernel") not in kernels:
            raise _schema("'variational' must name a declared kernel", "UnresolvedKernel")
        try:
            variational = VariationalSpec(
                kernel=v["kernel"], start=float(v.get("start", 0.0)), step=float(v.get("step", 0.1)),
                iterations=int(v.get("iterations", 20)), shots=int(v.get("shots", 1000)),
                qubit=int(v.get("qubit", 0)))
        except (TypeError, ValueError) as exc:
            raise _schema(f"'variational': {exc}")
    return Manifest(name, dict(kernel_files), program, variational)


def _task_from_json(item: Mapping[str, Any], kernels, path_to_id) -> Task:
    tid = item["id"]
    try:
        kind = TaskKind(item.get("kind", "quantum"))
    except ValueError:
        raise _schema(f"task {tid!r}: unknown kind {item.get('kind')!r}")
    try:
        resources = ResourceRequest.from_json(item.get("resources"))
    except (TypeError, ValueError) as exc:
        raise _schema(f"task {tid!r}: bad resources: {exc}")
    kernel = item.get("kernel")
    if kernel is not None:
        if kernel in path_to_id:
            kernel = path_to_id[kernel]
        if kernel not in kernels:
            raise _schema(f"task {tid!r} references undeclared kernel {item['kernel']!r}", "UnresolvedKernel")
    bindings = item.get("bindings", {})
    bindings_from = None
    if isinstance(bindings, str):
        bindings_from, bindings = bindings, {}
    elif not isinstance(bindings, dict) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in bindings.values()):
        raise _schema(f"task {tid!r}: 'bindings' must map symbols to numbers or name a task")
    if bindings_from is not None and bindings_from not in item.get("depends_on", []):
        raise _schema(f"task {tid!r} takes bindings from {bindings_from!r} without depending on it")
    op = item.get("op") if kind is not TaskKind.GENERATOR else item.get("generator", item.get("op"))
    if kind is not TaskKind.QUANTUM and not isinstance(op, str):
        raise _schema(f"task {tid!r}: {kind.value} tasks need an 'op'")
    shots = item.get("shots", 1)
    if not isinstance(shots, int) or isinstance(shots, bool) or shots < 1:
        raise _schema(f"task {tid!r}: 'shots' must be a positive integer")
    args = item.get("args", {})
    if not isinstance(args, dict):
        raise _schema(f"task {tid!r}: 'args' must be an object")
    return Task(id=tid, kind=kind, op=op, args=args, kernel=kernel, shots=shots,
                bindings={k: float(v) for k, v in bindings.items()}, bindings_from=bindings_from,
                resources=resources, hardware=item.get("hardware"))


# -- xq1 exchange format ----------------------------------------------------

def emit_exchange(circuit: Circuit) -> str:
    """Physical-qubit-indexed, fully bound text for the execution backend."""
    symbols = free_symbols(circuit)
    if symbols:
        raise UnboundSymbol(f"cannot emit unbound symbols: {', '.join(sorted(symbols))}")
    if circuit.layout is None:
        raise NonConformant("circuit has no layout; map it to hardware first")
    lines = [f"xq1 {circuit.num_qubits}"]
    for g in circuit.instructions:
        fields = [g.name, *map(str, g.qubits), *(format_real(p.evaluate()) for p in g.params)]
        lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"


def parse_exchange(text: str) -> Circuit:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("xq1 "):
        raise ParseError([Diagnostic(Severity.ERROR, 1, 1, "missing 'xq1 <n>' header")])
    try:
        n = int(lines[0].split()[1])
        gates = []
        for lineno, line in enumerate(lines[1:], start=2):
            fields = line.split()
            if fields[0] not in GATE_TABLE:
                raise ParseError([Diagnostic(Severity.ERROR, lineno, 1, f"unknown gate {fields[0]!r}", "UnknownGate")])
            arity, nparams = GATE_TABLE[fields[0]]
            if len(fields) != 1 + arity + nparams:
                raise ParseError([Diagnostic(Severity.ERROR, lineno, 1, "wrong operand count", "ArityMismatch")])
            qubits = tuple(int(f) for f in fields[1:1 + arity])
            values = tuple(float(f) for f in fields[1 + arity:])
            if not all(math.isfinite(v) for v in values):
                raise ParseError([Diagnostic(Severity.ERROR, lineno, 1, "non-finite angle")])
            gates.append(Gate(fields[0], qubits, tuple(Lit(v) for v in values)))
        return Circuit(n, tuple(gates), name="exchange")
    except (ValueError, IndexError, InvalidCircuit) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError([Diagnostic(Severity.ERROR, 1, 1, str(exc))]) from None
