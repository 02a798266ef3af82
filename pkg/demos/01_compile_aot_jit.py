"""
Ahead-of-time and just-in-time compilation of one kernel
=========================================================

A parametrised kernel is compiled twice: once without hardware (this stops
before the first hardware-aware pass and yields bytecode), then bound and
finished against a concrete device at "run time".  Both routes go through
the same pass manager, so binding first and compiling ahead of time gives
the identical result.
"""

import os

from hpcqc.frontend import emit_exchange, parse_qasm
from hpcqc.hardware import check_conformance, estimate_fidelity, load_descriptor
from hpcqc.ir import bind_parameters, free_symbols, serialize
from hpcqc.passman import CompilationContext, compile_jit, compile_kernel, standard_registry

DATA = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")

with open(os.path.join(DATA, "kernels", "ansatz3.qasm")) as fh:
    kernel = parse_qasm(fh.read(), name="ansatz3")
with open(os.path.join(DATA, "hardware", "ring4.json")) as fh:
    ring4 = load_descriptor(fh.read())

registry = standard_registry()
print("kernel:", kernel.num_qubits, "qubits,", kernel.gate_count, "gates")

# %%
# Without hardware the result is bytecode: symbolic, unmapped.
bytecode = compile_kernel(kernel, registry)
print(bytecode.kind.value, "after", [name for name, _ in bytecode.provenance])

# %%
# Bind, then let the JIT run the passes the bytecode has not seen.
symbols = sorted(free_symbols(kernel))
bindings = {s: 0.1 * (k + 1) for k, s in enumerate(symbols)}
binary = compile_jit(bytecode, bindings, ring4, registry)
print(binary.kind.value, "for", binary.target, "layout", binary.kernel.layout)
print("violations:", len(check_conformance(binary.kernel, ring4)))
print("estimated fidelity: %.4f" % estimate_fidelity(binary.kernel, ring4))

# %%
# Same answer when binding first and compiling ahead of time against ring4.
aot = compile_kernel(bind_parameters(kernel, bindings), registry,
                     ctx=CompilationContext(hardware=ring4))
print("JIT == AOT:", serialize(aot.kernel) == serialize(binary.kernel))

# %%
# The exchange text handed to the execution backend.
print(emit_exchange(binary.kernel))
