"""
Calibration-aware qubit placement
=================================

Same kernel, same device, two calibrations.  When qubit 3 of the T-shaped
five-qubit model is flagged as broken, the mapper places the kernel
elsewhere and the estimated fidelity tells us how much that costs.
"""

import itertools
import os

import numpy as np

from hpcqc.hardware import estimate_fidelity, load_descriptor
from hpcqc.ir import Circuit, gate, mapped_equivalent
from hpcqc.passman import (DEFAULT_SEQUENCE, CompilationContext, PassSequence, PassStep,
                           compile_kernel, standard_registry)

DATA = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")
with open(os.path.join(DATA, "hardware", "tshape5.json")) as fh:
    tshape = load_descriptor(fh.read())

registry = standard_registry()
kernel = Circuit(3, (gate("h", 0), gate("cx", 0, 1), gate("cx", 0, 2),
                     gate("measure", 0), gate("measure", 1), gate("measure", 2)), name="ghz3")


def compile_on(hw, sequence=DEFAULT_SEQUENCE):
    return compile_kernel(kernel, registry, sequence, CompilationContext(hardware=hw)).kernel


healthy = compile_on(tshape)
print("healthy  layout", healthy.layout, "fidelity %.4f" % estimate_fidelity(healthy, tshape))

# %%
# Mark qubit 3 as broken.  That strands qubit 4, but 0-1-2 is still a
# connected path with room for three logical qubits.
flags = [True] * tshape.num_qubits
flags[3] = False
broken = tshape.with_qubit_ok(flags)
moved = compile_on(broken)
print("degraded layout", moved.layout, "fidelity %.4f" % estimate_fidelity(moved, broken))
print("still the same computation:", mapped_equivalent(kernel, moved))

# %%
# Brute force over every placement of three logical qubits.
scores = {}
for layout in itertools.permutations(range(tshape.num_qubits), 3):
    steps = [PassStep(s.name, {"initial_layout": layout}) if s.name == "map-and-route" else s
             for s in DEFAULT_SEQUENCE]
    scores[layout] = estimate_fidelity(compile_on(tshape, PassSequence(tuple(steps))), tshape)

values = np.array(list(scores.values()))
best = max(scores, key=scores.get)
print(f"{len(scores)} layouts: fidelity min {values.min():.4f}, median {np.median(values):.4f}, "
      f"max {values.max():.4f} at {best}")
rank = int(np.sum(values > scores[healthy.layout] + 1e-12)) + 1
print("greedy choice ranks", rank, "of", len(values))
