"""
A one-parameter variational loop
================================

Minimise <Z> after rx(theta) on one qubit.  The analytic answer is cos(theta),
so the exact run can be checked line by line; the sampled run shows the same
descent with shot noise on top.  Repeated angles reuse JIT-compiled binaries.
"""

import math
import os

import numpy as np

from hpcqc.frontend import parse_qasm
from hpcqc.hardware import load_descriptor
from hpcqc.metadata import MetadataStore
from hpcqc.runtime import JitCache, run_variational_loop

DATA = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")
with open(os.path.join(DATA, "kernels", "vqe.qasm")) as fh:
    kernel = parse_qasm(fh.read(), name="vqe")
with open(os.path.join(DATA, "hardware", "linear3.json")) as fh:
    device = load_descriptor(fh.read())

cache = JitCache()
exact = run_variational_loop(kernel, device, start=3.0, step=0.1, iterations=40, exact=True,
                             metadata=MetadataStore(), jit_cache=cache)
theta = np.array([s.theta for s in exact])
objective = np.array([s.objective for s in exact])
print("max |objective - cos(theta)| = %.2e" % np.abs(objective - np.cos(theta)).max())
print("final theta %.3f (pi = %.3f), objective %.6f" % (theta[-1], math.pi, objective[-1]))
print(f"JIT cache: {cache.misses} compiles, {cache.hits} reuses")

# %%
# The fixed step overshoots pi and then rocks back and forth around it.
for k in range(0, 40, 5):
    print(f"  iter {k:2d}  theta {theta[k]:.2f}  <Z> {objective[k]:+.4f}")

# %%
sampled = run_variational_loop(kernel, device, start=3.0, step=0.1, iterations=40, shots=2000, seed=5)
noisy = np.array([s.objective for s in sampled])
print("sampled: best %.4f, final %.4f, mean |noise| %.4f"
      % (noisy.min(), noisy[-1], np.abs(noisy - np.cos([s.theta for s in sampled])).mean()))
