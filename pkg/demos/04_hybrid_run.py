"""
A hybrid program end to end
===========================

Load the demo manifest, compile every quantum task ahead of time, let the
meta-optimizer's resource heuristic pick a device per task, execute the DAG
and look at what ended up in the metadata store.
"""

import collections
import os

from hpcqc.frontend import load_manifest
from hpcqc.hardware import load_descriptor
from hpcqc.metadata import Kind, MetadataStore, build_context, ingest_hardware
from hpcqc.metaopt import suggest_resources
from hpcqc.passman import CompilationContext, compile_aot, standard_registry
from hpcqc.runtime import ExecutionPlan, execute

DATA = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")
manifest_path = os.path.join(DATA, "manifests", "hybrid.json")
with open(manifest_path) as fh:
    program = load_manifest(fh.read(), base_dir=os.path.dirname(manifest_path)).program

catalog = []
for name in sorted(os.listdir(os.path.join(DATA, "hardware"))):
    with open(os.path.join(DATA, "hardware", name)) as fh:
        catalog.append(load_descriptor(fh.read()))

store = MetadataStore()
for hw in catalog:
    ingest_hardware(store, hw)
context = build_context(store.records())
registry = standard_registry()

print(program.name, "with", len(program.tasks), "tasks;", "quantum:", [t.id for t in program.quantum_tasks])

# %%
artifacts = {a.subject: a for a in compile_aot(program, registry, ctx=CompilationContext(metadata=store, context=context),
                                               per_task=True)}
for subject, art in sorted(artifacts.items()):
    print(f"  {subject:7s} {art.kind.value:8s} {art.kernel.gate_count} gates")
assignments = suggest_resources(program, context, catalog, registry)
print("assignments:", assignments)

# %%
plan = ExecutionPlan(program, assignments, artifacts, {hw.id: hw for hw in catalog}, store,
                     seed=7, registry=registry, context=context)
report = execute(plan)
for t in report.tasks:
    print(f"  {t.id:7s} {t.status:9s} ticks {t.start}-{t.end}")
print("values:", report.values())
for kid, dist in sorted(report.distributions.items()):
    print(f"  {kid}: {dist.shots} shots, {dict(dist.counts)}")

# %%
# The store is the audit log: every record has a producer, kind and subject.
tally = collections.Counter((r.producer, r.kind.value) for r in store.records())
for (producer, kind), n in sorted(tally.items()):
    print(f"  {producer:12s} {kind:12s} {n}")
print("execution events for bell-a:", [r.payload["event"] for r in store.query(kind=Kind.EXECUTION, subject="bell-a")])
