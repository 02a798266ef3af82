"""
FCFS versus conservative backfill
=================================

A small mixed workload on four CPU nodes, two QPUs (one of them able to host
two jobs at once) and a hybrid node.  Backfill lets short jobs jump into
holes, but only when no earlier job's reservation moves.
"""

import os

import numpy as np

from hpcqc.scheduler import ResourcePool, fcfs, gantt, load_workload, oversubscriptions, simulate, utilization

DATA = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data", "sched")
with open(os.path.join(DATA, "workload.json")) as fh:
    jobs = load_workload(fh.read())
with open(os.path.join(DATA, "pool.json")) as fh:
    pool = ResourcePool.from_json(fh.read())

plain = fcfs(jobs, pool)
backfilled = simulate(jobs, pool)

print("pure FCFS")
print(gantt(plain))
print("conservative backfill")
print(gantt(backfilled))

# %%
for name, trace in (("fcfs", plain), ("backfill", backfilled)):
    u = utilization(trace, pool)
    print(f"{name:9s} makespan {u['makespan']:4.0f}  mean wait {u['mean_wait']:5.2f}  "
          f"cpu {u['cpu']:.2f}  qpu {u['qpu']:.2f}  hybrid {u['hybrid']:.2f}")
print("rejected:", [job for job, _ in backfilled.rejected])

# %%
# Nobody starts later than under FCFS, and no tick is oversubscribed.
before = plain.by_job()
delta = np.array([before[p.job].start - p.start for p in backfilled.placements])
print("start-time gain per job:", dict(zip((p.job for p in backfilled.placements), delta.tolist())))
print("never later:", bool((delta >= 0).all()), " oversubscribed ticks:", len(oversubscriptions(backfilled, pool)))
