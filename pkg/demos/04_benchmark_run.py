#!/usr/bin/env python3
"""Full class-incremental benchmark on synthetic data: the closed-form
streaming method against nearest-class-mean and a gradient-trained probe.

Each method sees the five tasks strictly in order and is evaluated on all
past test splits after every stage. The probe updates one weight matrix
with gradients at every stage, so later tasks overwrite what earlier
tasks wrote into it. The streaming head and NCM only ever add to running
sums, so nothing is overwritten and forgetting stays near zero.
"""

import tempfile
from pathlib import Path

import numpy as np

from streamproto import (EmbeddingBatch, ProbeHyper, RunConfig,
                         aggregate_runs, gen_gaussian_mixture,
                         make_cil_manifest, run_protocol)

work = Path(tempfile.mkdtemp(prefix="benchmark_demo_"))

# 10 classes, 32-dim, split into 5 tasks of 2. Real embedding spaces put
# every class on a shared positive shell rather than scattering them
# around the origin, so add a common offset direction; without it the
# class directions are near orthogonal and even a naive probe barely
# interferes with itself.
raw = gen_gaussian_mixture(10, 32, per_class=300, separation=7.0, seed=3)
rng = np.random.Generator(np.random.PCG64(9))
shared = rng.standard_normal(32)
shared *= 14.0 / np.linalg.norm(shared)
triple = tuple(EmbeddingBatch(b.vectors + shared, b.labels) for b in raw)
manifest = make_cil_manifest(triple, 5, work)
print("manifest hash:", manifest.content_hash())

seeds = (0, 1, 2)
probe_config = RunConfig(hyper=ProbeHyper(lr=0.01))
for method in ("proposed", "ncm", "lp_online"):
    config = {"proposed": RunConfig(q_dim=128),
              "ncm": None,
              "lp_online": probe_config}[method]
    records = run_protocol(manifest, method, run_seeds=seeds, config=config,
                           jobs=3)
    agg = aggregate_runs(records)
    final = agg["final"]
    print(f"{method:>10}:  AA_T = {final['aa_mean']:.4f} "
          f"+/- {final['aa_std']:.4f}   FR_T = {final['fr_mean']:.4f} "
          f"+/- {final['fr_std']:.4f}")

# Stage-by-stage view for the closed-form method: accuracy stays flat
# because earlier classes keep their statistics.
records = run_protocol(manifest, "proposed", run_seeds=(0,),
                       config=RunConfig(q_dim=128))
rec = records[0]
print("\nper-stage AA for seed 0:",
      " ".join(f"{a:.3f}" for a in rec.aa_curve()))
print("task order seed 0:", rec.task_order)
print("lambda picked per stage:", [l[0] for l in rec.lambdas])
