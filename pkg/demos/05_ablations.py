#!/usr/bin/env python3
# Why the random expansion and the ReLU are both load-bearing. On an
# XOR-style layout no linear map of the raw coordinates can separate the
# classes, so the no-projection and no-relu variants stall while the full
# pipeline solves it. Width helps monotonically once the lift is in place.

import tempfile
from pathlib import Path

from streamproto import (RunConfig, gen_xor_mixture, make_dil_manifest,
                         run_ablation)

work = Path(tempfile.mkdtemp(prefix="ablation_demo_"))
triple = gen_xor_mixture(dim=32, per_class=400, seed=5)
manifest = make_dil_manifest(triple, 2, work)

print("variant comparison (final average accuracy over 5 seeds)")
for variant in ("full", "projection_no_relu", "no_projection"):
    out = run_ablation(manifest, variant, config=RunConfig(q_dim=64), jobs=5)
    row = out["rows"][0]
    print(f"  {variant:>18}: AA_T = {row['final_aa_mean']:.4f} "
          f"+/- {row['final_aa_std']:.4f}  "
          f"(trainable params {row['trainable_params']})")

print("\nwidth sweep, full pipeline")
out = run_ablation(manifest, "q_sweep", q_list=[16, 64, 256], jobs=5)
for row in out["rows"]:
    print(f"  Q={row['q_dim']:>4}: AA_T = {row['final_aa_mean']:.4f} "
          f"+/- {row['final_aa_std']:.4f}")
