#!/usr/bin/env python3
"""Store labeled embedding vectors in the binary container and describe a
two-task benchmark with a manifest file."""

import tempfile
from pathlib import Path

import numpy as np

from streamproto import (EmbeddingBatch, ProtocolManifest, SplitPaths,
                         TaskSpec, load_manifest, read_batch, save_manifest,
                         write_batch)

work = Path(tempfile.mkdtemp(prefix="container_demo_"))
rng = np.random.Generator(np.random.PCG64(0))

# Four classes, 32-dim vectors. The container holds float32 records, one
# u32 label per vector, plus a header carrying dim / count / class hint.
for task, classes in enumerate([(0, 1), (2, 3)]):
    for role in ("train", "val", "test"):
        n = 40 if role == "train" else 12
        labels = rng.choice(classes, size=n)
        vectors = rng.standard_normal((n, 32)) + 3.0 * labels[:, None]
        batch = EmbeddingBatch(vectors, labels)
        write_batch(batch, work / f"task{task}.{role}.emb", class_count_hint=4)

back = read_batch(work / "task0.train.emb")
print("round trip:", back.vectors.shape, back.vectors.dtype,
      "labels", sorted(set(back.labels.tolist())))

# file size is fully determined by the header: 16 + n * (4 + 4 * dim)
size = (work / "task0.train.emb").stat().st_size
print("file bytes:", size, "=", 16 + 40 * (4 + 4 * 32))

tasks = [
    TaskSpec(task_id=t + 1, class_subset=(2 * t, 2 * t + 1),
             splits=[SplitPaths(train=f"task{t}.train.emb",
                                val=f"task{t}.val.emb",
                                test=f"task{t}.test.emb")])
    for t in range(2)
]
manifest = ProtocolManifest(protocol="CIL", total_classes=4,
                            embedding_dim=32, tasks=tasks)
save_manifest(manifest, work / "manifest.json")

loaded = load_manifest(work / "manifest.json")  # validates every file
print("manifest:", loaded.protocol, "tasks:", len(loaded.tasks),
      "hash:", loaded.content_hash())
