#!/usr/bin/env python3
# The core trick in one file: expand embeddings through a frozen random
# matrix with a ReLU, keep only two running matrices while data streams
# past, and recover the exact batch ridge solution from them at any time.

import numpy as np

from streamproto import (make_projection, predict, solve_head, stats_new,
                         stats_update)

H, Q, C, N = 24, 96, 6, 600
rng = np.random.Generator(np.random.PCG64(42))
labels = rng.integers(0, C, size=N)
vectors = rng.standard_normal((N, H))
vectors[np.arange(N), labels] += 4.0  # one bumped coordinate per class

proj = make_projection(H, Q, seed=7)          # frozen, regenerable from seed
feats = np.maximum(vectors @ proj.weights, 0)  # the only nonlinearity

# Stream in ragged chunks. Memory cost is Q*Q + Q*C regardless of N.
stats = stats_new(Q, C)
i = 0
while i < N:
    step = int(rng.integers(5, 50))
    stats_update(stats, feats[i:i + step], labels[i:i + step])
    i += step

head = solve_head(stats, lam=1e-2)

# Same solve from all data at once
dense = stats_new(Q, C)
stats_update(dense, feats, labels)
batch_head = solve_head(dense, lam=1e-2)

gap = np.linalg.norm(head.weights - batch_head.weights)
gap /= np.linalg.norm(batch_head.weights)
print(f"streamed vs batch weights, relative gap: {gap:.2e}")

scores, pred = predict(head, feats)
print(f"train accuracy: {(pred == labels).mean():.3f}")
print(f"solver residual bound check: {head.residual:.2e}")

# Order never matters: the running sums are permutation invariant.
perm = rng.permutation(N)
shuffled = stats_new(Q, C)
stats_update(shuffled, feats[perm], labels[perm])
other = solve_head(shuffled, lam=1e-2)
gap = np.linalg.norm(head.weights - other.weights)
print(f"after shuffling the stream: gap {gap:.2e}")
