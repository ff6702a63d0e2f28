"""Shared oracles and fixture builders for the test suite.

The oracles deliberately use a different computation route than the
library (explicit loops, Gauss-Jordan elimination, dense normal
equations) so agreement is evidence, not tautology.
"""

import numpy as np

from streamproto import EmbeddingBatch


def matmul_loops(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Triple-loop matrix product; slow on purpose."""
    n, k = a.shape
    k2, m = b.shape
    assert k == k2
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for t in range(k):
                acc += a[i, t] * b[t, j]
            out[i, j] = acc
    return out


def gauss_jordan_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a @ x = b by Gauss-Jordan elimination with partial pivoting."""
    a = np.array(a, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    n = a.shape[0]
    aug = np.hstack([a, b.reshape(n, -1)])
    for col in range(n):
        pivot = col + int(np.argmax(np.abs(aug[col:, col])))
        if abs(aug[pivot, col]) < 1e-300:
            raise ZeroDivisionError("singular matrix in oracle solver")
        aug[[col, pivot]] = aug[[pivot, col]]
        aug[col] /= aug[col, col]
        for row in range(n):
            if row != col:
                aug[row] -= aug[row, col] * aug[col]
    return aug[:, n:].reshape(b.shape)


def dense_ridge(features: np.ndarray, labels: np.ndarray, n_classes: int,
                lam: float) -> np.ndarray:
    """Batch normal-equations ridge fit on one-hot targets."""
    v = np.asarray(features, dtype=np.float64)
    y = np.zeros((v.shape[0], n_classes))
    y[np.arange(v.shape[0]), labels] = 1.0
    return gauss_jordan_solve(v.T @ v + lam * np.eye(v.shape[1]), v.T @ y)


def brute_average_accuracy(table: np.ndarray, stage: int) -> float:
    """Direct re-statement of the row-mean definition."""
    total = 0.0
    for j in range(1, stage + 1):
        total += table[stage - 1, j - 1]
    return total / stage


def brute_average_forgetting(table: np.ndarray, stage: int) -> float:
    """Double-loop re-statement of the max-drop definition."""
    total = 0.0
    for j in range(1, stage):
        best = -np.inf
        for t_hat in range(j, stage):
            best = max(best, table[t_hat - 1, j - 1])
        total += best - table[stage - 1, j - 1]
    return total / (stage - 1)


def pairwise_cosine(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-pair cosine similarity with explicit loops; -inf on zero norms."""
    out = np.full((a.shape[0], b.shape[0]), -np.inf)
    for i in range(a.shape[0]):
        na = np.sqrt(np.sum(a[i] ** 2))
        for j in range(b.shape[0]):
            nb = np.sqrt(np.sum(b[j] ** 2))
            if na > 0 and nb > 0:
                out[i, j] = float(a[i] @ b[j]) / (na * nb)
    return out


def random_dataset(n: int, dim: int, n_classes: int, seed: int):
    """Unstructured vectors with uniform labels, as a (vectors, labels) pair."""
    rng = np.random.Generator(np.random.PCG64(seed))
    return (rng.standard_normal((n, dim)),
            rng.integers(0, n_classes, size=n))


# --- acceptance fixtures ----------------------------------------------------
#
# Both builders add structure the plain generators deliberately leave out:
# a shared positive component (real embedding batches have one; without it
# a low-lr probe's new-task gradients are nearly orthogonal to old-task
# features and forgetting never shows), and a small linear margin on top
# of the XOR arms (pure XOR has zero label-feature correlation, so every
# least-squares linear model collapses to chance and there would be no
# room for an ordering between the two linear ablations).


def offset_class_triple(n_classes: int, dim: int, per_class: int,
                        separation: float, offset_norm: float, seed: int):
    """Class blobs at separation * u_y plus one shared offset vector."""
    rng = np.random.Generator(np.random.PCG64(seed))
    q, _ = np.linalg.qr(rng.standard_normal((dim, n_classes + 1)))
    centers = separation * q.T[:n_classes]
    offset = offset_norm * q.T[n_classes]
    out = []
    for size in (per_class, max(1, per_class // 3), max(1, per_class // 3)):
        vecs, labs = [], []
        for cls in range(n_classes):
            vecs.append(centers[cls] + offset + rng.standard_normal((size, dim)))
            labs.append(np.full(size, cls, dtype=np.int64))
        v = np.concatenate(vecs)
        l = np.concatenate(labs)
        perm = rng.permutation(len(l))
        out.append(EmbeddingBatch(v[perm], l[perm]))
    return tuple(out)


def nudged_xor_triple(dim: int, per_class: int, seed: int,
                      arm: float = 6.0, delta: float = 1.1):
    """XOR quadrant clusters plus a class-mean margin of ``delta`` along a
    third orthonormal direction, unit isotropic noise everywhere."""
    rng = np.random.Generator(np.random.PCG64(seed))
    q, _ = np.linalg.qr(rng.standard_normal((dim, 3)))
    u, v, w = q.T[0], q.T[1], q.T[2]
    corners = {0: (arm * (u + v), -arm * (u + v)),
               1: (arm * (u - v), arm * (v - u))}
    nudges = {0: -0.5 * delta * w, 1: 0.5 * delta * w}
    out = []
    for size in (per_class, max(1, per_class // 3), max(1, per_class // 3)):
        vecs, labs = [], []
        for cls, (a, b) in corners.items():
            n_a = size - size // 2
            n_b = size // 2
            vecs.append(nudges[cls] + a + rng.standard_normal((n_a, dim)))
            vecs.append(nudges[cls] + b + rng.standard_normal((n_b, dim)))
            labs.append(np.full(n_a + n_b, cls, dtype=np.int64))
        vv = np.concatenate(vecs)
        ll = np.concatenate(labs)
        perm = rng.permutation(len(ll))
        out.append(EmbeddingBatch(vv[perm], ll[perm]))
    return tuple(out)
