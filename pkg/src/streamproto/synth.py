"""Synthetic labeled-embedding generators with controllable geometry.

Everything here is a pure function of (config, seed) and emits the same
formats as real extracted data, so the whole benchmark harness can run at
desk scale with no audio involved. Class difficulty is controlled by a
single separation knob against unit isotropic Gaussian noise.
"""

from pathlib import Path

import numpy as np

from .formats import (
    DEFAULT_RUN_SEEDS,
    EmbeddingBatch,
    ProtocolManifest,
    SplitPaths,
    TaskSpec,
    load_manifest,
    save_manifest,
    write_batch,
)

# XOR cluster arms sit at (+-XOR_ARM, +-XOR_ARM) in a random 2-D plane.
XOR_ARM = 4.0


def _split_sizes(per_class: int):
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    side = max(1, per_class // 3)
    return per_class, side, side


def _orthonormal_directions(dim: int, count: int,
                            rng: np.random.Generator) -> np.ndarray:
    """(count, dim) rows forming an orthonormal set."""
    if dim < count:
        raise ValueError(f"need dim >= {count} for orthonormal centers, got {dim}")
    q, _ = np.linalg.qr(rng.standard_normal((dim, count)))
    return q.T[:count]


def _assemble(parts_vectors, parts_labels, rng: np.random.Generator) -> EmbeddingBatch:
    vectors = np.concatenate(parts_vectors)
    labels = np.concatenate(parts_labels)
    order = rng.permutation(len(labels))
    return EmbeddingBatch(vectors[order], labels[order])


def gen_gaussian_mixture(n_classes: int, dim: int, per_class: int,
                         separation: float, seed: int):
    """Isotropic Gaussian blobs at ``separation`` times orthonormal
    directions.

    Returns a disjoint (train, val, test) triple; the train split has
    ``per_class`` samples per class, the others a third of that each.
    """
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    if dim < 2:
        raise ValueError("need dim >= 2")
    rng = np.random.Generator(np.random.PCG64(seed))
    centers = separation * _orthonormal_directions(dim, n_classes, rng)

    batches = []
    for size in _split_sizes(per_class):
        vecs, labs = [], []
        for cls in range(n_classes):
            vecs.append(centers[cls] + rng.standard_normal((size, dim)))
            labs.append(np.full(size, cls, dtype=np.int64))
        batches.append(_assemble(vecs, labs, rng))
    return tuple(batches)


def gen_xor_mixture(dim: int, per_class: int, seed: int):
    """Two-class XOR layout in a random 2-D plane embedded in ``dim`` dims.

    Class 0 occupies the (+,+) and (-,-) quadrant clusters, class 1 the
    other two, so no linear separator beats ~75% by construction. Noise is
    unit isotropic in the full space.
    """
    if dim < 2:
        raise ValueError("XOR layout needs dim >= 2")
    rng = np.random.Generator(np.random.PCG64(seed))
    plane = _orthonormal_directions(dim, 2, rng)
    corners = {
        0: (XOR_ARM * (plane[0] + plane[1]), XOR_ARM * (-plane[0] - plane[1])),
        1: (XOR_ARM * (plane[0] - plane[1]), XOR_ARM * (-plane[0] + plane[1])),
    }

    batches = []
    for size in _split_sizes(per_class):
        vecs, labs = [], []
        for cls, (a, b) in corners.items():
            n_a = size - size // 2
            n_b = size // 2
            vecs.append(a + rng.standard_normal((n_a, dim)))
            vecs.append(b + rng.standard_normal((n_b, dim)))
            labs.append(np.full(n_a + n_b, cls, dtype=np.int64))
        batches.append(_assemble(vecs, labs, rng))
    return tuple(batches)


def gen_domain_shifted(n_classes: int, dim: int, n_domains: int, shift: float,
                       seed: int, out_dir, per_class: int = 60,
                       separation: float = 6.0,
                       run_seeds=DEFAULT_RUN_SEEDS) -> ProtocolManifest:
    """Write a full DIL fixture: same class geometry in every domain, each
    domain offset by its own random direction of norm ``shift``.

    Emits one EMB1 triple per domain plus the manifest, and returns the
    validated manifest.
    """
    if n_domains < 2:
        raise ValueError("DIL needs at least 2 domains")
    rng = np.random.Generator(np.random.PCG64(seed))
    centers = separation * _orthonormal_directions(dim, n_classes, rng)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = []
    for d in range(n_domains):
        offset = rng.standard_normal(dim)
        norm = np.linalg.norm(offset)
        offset = shift * offset / norm if norm > 0 else offset * 0.0
        paths = {}
        for role, size in zip(("train", "val", "test"), _split_sizes(per_class)):
            vecs, labs = [], []
            for cls in range(n_classes):
                vecs.append(centers[cls] + offset
                            + rng.standard_normal((size, dim)))
                labs.append(np.full(size, cls, dtype=np.int64))
            batch = _assemble(vecs, labs, rng)
            path = out_dir / f"domain{d + 1}.{role}.emb"
            write_batch(batch, path, class_count_hint=n_classes)
            paths[role] = path
        tasks.append(TaskSpec(d + 1, [SplitPaths(**paths)],
                              domain_tag=f"domain{d + 1}"))

    manifest = ProtocolManifest(
        protocol="DIL", total_classes=n_classes, embedding_dim=dim,
        tasks=tasks, run_seeds=tuple(run_seeds),
    )
    save_manifest(manifest, out_dir / "manifest.json")
    return load_manifest(out_dir / "manifest.json")


def make_cil_manifest(triple, n_tasks: int, out_dir,
                      run_seeds=DEFAULT_RUN_SEEDS) -> ProtocolManifest:
    """Partition a (train, val, test) triple into a CIL manifest.

    Classes are split into ``n_tasks`` contiguous, nearly equal disjoint
    subsets (the per-run class-to-task reassignment happens later, in the
    harness). Writes per-task EMB1 files plus ``manifest.json``.
    """
    train, _, _ = triple
    n_classes = int(max(b.labels.max() for b in triple)) + 1
    if n_tasks < 2 or n_tasks > n_classes:
        raise ValueError(f"need 2 <= n_tasks <= {n_classes}, got {n_tasks}")

    bounds = np.linspace(0, n_classes, n_tasks + 1).astype(int)
    subsets = [tuple(range(bounds[i], bounds[i + 1])) for i in range(n_tasks)]

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = []
    for t, subset in enumerate(subsets, start=1):
        paths = {}
        for role, batch in zip(("train", "val", "test"), triple):
            mask = np.isin(batch.labels, subset)
            path = out_dir / f"task{t}.{role}.emb"
            write_batch(batch.subset(mask), path, class_count_hint=n_classes)
            paths[role] = path
        tasks.append(TaskSpec(t, [SplitPaths(**paths)], class_subset=subset))

    manifest = ProtocolManifest(
        protocol="CIL", total_classes=n_classes, embedding_dim=train.dim,
        tasks=tasks, run_seeds=tuple(run_seeds),
    )
    save_manifest(manifest, out_dir / "manifest.json")
    return load_manifest(out_dir / "manifest.json")


def make_dil_manifest(triple, n_tasks: int, out_dir,
                      run_seeds=DEFAULT_RUN_SEEDS) -> ProtocolManifest:
    """Partition a triple into ``n_tasks`` DIL tasks covering every class.

    Within each class, sample indices are dealt round-robin across tasks,
    so every task keeps the full class set (needed for the XOR ablation
    fixture, where the domains are just equal shares of one distribution).
    """
    train, _, _ = triple
    n_classes = int(max(b.labels.max() for b in triple)) + 1
    if n_tasks < 2:
        raise ValueError("DIL needs at least 2 tasks")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = []
    for t in range(1, n_tasks + 1):
        paths = {}
        for role, batch in zip(("train", "val", "test"), triple):
            picks = []
            for cls in range(n_classes):
                idx = np.flatnonzero(batch.labels == cls)
                picks.append(idx[(t - 1) % n_tasks::n_tasks])
            index = np.sort(np.concatenate(picks))
            if any(p.size == 0 for p in picks):
                raise ValueError(
                    f"task {t} would miss a class; reduce n_tasks or add samples"
                )
            path = out_dir / f"part{t}.{role}.emb"
            write_batch(batch.subset(index), path, class_count_hint=n_classes)
            paths[role] = path
        tasks.append(TaskSpec(t, [SplitPaths(**paths)], domain_tag=f"part{t}"))

    manifest = ProtocolManifest(
        protocol="DIL", total_classes=n_classes, embedding_dim=train.dim,
        tasks=tasks, run_seeds=tuple(run_seeds),
    )
    save_manifest(manifest, out_dir / "manifest.json")
    return load_manifest(out_dir / "manifest.json")
