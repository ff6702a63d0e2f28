"""Frozen random feature expansion.

A projection is generated once per experiment from a seed, kept frozen
across all incremental stages, and maps H-dim embeddings to Q-dim
nonlinear features: ``v = relu(f @ W)`` (or the identity variant used by
ablations). Weights are drawn i.i.d. standard normal from numpy's PCG64
generator, so a (seed, H, Q) triple regenerates them bit-identically.
"""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .formats import EmbeddingBatch, FormatError

RELU = "relu"
IDENTITY = "identity"
NONLINEARITIES = (RELU, IDENTITY)

PRJ_MAGIC = b"PRJ1"


@dataclass
class ProjectionMatrix:
    """Frozen H x Q random weights plus the nonlinearity applied after them.

    ``generated`` is True when the weights came from ``make_projection`` and
    are therefore regenerable from the seed alone; hand-built matrices (the
    identity test hook) cannot be checkpointed.
    """

    in_dim: int
    out_dim: int
    seed: int
    nonlinearity: str
    weights: np.ndarray
    generated: bool = True

    def __post_init__(self):
        if self.nonlinearity not in NONLINEARITIES:
            raise ValueError(f"unknown nonlinearity {self.nonlinearity!r}")
        if self.weights.shape != (self.in_dim, self.out_dim):
            raise ValueError(
                f"weights shape {self.weights.shape} != ({self.in_dim}, {self.out_dim})"
            )


@dataclass
class FeatureBatch:
    """N projected feature rows of width Q with their labels."""

    features: np.ndarray
    labels: np.ndarray

    @property
    def count(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def make_projection(in_dim: int, out_dim: int, seed: int,
                    nonlinearity: str = RELU) -> ProjectionMatrix:
    """Generate the frozen projection for this experiment.

    Entries are i.i.d. N(0, 1) from ``np.random.Generator(PCG64(seed))``;
    the same (in_dim, out_dim, seed) always reproduces the same matrix.
    """
    if in_dim < 1 or out_dim < 1:
        raise ValueError(f"projection dims must be >= 1, got {in_dim}x{out_dim}")
    rng = np.random.Generator(np.random.PCG64(seed))
    weights = rng.standard_normal((in_dim, out_dim))
    return ProjectionMatrix(in_dim, out_dim, seed, nonlinearity, weights)


def identity_projection(dim: int, nonlinearity: str = IDENTITY) -> ProjectionMatrix:
    """Square identity-weight projection (ablation and test hook)."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return ProjectionMatrix(dim, dim, 0, nonlinearity, np.eye(dim), generated=False)


def apply_nonlinearity(values: np.ndarray, nonlinearity: str) -> np.ndarray:
    if nonlinearity == RELU:
        return np.maximum(values, 0.0)
    if nonlinearity == IDENTITY:
        return values
    raise ValueError(f"unknown nonlinearity {nonlinearity!r}")


def project(p: ProjectionMatrix, batch: EmbeddingBatch) -> FeatureBatch:
    """Map a batch of embeddings through the frozen projection."""
    if batch.dim != p.in_dim:
        raise FormatError(
            f"batch width {batch.dim} does not match projection input {p.in_dim}"
        )
    return FeatureBatch(
        apply_nonlinearity(batch.vectors @ p.weights, p.nonlinearity),
        batch.labels,
    )


def project_vectors(p: ProjectionMatrix, vectors: np.ndarray) -> np.ndarray:
    """Project a bare (N, H) array; used when labels travel separately."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.shape[1] != p.in_dim:
        raise FormatError(
            f"vector width {vectors.shape[1]} does not match projection input {p.in_dim}"
        )
    return apply_nonlinearity(vectors @ p.weights, p.nonlinearity)


def save_projection(p: ProjectionMatrix, path) -> None:
    """Checkpoint a projection as seed + dims + nonlinearity (weights are
    regenerable, so they are not stored)."""
    if not p.generated:
        raise ValueError("only seed-generated projections can be checkpointed")
    tag = NONLINEARITIES.index(p.nonlinearity)
    Path(path).write_bytes(
        PRJ_MAGIC + struct.pack("<IIQB", p.in_dim, p.out_dim, p.seed, tag)
    )


def load_projection(path) -> ProjectionMatrix:
    """Regenerate a projection from its checkpoint."""
    raw = Path(path).read_bytes()
    if len(raw) != 4 + struct.calcsize("<IIQB") or raw[:4] != PRJ_MAGIC:
        raise FormatError(f"{path}: not a PRJ1 checkpoint")
    in_dim, out_dim, seed, tag = struct.unpack("<IIQB", raw[4:])
    if tag >= len(NONLINEARITIES):
        raise FormatError(f"{path}: unknown nonlinearity tag {tag}")
    return make_projection(in_dim, out_dim, seed, NONLINEARITIES[tag])
