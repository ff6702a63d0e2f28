"""Streaming sufficient statistics for the ridge-decorrelated prototype head.

One pass over each task's projected features maintains two accumulators:
the Q x Q Gram matrix (sum of feature outer products) and the Q x C
prototype matrix (per-class unnormalized feature sums). Both are plain
sums, so partial statistics built in parallel merge exactly and the result
is invariant to sample order up to float addition error.
"""

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

STATS_MAGIC = b"STA1"
STATS_VERSION = 1
_HEADER = "<4sIII"  # magic, version, q_dim, class_count
_HEADER_SIZE = struct.calcsize(_HEADER)


class StatsError(ValueError):
    """Raised for dimension mismatches and malformed snapshots."""


@dataclass
class SufficientStats:
    """Gram matrix, prototype columns, and per-class sample counters.

    ``gram`` is kept exactly symmetric: updates write the upper triangle
    and mirror it. All storage is float64; counters are int64.
    """

    gram: np.ndarray
    prototypes: np.ndarray
    class_counts: np.ndarray

    @property
    def q_dim(self) -> int:
        return self.gram.shape[0]

    @property
    def class_count(self) -> int:
        return self.prototypes.shape[1]

    @property
    def total_seen(self) -> int:
        return int(self.class_counts.sum())

    def copy(self) -> "SufficientStats":
        return SufficientStats(
            self.gram.copy(), self.prototypes.copy(), self.class_counts.copy()
        )


def stats_new(q_dim: int, class_count: int) -> SufficientStats:
    """All-zero statistics for the given feature width and class count."""
    if q_dim < 1 or class_count < 1:
        raise StatsError(f"dims must be >= 1, got Q={q_dim}, C={class_count}")
    return SufficientStats(
        np.zeros((q_dim, q_dim)),
        np.zeros((q_dim, class_count)),
        np.zeros(class_count, dtype=np.int64),
    )


def _mirror_symmetric(m: np.ndarray) -> np.ndarray:
    # Keep symmetry bit-exact regardless of how BLAS ordered the products.
    upper = np.triu(m)
    return upper + np.triu(m, 1).T


def stats_update(s: SufficientStats, features: np.ndarray,
                 labels: np.ndarray) -> SufficientStats:
    """Fold a block of projected samples into the statistics, in place.

    Adds ``features.T @ features`` to the Gram matrix and each feature row
    to its label's prototype column (equivalently ``features.T @ onehot``).
    Validates before mutating, so a rejected call leaves ``s`` unchanged.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.ndim != 2 or features.shape[1] != s.q_dim:
        raise StatsError(
            f"feature width {features.shape[-1] if features.ndim == 2 else '?'} "
            f"does not match Q={s.q_dim}"
        )
    if labels.shape != (features.shape[0],):
        raise StatsError("labels must be one per feature row")
    if labels.size:
        if labels.min() < 0 or labels.max() >= s.class_count:
            raise StatsError(
                f"labels must lie in [0, {s.class_count}), "
                f"got range [{labels.min()}, {labels.max()}]"
            )
    if not features.size:
        return s

    s.gram += _mirror_symmetric(features.T @ features)
    onehot = np.zeros((features.shape[0], s.class_count))
    onehot[np.arange(features.shape[0]), labels] = 1.0
    s.prototypes += features.T @ onehot
    s.class_counts += np.bincount(labels, minlength=s.class_count)
    return s


def stats_merge(a: SufficientStats, b: SufficientStats) -> SufficientStats:
    """Elementwise sum of two statistics; inputs are left untouched."""
    if a.q_dim != b.q_dim or a.class_count != b.class_count:
        raise StatsError(
            f"cannot merge stats of shape (Q={a.q_dim}, C={a.class_count}) "
            f"and (Q={b.q_dim}, C={b.class_count})"
        )
    return SufficientStats(
        a.gram + b.gram,
        a.prototypes + b.prototypes,
        a.class_counts + b.class_counts,
    )


def stats_snapshot(s: SufficientStats) -> bytes:
    """Lossless little-endian serialization: 16-byte header, then row-major
    float64 Gram, float64 prototypes, and int64 counters."""
    header = struct.pack(_HEADER, STATS_MAGIC, STATS_VERSION, s.q_dim, s.class_count)
    return b"".join((
        header,
        np.ascontiguousarray(s.gram, dtype="<f8").tobytes(),
        np.ascontiguousarray(s.prototypes, dtype="<f8").tobytes(),
        np.ascontiguousarray(s.class_counts, dtype="<i8").tobytes(),
    ))


def stats_restore(data: bytes) -> SufficientStats:
    """Inverse of ``stats_snapshot``; round-trips bitwise."""
    if len(data) < _HEADER_SIZE:
        raise StatsError("snapshot shorter than its header")
    magic, version, q_dim, class_count = struct.unpack_from(_HEADER, data)
    if magic != STATS_MAGIC:
        raise StatsError(f"bad snapshot magic {magic!r}")
    if version != STATS_VERSION:
        raise StatsError(f"unsupported snapshot version {version}")
    if q_dim < 1 or class_count < 1:
        raise StatsError("snapshot header declares zero dims")
    g_bytes = 8 * q_dim * q_dim
    k_bytes = 8 * q_dim * class_count
    c_bytes = 8 * class_count
    expected = _HEADER_SIZE + g_bytes + k_bytes + c_bytes
    if len(data) != expected:
        raise StatsError(f"snapshot is {len(data)} bytes, expected {expected}")
    off = _HEADER_SIZE
    gram = np.frombuffer(data, "<f8", q_dim * q_dim, off).reshape(q_dim, q_dim)
    off += g_bytes
    protos = np.frombuffer(data, "<f8", q_dim * class_count, off)
    protos = protos.reshape(q_dim, class_count)
    off += k_bytes
    counts = np.frombuffer(data, "<i8", class_count, off)
    return SufficientStats(gram.copy(), protos.copy(), counts.copy())


def stats_fingerprint(s: SufficientStats) -> str:
    """Short content hash identifying the statistics a head was solved from."""
    return hashlib.sha256(stats_snapshot(s)).hexdigest()[:16]
