"""Ridge-decorrelated class prototypes.

The classifier head solves ``(G + lam*I) @ W = K`` for the accumulated
Gram matrix G and prototype matrix K, turning correlated per-class feature
sums into decorrelated prototype weights. The regularizer is picked per
task by an 80/20 holdout search over a fixed log-spaced grid; the winning
statistics then absorb the full task and the head is re-solved once.

The system matrix is symmetric positive definite for any lam > 0, so the
solve goes through an unpivoted Cholesky factorization (LAPACK dpotrf);
a failed pivot is reported as a conditioning problem rather than silently
re-regularized.
"""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import lapack

from .accumulator import SufficientStats, stats_fingerprint, stats_update
from .formats import EmbeddingBatch, FormatError
from .projector import FeatureBatch, ProjectionMatrix, project

# 17 grid points, 1e-8 through 1e+8.
LAMBDA_GRID = tuple(float(10.0 ** k) for k in range(-8, 9))

RESIDUAL_BOUND = 1e-8

HEAD_MAGIC = b"WOH1"


class ConditioningError(ArithmeticError):
    """The accumulated system is numerically unsound at the requested
    regularizer: either a Cholesky pivot failed (``pivot`` names it) or the
    solve residual exceeded its bound (``pivot`` is None)."""

    def __init__(self, pivot: int | None, lam: float):
        self.pivot = pivot
        self.lam = lam
        if pivot is None:
            msg = (f"solve residual exceeded {RESIDUAL_BOUND:g} with "
                   f"lambda={lam:g}")
        else:
            msg = (f"factorization failed at pivot {pivot} with lambda={lam:g}; "
                   "the regularizer is too small for the accumulated conditioning")
        super().__init__(msg)


@dataclass
class RidgeHead:
    """Decorrelated prototype weights with their provenance.

    ``residual`` is the relative solve residual
    ``||(G+lam*I) @ W - K||_F / max(1, ||K||_F)``, checked against 1e-8 at
    construction; ``stats_fingerprint`` names the statistics solved from.
    """

    weights: np.ndarray
    lam: float
    stats_fingerprint: str
    residual: float

    @property
    def q_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def class_count(self) -> int:
        return self.weights.shape[1]


def solve_head(s: SufficientStats, lam: float) -> RidgeHead:
    """Solve ``(G + lam*I) @ W = K`` by Cholesky factorization.

    Never forms an explicit inverse. Raises ConditioningError with the
    failing pivot index when the factorization breaks down, and verifies
    the 1e-8 relative residual bound on the returned head.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    system = s.gram + lam * np.eye(s.q_dim)
    chol, info = lapack.dpotrf(system, lower=1, overwrite_a=1)
    if info > 0:
        raise ConditioningError(pivot=int(info), lam=lam)
    if info < 0:
        raise ValueError(f"illegal value in factorization argument {-info}")
    weights, info = lapack.dpotrs(chol, s.prototypes, lower=1)
    if info != 0:
        raise ValueError(f"triangular solve failed with info={info}")

    residual = _relative_residual(s, lam, weights)
    if residual > RESIDUAL_BOUND:
        raise ConditioningError(pivot=None, lam=lam)
    return RidgeHead(weights, float(lam), stats_fingerprint(s), residual)


def _relative_residual(s: SufficientStats, lam: float, weights: np.ndarray) -> float:
    lhs = s.gram @ weights + lam * weights
    denom = max(1.0, float(np.linalg.norm(s.prototypes)))
    return float(np.linalg.norm(lhs - s.prototypes) / denom)


def predict(head: RidgeHead, features: np.ndarray):
    """Score features against the head: ``scores = V @ W``.

    Returns (scores, labels); the label is the row-wise argmax with ties
    broken toward the smallest class index.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != head.q_dim:
        raise FormatError(
            f"feature width {features.shape[-1] if features.ndim == 2 else '?'} "
            f"does not match head Q={head.q_dim}"
        )
    scores = features @ head.weights
    return scores, np.argmax(scores, axis=1).astype(np.int64)


def holdout_split(count: int, split_seed: int, labels: np.ndarray | None = None,
                  stratified: bool = False):
    """Deterministic 80/20 index split of ``count`` samples.

    The fit part gets floor(0.8 * count) samples (per class when
    ``stratified``); the remainder is the holdout.
    """
    rng = np.random.Generator(np.random.PCG64(split_seed))
    if not stratified:
        perm = rng.permutation(count)
        n_fit = int(0.8 * count)
        return perm[:n_fit], perm[n_fit:]
    if labels is None:
        raise ValueError("stratified split needs labels")
    fit_parts, hold_parts = [], []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(idx.size)]
        n_fit = int(0.8 * idx.size)
        fit_parts.append(idx[:n_fit])
        hold_parts.append(idx[n_fit:])
    return np.concatenate(fit_parts), np.concatenate(hold_parts)


def select_lambda(persistent: SufficientStats, features: np.ndarray,
                  labels: np.ndarray, split_seed: int,
                  grid=LAMBDA_GRID, stratified: bool = False):
    """Pick the regularizer for the current task by holdout search.

    Splits the task 80/20, folds the 80% into a candidate copy of the
    persistent statistics (one accumulation, reused for every grid point),
    solves per grid value, and scores mean squared error between one-hot
    targets and holdout predictions. Returns ``(lam, diagnostics)`` where
    the winner is the MSE argmin, ties broken toward the larger lambda.
    G and K do not depend on lambda, which is what makes the single shared
    accumulation exact.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = features.shape[0]
    if n < 5:
        raise ValueError(f"lambda search needs at least 5 samples, got {n}")
    if not grid:
        raise ValueError("lambda grid is empty")

    fit_idx, hold_idx = holdout_split(n, split_seed, labels, stratified)
    candidate = persistent.copy()
    stats_update(candidate, features[fit_idx], labels[fit_idx])

    hold_features = features[hold_idx]
    hold_targets = np.zeros((hold_idx.size, persistent.class_count))
    hold_targets[np.arange(hold_idx.size), labels[hold_idx]] = 1.0

    mses: list[float] = []
    best_lam, best_mse = None, np.inf
    for lam in grid:
        try:
            head = solve_head(candidate, lam)
        except ConditioningError:
            mses.append(float("nan"))
            continue
        scores, _ = predict(head, hold_features)
        mse = float(np.mean((hold_targets - scores) ** 2))
        mses.append(mse)
        if mse <= best_mse:  # ascending grid, so <= keeps the largest tied lam
            best_lam, best_mse = lam, mse
    if best_lam is None:
        raise ConditioningError(pivot=None, lam=float(min(grid)))

    diagnostics = {
        "grid": [float(g) for g in grid],
        "mse": mses,
        "chosen": float(best_lam),
        "split_seed": int(split_seed),
        "n_fit": int(fit_idx.size),
        "n_holdout": int(hold_idx.size),
        "stratified": bool(stratified),
    }
    return float(best_lam), diagnostics


def learn_task(persistent: SufficientStats, projection: ProjectionMatrix,
               task: EmbeddingBatch, split_seed: int,
               lambda_fixed: float | None = None, grid=LAMBDA_GRID,
               stratified: bool = False):
    """One full incremental stage: a single forward pass over the task.

    Projects each sample exactly once, runs the holdout lambda search on
    the already-projected features (skipped when ``lambda_fixed`` is
    given), folds 100% of the task into the persistent statistics, and
    re-solves the head at the chosen lambda. Returns ``(stats, head)``;
    a precondition failure leaves the persistent statistics unchanged.
    """
    if task.count == 0:
        raise ValueError("cannot learn from an empty task")
    feat: FeatureBatch = project(projection, task)
    if lambda_fixed is not None:
        if not lambda_fixed > 0:
            raise ValueError(f"lambda must be > 0, got {lambda_fixed}")
        lam = float(lambda_fixed)
    else:
        lam, _ = select_lambda(persistent, feat.features, feat.labels,
                               split_seed, grid, stratified)
    stats_update(persistent, feat.features, feat.labels)
    return persistent, solve_head(persistent, lam)


def save_head(head: RidgeHead, path) -> None:
    """Checkpoint: dims, lambda, stats fingerprint, row-major float64 weights."""
    fp = head.stats_fingerprint.encode("ascii")
    header = HEAD_MAGIC + struct.pack("<IIdH", head.q_dim, head.class_count,
                                      head.lam, len(fp))
    Path(path).write_bytes(
        header + fp + np.ascontiguousarray(head.weights, dtype="<f8").tobytes()
    )


def load_head(path) -> RidgeHead:
    raw = Path(path).read_bytes()
    fixed = 4 + struct.calcsize("<IIdH")
    if len(raw) < fixed or raw[:4] != HEAD_MAGIC:
        raise FormatError(f"{path}: not a WOH1 checkpoint")
    q_dim, class_count, lam, fp_len = struct.unpack_from("<IIdH", raw, 4)
    body = fixed + fp_len
    expected = body + 8 * q_dim * class_count
    if len(raw) != expected:
        raise FormatError(f"{path}: {len(raw)} bytes, expected {expected}")
    fp = raw[fixed:body].decode("ascii")
    weights = np.frombuffer(raw, "<f8", q_dim * class_count, body)
    head = RidgeHead(weights.reshape(q_dim, class_count).copy(), lam, fp,
                     residual=0.0)
    return head
