"""Comparison methods: nearest-class-mean prototypes and linear probes.

The NCM classifier keeps exact running class means over raw embeddings and
predicts by cosine similarity. The linear probes train a single H x C
softmax layer with a from-scratch Adam optimizer and cosine-annealed
learning rate, either online (exactly one epoch per task) or offline (up
to 100 epochs with early stopping on validation loss). Joint variants
retrain from scratch on the pooled history; they exist for completeness
and are flagged as violating the incremental protocol.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .formats import EmbeddingBatch, FormatError, concat_batches

MODE_ONLINE = "online_1_epoch"
MODE_OFFLINE = "offline_early_stop"

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class TrainingError(RuntimeError):
    """Raised when probe training hits a non-finite loss."""


# ---------------------------------------------------------------------------
# Nearest class mean


@dataclass
class NcmModel:
    """Per-class running means kept in exact sum/count form.

    A class with count 0 has an undefined prototype and is excluded from
    prediction.
    """

    feature_sums: np.ndarray  # (C, H)
    counts: np.ndarray        # (C,)

    @property
    def class_count(self) -> int:
        return self.feature_sums.shape[0]

    @property
    def dim(self) -> int:
        return self.feature_sums.shape[1]

    @property
    def seen_classes(self) -> np.ndarray:
        return np.flatnonzero(self.counts > 0)

    def prototypes(self) -> np.ndarray:
        """(C, H) class means; rows of unseen classes are NaN-flagged."""
        protos = np.full_like(self.feature_sums, np.nan)
        seen = self.counts > 0
        protos[seen] = self.feature_sums[seen] / self.counts[seen, None]
        return protos


def ncm_new(class_count: int, dim: int) -> NcmModel:
    if class_count < 1 or dim < 1:
        raise ValueError("class count and dim must be >= 1")
    return NcmModel(np.zeros((class_count, dim)),
                    np.zeros(class_count, dtype=np.int64))


def ncm_update(m: NcmModel, batch: EmbeddingBatch) -> NcmModel:
    """Fold a batch into the running means (exact: sums and counts)."""
    if batch.count == 0:
        return m
    if batch.dim != m.dim:
        raise FormatError(f"batch width {batch.dim} != model dim {m.dim}")
    batch.check_labels(m.class_count)
    onehot = np.zeros((batch.count, m.class_count))
    onehot[np.arange(batch.count), batch.labels] = 1.0
    m.feature_sums += onehot.T @ batch.vectors
    m.counts += np.bincount(batch.labels, minlength=m.class_count)
    return m


def ncm_predict(m: NcmModel, vectors: np.ndarray) -> np.ndarray:
    """Highest-cosine-similarity class over the classes seen so far.

    A zero-norm embedding or prototype makes that pair's similarity -inf;
    ties go to the smallest class index.
    """
    seen = m.seen_classes
    if seen.size == 0:
        raise ValueError("NCM has seen no classes yet")
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[1] != m.dim:
        raise FormatError("vector width does not match NCM dim")
    protos = m.feature_sums[seen] / m.counts[seen, None]
    p_norm = np.linalg.norm(protos, axis=1)
    v_norm = np.linalg.norm(vectors, axis=1)
    sims = vectors @ protos.T
    with np.errstate(divide="ignore", invalid="ignore"):
        sims = sims / (v_norm[:, None] * p_norm[None, :])
    sims[~np.isfinite(sims)] = -np.inf
    return seen[np.argmax(sims, axis=1)].astype(np.int64)


# ---------------------------------------------------------------------------
# Linear probe


@dataclass
class ProbeHyper:
    """Training hyperparameters; defaults follow the benchmark setup
    (batch 32, Adam at 1e-4, cosine annealing, 1 online epoch or up to 100
    offline epochs with patience-10 early stopping)."""

    lr: float = 1e-4
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 10


@dataclass
class LinearProbe:
    """Softmax linear classifier with its Adam moments and schedule state."""

    weights: np.ndarray  # (H, C)
    bias: np.ndarray     # (C,)
    m_w: np.ndarray = field(repr=False, default=None)
    v_w: np.ndarray = field(repr=False, default=None)
    m_b: np.ndarray = field(repr=False, default=None)
    v_b: np.ndarray = field(repr=False, default=None)
    step: int = 0
    base_lr: float = 0.0
    total_steps: int = 0

    def __post_init__(self):
        if self.m_w is None:
            self.reset_optimizer()

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    @property
    def class_count(self) -> int:
        return self.weights.shape[1]

    def reset_optimizer(self) -> None:
        self.m_w = np.zeros_like(self.weights)
        self.v_w = np.zeros_like(self.weights)
        self.m_b = np.zeros_like(self.bias)
        self.v_b = np.zeros_like(self.bias)
        self.step = 0

    def copy(self) -> "LinearProbe":
        return LinearProbe(self.weights.copy(), self.bias.copy(),
                           self.m_w.copy(), self.v_w.copy(),
                           self.m_b.copy(), self.v_b.copy(),
                           self.step, self.base_lr, self.total_steps)


def make_probe(dim: int, class_count: int, seed: int) -> LinearProbe:
    """Fresh probe; weights uniform in +-1/sqrt(H), zero bias.

    All C output units exist from the start, so incremental forgetting
    shows up as drift of previously useful weights.
    """
    if dim < 1 or class_count < 1:
        raise ValueError("dims must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    bound = 1.0 / math.sqrt(dim)
    return LinearProbe(rng.uniform(-bound, bound, (dim, class_count)),
                       np.zeros(class_count))


def probe_logits(p: LinearProbe, vectors: np.ndarray) -> np.ndarray:
    return vectors @ p.weights + p.bias


def probe_predict(p: LinearProbe, vectors: np.ndarray) -> np.ndarray:
    """Row-wise argmax; ties break toward the smallest class index."""
    return np.argmax(probe_logits(p, vectors), axis=1).astype(np.int64)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def cross_entropy_loss_grad(p: LinearProbe, vectors: np.ndarray,
                            labels: np.ndarray):
    """Mean softmax cross-entropy and its analytic gradients.

    Returns (loss, grad_weights, grad_bias); gradients are with respect to
    the probe's weights and bias.
    """
    n = vectors.shape[0]
    probs = softmax(probe_logits(p, vectors))
    picked = probs[np.arange(n), labels]
    loss = float(-np.mean(np.log(np.maximum(picked, 1e-300))))
    dlogits = probs
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    return loss, vectors.T @ dlogits, dlogits.sum(axis=0)


def cross_entropy_loss(p: LinearProbe, vectors: np.ndarray,
                       labels: np.ndarray) -> float:
    n = vectors.shape[0]
    probs = softmax(probe_logits(p, vectors))
    picked = probs[np.arange(n), labels]
    return float(-np.mean(np.log(np.maximum(picked, 1e-300))))


def cosine_lr(base_lr: float, step_index: int, total_steps: int) -> float:
    """Annealed rate for the given 0-based step: base_lr at step 0, 0 at
    the planned horizon."""
    if total_steps <= 0:
        return base_lr
    progress = min(step_index, total_steps) / total_steps
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def adam_step(p: LinearProbe, grad_w: np.ndarray, grad_b: np.ndarray,
              lr: float) -> None:
    """One Adam update with bias-corrected moments."""
    p.step += 1
    t = p.step
    p.m_w = ADAM_BETA1 * p.m_w + (1 - ADAM_BETA1) * grad_w
    p.v_w = ADAM_BETA2 * p.v_w + (1 - ADAM_BETA2) * grad_w ** 2
    p.m_b = ADAM_BETA1 * p.m_b + (1 - ADAM_BETA1) * grad_b
    p.v_b = ADAM_BETA2 * p.v_b + (1 - ADAM_BETA2) * grad_b ** 2
    m_w_hat = p.m_w / (1 - ADAM_BETA1 ** t)
    v_w_hat = p.v_w / (1 - ADAM_BETA2 ** t)
    m_b_hat = p.m_b / (1 - ADAM_BETA1 ** t)
    v_b_hat = p.v_b / (1 - ADAM_BETA2 ** t)
    p.weights -= lr * m_w_hat / (np.sqrt(v_w_hat) + ADAM_EPS)
    p.bias -= lr * m_b_hat / (np.sqrt(v_b_hat) + ADAM_EPS)


def probe_train(p: LinearProbe, data: EmbeddingBatch, mode: str,
                val: EmbeddingBatch | None = None,
                hyper: ProbeHyper | None = None,
                shuffle_seed: int = 0) -> LinearProbe:
    """Train the probe on one task's data.

    Online mode runs exactly one shuffled epoch; offline mode runs up to
    ``max_epochs`` epochs and stops once validation loss has failed to
    improve for ``patience`` consecutive epochs, keeping the best-loss
    weights. Optimizer moments and the annealing schedule restart at each
    call; the weights carry over, which is where incremental forgetting
    comes from.
    """
    hyper = hyper or ProbeHyper()
    if data.count == 0:
        raise ValueError("cannot train on an empty batch")
    if data.dim != p.dim:
        raise FormatError(f"data width {data.dim} != probe dim {p.dim}")
    data.check_labels(p.class_count)
    if mode == MODE_ONLINE:
        epochs = 1
    elif mode == MODE_OFFLINE:
        if val is None or val.count == 0:
            raise ValueError("offline mode needs a non-empty validation batch")
        epochs = hyper.max_epochs
    else:
        raise ValueError(f"unknown training mode {mode!r}")

    steps_per_epoch = math.ceil(data.count / hyper.batch_size)
    p.reset_optimizer()
    p.base_lr = hyper.lr
    p.total_steps = epochs * steps_per_epoch

    rng = np.random.Generator(np.random.PCG64(shuffle_seed))
    best_val = np.inf
    best_state = None
    epochs_since_best = 0
    for epoch in range(epochs):
        order = rng.permutation(data.count)
        for start in range(0, data.count, hyper.batch_size):
            idx = order[start:start + hyper.batch_size]
            loss, grad_w, grad_b = cross_entropy_loss_grad(
                p, data.vectors[idx], data.labels[idx]
            )
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at step {p.step + 1}")
            adam_step(p, grad_w, grad_b, cosine_lr(p.base_lr, p.step,
                                                   p.total_steps))
        if mode == MODE_OFFLINE:
            val_loss = cross_entropy_loss(p, val.vectors, val.labels)
            if val_loss < best_val:
                best_val = val_loss
                best_state = (p.weights.copy(), p.bias.copy())
                epochs_since_best = 0
            else:
                epochs_since_best += 1
                if epochs_since_best >= hyper.patience:
                    break
    if mode == MODE_OFFLINE and best_state is not None:
        p.weights, p.bias = best_state
    return p


def probe_joint_train(history: list[EmbeddingBatch], mode: str,
                      hyper: ProbeHyper | None = None,
                      val: EmbeddingBatch | None = None,
                      class_count: int | None = None,
                      init_seed: int = 0,
                      shuffle_seed: int = 0) -> LinearProbe:
    """Train a fresh probe on the pooled history of every task seen so far.

    Re-initializes from ``init_seed`` each stage and shuffles the pooled
    data with ``shuffle_seed``. Pooling past tasks violates the
    incremental-data constraint; the harness flags runs that use it.
    """
    if not history:
        raise ValueError("joint training needs at least one task")
    pooled = concat_batches(history)
    if class_count is None:
        class_count = int(pooled.labels.max()) + 1 if pooled.count else 1
    probe = make_probe(pooled.dim, class_count, init_seed)
    rng = np.random.Generator(np.random.PCG64(shuffle_seed))
    shuffled = pooled.subset(rng.permutation(pooled.count))
    return probe_train(probe, shuffled, mode, val, hyper,
                       shuffle_seed=shuffle_seed)
