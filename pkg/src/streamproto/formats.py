"""Labeled embedding sets on disk and the task manifests that sequence them.

Two file formats live here: the ``EMB1`` binary container for labeled
embedding batches (32-bit floats on disk, widened to 64-bit on load) and a
JSON manifest describing a class-incremental (CIL) or domain-incremental
(DIL) task sequence.
"""

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

EMB_MAGIC = b"EMB1"
EMB_HEADER_SIZE = 16
MANIFEST_FORMAT_VERSION = 1
DEFAULT_RUN_SEEDS = (0, 1, 2, 3, 4)

PROTOCOL_CIL = "CIL"
PROTOCOL_DIL = "DIL"


class FormatError(ValueError):
    """Raised for malformed batch files or manifests."""


class ManifestError(FormatError):
    """Raised when a manifest violates CIL/DIL shape constraints."""


@dataclass
class EmbeddingBatch:
    """N labeled embedding vectors of width H.

    ``vectors`` is an (N, H) float64 array, ``labels`` an (N,) int64 array
    of global class indices. Instances are treated as immutable after
    construction and are safe to share across threads.
    """

    vectors: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.vectors.ndim != 2:
            raise FormatError(f"vectors must be 2-D, got shape {self.vectors.shape}")
        if self.labels.ndim != 1:
            raise FormatError(f"labels must be 1-D, got shape {self.labels.shape}")
        if self.vectors.shape[0] != self.labels.shape[0]:
            raise FormatError(
                f"{self.vectors.shape[0]} vectors but {self.labels.shape[0]} labels"
            )
        if not np.all(np.isfinite(self.vectors)):
            raise FormatError("vectors contain NaN or Inf entries")
        if self.labels.size and self.labels.min() < 0:
            raise FormatError("labels must be non-negative")

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def check_labels(self, n_classes: int) -> None:
        """Verify every label is < n_classes."""
        if self.labels.size and int(self.labels.max()) >= n_classes:
            raise FormatError(
                f"label {int(self.labels.max())} out of range for {n_classes} classes"
            )

    def subset(self, index: np.ndarray) -> "EmbeddingBatch":
        """New batch holding the rows selected by ``index``."""
        return EmbeddingBatch(self.vectors[index], self.labels[index])


def concat_batches(batches) -> EmbeddingBatch:
    """Concatenate batches of equal width into one."""
    batches = list(batches)
    if not batches:
        raise ValueError("no batches to concatenate")
    dims = {b.dim for b in batches}
    if len(dims) != 1:
        raise FormatError(f"mixed embedding widths {sorted(dims)}")
    return EmbeddingBatch(
        np.concatenate([b.vectors for b in batches]),
        np.concatenate([b.labels for b in batches]),
    )


def _record_dtype(dim: int) -> np.dtype:
    return np.dtype([("label", "<u4"), ("vec", "<f4", (dim,))])


def write_batch(batch: EmbeddingBatch, path, class_count_hint: int = 0) -> None:
    """Write a batch to ``path`` in the EMB1 container format.

    Layout: magic ``EMB1``, little-endian u32 dim, u32 count, u32 class-count
    hint (0 when unknown), then one (u32 label, dim x f32) record per sample.
    Values are narrowed to 32-bit floats; a value that does not stay finite
    at 32 bits is rejected before any bytes are written.
    """
    if batch.dim < 1:
        raise FormatError("batch width must be >= 1")
    if class_count_hint < 0:
        raise FormatError("class count hint must be >= 0")
    if class_count_hint:
        batch.check_labels(class_count_hint)
    with np.errstate(over="ignore"):
        narrowed = batch.vectors.astype(np.float32)
    if not np.all(np.isfinite(narrowed)):
        raise FormatError("vectors overflow 32-bit float range")
    records = np.empty(batch.count, dtype=_record_dtype(batch.dim))
    records["label"] = batch.labels
    records["vec"] = narrowed
    header = EMB_MAGIC + struct.pack("<III", batch.dim, batch.count, class_count_hint)
    Path(path).write_bytes(header + records.tobytes())


def peek_batch_header(path):
    """Return (dim, count, class_count_hint) without loading the records."""
    with open(path, "rb") as fh:
        head = fh.read(EMB_HEADER_SIZE)
    if len(head) < EMB_HEADER_SIZE or head[:4] != EMB_MAGIC:
        raise FormatError(f"{path}: not an EMB1 file")
    return struct.unpack("<III", head[4:])


def read_batch(path) -> EmbeddingBatch:
    """Load an EMB1 file, widening values to float64.

    Errors on a bad magic, a size that disagrees with the header (the
    truncation error names the first incomplete record), and labels that
    exceed a nonzero class-count hint.
    """
    raw = Path(path).read_bytes()
    if len(raw) < EMB_HEADER_SIZE:
        raise FormatError(f"{path}: too short for an EMB1 header")
    if raw[:4] != EMB_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}, expected {EMB_MAGIC!r}")
    dim, count, hint = struct.unpack("<III", raw[4:EMB_HEADER_SIZE])
    if dim < 1:
        raise FormatError(f"{path}: header declares zero-width vectors")
    record_size = 4 + 4 * dim
    expected = EMB_HEADER_SIZE + count * record_size
    if len(raw) != expected:
        if len(raw) < expected:
            bad_record = (len(raw) - EMB_HEADER_SIZE) // record_size
            raise FormatError(
                f"{path}: truncated mid-record at record {bad_record} "
                f"({len(raw)} bytes, expected {expected})"
            )
        raise FormatError(f"{path}: {len(raw) - expected} trailing bytes")
    records = np.frombuffer(raw, dtype=_record_dtype(dim), count=count,
                            offset=EMB_HEADER_SIZE)
    batch = EmbeddingBatch(records["vec"], records["label"].astype(np.int64))
    if hint:
        batch.check_labels(hint)
    return batch


@dataclass
class SplitPaths:
    """Train/validation/test file triple for one task (one fold)."""

    train: Path
    val: Path
    test: Path


@dataclass
class TaskSpec:
    """One stage of an incremental sequence.

    ``splits`` has one entry normally, or ``fold_count`` entries when the
    manifest requests cross-validated accuracy. ``class_subset`` is set for
    CIL tasks, ``domain_tag`` for DIL tasks.
    """

    task_id: int
    splits: list[SplitPaths]
    class_subset: tuple[int, ...] | None = None
    domain_tag: str | None = None


@dataclass
class ProtocolManifest:
    """Ordered task sequence plus the global class/embedding geometry."""

    protocol: str
    total_classes: int
    embedding_dim: int
    tasks: list[TaskSpec]
    run_seeds: tuple[int, ...] = DEFAULT_RUN_SEEDS
    fold_count: int | None = None
    format_version: int = MANIFEST_FORMAT_VERSION
    path: Path | None = field(default=None, compare=False)

    def __post_init__(self):
        # fold structure lives in the tasks; the field only mirrors it
        widths = {len(t.splits) for t in self.tasks}
        if len(widths) > 1:
            raise ManifestError(
                f"tasks disagree on fold count: {sorted(widths)}"
            )
        if widths:
            width = widths.pop()
            if width > 1 and self.fold_count is None:
                self.fold_count = width
            elif self.fold_count is not None and self.fold_count != width:
                raise ManifestError(
                    f"fold_count={self.fold_count} but tasks carry {width} "
                    "splits each"
                )

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    def to_payload(self, relative_to: Path | None = None) -> dict:
        """JSON-serializable form; paths made relative to ``relative_to``."""

        def rel(p: Path) -> str:
            if relative_to is not None:
                try:
                    return str(Path(p).relative_to(relative_to))
                except ValueError:
                    pass
            return str(p)

        tasks = []
        for t in self.tasks:
            entry: dict = {"task_id": t.task_id}
            if t.class_subset is not None:
                entry["class_subset"] = list(t.class_subset)
            if t.domain_tag is not None:
                entry["domain_tag"] = t.domain_tag
            if self.fold_count:
                entry["folds"] = [
                    {"train": rel(s.train), "val": rel(s.val), "test": rel(s.test)}
                    for s in t.splits
                ]
            else:
                s = t.splits[0]
                entry.update(train=rel(s.train), val=rel(s.val), test=rel(s.test))
            tasks.append(entry)
        payload = {
            "format_version": self.format_version,
            "protocol": self.protocol,
            "total_classes": self.total_classes,
            "embedding_dim": self.embedding_dim,
            "run_seeds": list(self.run_seeds),
            "tasks": tasks,
        }
        if self.fold_count:
            payload["fold_count"] = self.fold_count
        return payload

    def content_hash(self) -> str:
        """Stable hash of the manifest content, for run provenance."""
        canon = json.dumps(self.to_payload(), sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def save_manifest(manifest: ProtocolManifest, path) -> None:
    """Write the manifest as JSON with paths relative to its directory."""
    path = Path(path)
    payload = manifest.to_payload(relative_to=path.parent)
    path.write_text(json.dumps(payload, indent=2) + "\n")
    manifest.path = path


def _parse_split(entry: dict, base: Path, where: str) -> SplitPaths:
    missing = [k for k in ("train", "val", "test") if k not in entry]
    if missing:
        raise ManifestError(f"{where}: missing split path(s) {missing}")
    return SplitPaths(*(base / entry[k] for k in ("train", "val", "test")))


def load_manifest(path, check_data: bool = True) -> ProtocolManifest:
    """Parse and validate a manifest file.

    All shape constraints are checked eagerly: CIL class subsets must be
    pairwise disjoint with union size ``total_classes``; every DIL task's
    train split must cover the full class set. With ``check_data`` (the
    default) each referenced batch file is read once to verify existence,
    width, and label range.
    """
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except FileNotFoundError:
        raise ManifestError(f"manifest not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: not valid JSON ({exc})") from None

    for key in ("format_version", "protocol", "total_classes", "embedding_dim", "tasks"):
        if key not in payload:
            raise ManifestError(f"{path}: missing required field '{key}'")
    if payload["format_version"] != MANIFEST_FORMAT_VERSION:
        raise ManifestError(
            f"{path}: unsupported format_version {payload['format_version']}"
        )
    protocol = payload["protocol"]
    if protocol not in (PROTOCOL_CIL, PROTOCOL_DIL):
        raise ManifestError(f"{path}: protocol must be CIL or DIL, got {protocol!r}")
    n_classes = int(payload["total_classes"])
    dim = int(payload["embedding_dim"])
    if n_classes < 1 or dim < 1:
        raise ManifestError(f"{path}: total_classes and embedding_dim must be >= 1")

    run_seeds = tuple(int(s) for s in payload.get("run_seeds", DEFAULT_RUN_SEEDS))
    if not run_seeds:
        raise ManifestError(f"{path}: run_seeds must be non-empty")
    fold_count = payload.get("fold_count")
    if fold_count is not None:
        fold_count = int(fold_count)
        if fold_count < 2:
            raise ManifestError(f"{path}: fold_count must be >= 2 when present")

    raw_tasks = payload["tasks"]
    if len(raw_tasks) < 2:
        raise ManifestError(f"{path}: need at least 2 tasks, got {len(raw_tasks)}")

    base = path.parent
    tasks = []
    for pos, entry in enumerate(raw_tasks, start=1):
        where = f"{path} task {pos}"
        task_id = int(entry.get("task_id", pos))
        if task_id != pos:
            raise ManifestError(f"{where}: task_id {task_id} out of order (expected {pos})")
        if fold_count:
            folds = entry.get("folds")
            if not isinstance(folds, list) or len(folds) != fold_count:
                raise ManifestError(f"{where}: expected {fold_count} folds")
            splits = [_parse_split(f, base, f"{where} fold {i + 1}")
                      for i, f in enumerate(folds)]
        else:
            splits = [_parse_split(entry, base, where)]
        subset = entry.get("class_subset")
        if subset is not None:
            subset = tuple(int(c) for c in subset)
        tasks.append(TaskSpec(task_id, splits, subset, entry.get("domain_tag")))

    if protocol == PROTOCOL_CIL:
        _check_cil_subsets(tasks, n_classes, path)
    else:
        for t in tasks:
            if t.domain_tag is None:
                raise ManifestError(f"{path} task {t.task_id}: DIL task needs a domain_tag")

    manifest = ProtocolManifest(
        protocol=protocol, total_classes=n_classes, embedding_dim=dim,
        tasks=tasks, run_seeds=run_seeds, fold_count=fold_count, path=path,
    )
    if check_data:
        _check_task_data(manifest)
    return manifest


def _check_cil_subsets(tasks, n_classes: int, path) -> None:
    seen: dict[int, int] = {}
    for t in tasks:
        if t.class_subset is None:
            raise ManifestError(f"{path} task {t.task_id}: CIL task needs a class_subset")
        for c in t.class_subset:
            if not 0 <= c < n_classes:
                raise ManifestError(
                    f"{path} task {t.task_id}: class {c} outside [0, {n_classes})"
                )
            if c in seen:
                raise ManifestError(
                    f"{path}: class {c} appears in tasks {seen[c]} and {t.task_id} "
                    "(CIL subsets must be disjoint)"
                )
            seen[c] = t.task_id
    if len(seen) != n_classes:
        raise ManifestError(
            f"{path}: CIL subsets cover {len(seen)} classes, expected {n_classes}"
        )


def _check_task_data(manifest: ProtocolManifest) -> None:
    full = set(range(manifest.total_classes))
    for t in manifest.tasks:
        for s in t.splits:
            train_labels: set[int] = set()
            for role, p in (("train", s.train), ("val", s.val), ("test", s.test)):
                where = f"task {t.task_id} {role} split {p}"
                try:
                    batch = read_batch(p)
                except FileNotFoundError:
                    raise ManifestError(f"dangling file reference: {where}") from None
                if batch.dim != manifest.embedding_dim:
                    raise ManifestError(
                        f"{where}: width {batch.dim} != manifest embedding_dim "
                        f"{manifest.embedding_dim}"
                    )
                batch.check_labels(manifest.total_classes)
                if t.class_subset is not None:
                    stray = set(batch.labels.tolist()) - set(t.class_subset)
                    if stray:
                        raise ManifestError(
                            f"{where}: labels {sorted(stray)} outside the task's "
                            "class subset"
                        )
                if role == "train":
                    train_labels = set(batch.labels.tolist())
            if manifest.protocol == PROTOCOL_DIL and train_labels != full:
                missing = sorted(full - train_labels)
                raise ManifestError(
                    f"task {t.task_id} train split missing class(es) {missing} "
                    "(DIL tasks must cover every class)"
                )
