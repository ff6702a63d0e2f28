import json
import struct

import numpy as np
import pytest

from streamproto import (
    DEFAULT_RUN_SEEDS,
    EmbeddingBatch,
    FormatError,
    ManifestError,
    ProtocolManifest,
    SplitPaths,
    TaskSpec,
    concat_batches,
    load_manifest,
    read_batch,
    save_manifest,
    write_batch,
)
from streamproto.formats import EMB_HEADER_SIZE, EMB_MAGIC, peek_batch_header


def make_batch(n=6, dim=3, n_classes=4, seed=0):
    rng = np.random.Generator(np.random.PCG64(seed))
    return EmbeddingBatch(rng.standard_normal((n, dim)),
                          rng.integers(0, n_classes, size=n))


class TestEmbeddingBatch:
    def test_coerces_dtypes(self):
        b = EmbeddingBatch(np.ones((2, 3), dtype=np.float32),
                           np.array([0, 1], dtype=np.uint8))
        assert b.vectors.dtype == np.float64
        assert b.labels.dtype == np.int64

    def test_rejects_bad_shapes(self):
        with pytest.raises(FormatError):
            EmbeddingBatch(np.ones(3), np.array([0]))
        with pytest.raises(FormatError):
            EmbeddingBatch(np.ones((2, 3)), np.array([[0], [1]]))
        with pytest.raises(FormatError):
            EmbeddingBatch(np.ones((2, 3)), np.array([0, 1, 2]))

    def test_rejects_nonfinite_and_negative_labels(self):
        with pytest.raises(FormatError):
            EmbeddingBatch(np.array([[np.nan, 0.0]]), np.array([0]))
        with pytest.raises(FormatError):
            EmbeddingBatch(np.ones((1, 2)), np.array([-1]))

    def test_check_labels(self):
        b = make_batch(n_classes=4)
        b.check_labels(4)
        with pytest.raises(FormatError):
            b.check_labels(int(b.labels.max()))  # one too few classes

    def test_subset_and_concat(self):
        b = make_batch(n=8)
        sub = b.subset(np.array([1, 3, 5]))
        assert sub.count == 3
        assert np.array_equal(sub.vectors, b.vectors[[1, 3, 5]])
        both = concat_batches([sub, b])
        assert both.count == 11
        assert np.array_equal(both.labels[:3], sub.labels)

    def test_concat_rejects_width_mismatch(self):
        with pytest.raises(FormatError):
            concat_batches([make_batch(dim=3), make_batch(dim=4)])


class TestBatchFile:
    def test_size_formula(self, tmp_path):
        # 16-byte header plus N * (4 + 4 * dim) record bytes
        for n, dim in ((1, 2), (5, 3), (17, 8)):
            b = make_batch(n=n, dim=dim)
            path = tmp_path / f"b_{n}_{dim}.emb"
            write_batch(b, path)
            assert path.stat().st_size == 16 + n * (4 + 4 * dim)
        assert (tmp_path / "b_1_2.emb").stat().st_size == 28

    def test_round_trip(self, tmp_path):
        b = make_batch(n=20, dim=5)
        path = tmp_path / "batch.emb"
        write_batch(b, path, class_count_hint=4)
        back = read_batch(path)
        assert back.count == 20 and back.dim == 5
        assert np.array_equal(back.labels, b.labels)
        # disk is float32, memory is float64: loss bounded by f32 rounding
        assert np.allclose(back.vectors, b.vectors, rtol=1e-6, atol=1e-6)
        assert back.vectors.dtype == np.float64

    def test_write_is_deterministic(self, tmp_path):
        b = make_batch()
        write_batch(b, tmp_path / "a.emb")
        write_batch(b, tmp_path / "b.emb")
        assert (tmp_path / "a.emb").read_bytes() == (tmp_path / "b.emb").read_bytes()

    def test_header_hint(self, tmp_path):
        b = make_batch(n_classes=4)
        path = tmp_path / "b.emb"
        write_batch(b, path, class_count_hint=4)
        dim, count, hint = peek_batch_header(path)
        assert (dim, count, hint) == (b.dim, b.count, 4)

    def test_write_rejects_label_over_hint(self, tmp_path):
        b = EmbeddingBatch(np.ones((2, 2)), np.array([0, 7]))
        with pytest.raises(FormatError):
            write_batch(b, tmp_path / "b.emb", class_count_hint=3)

    def test_read_gates_labels_on_hint(self, tmp_path):
        b = EmbeddingBatch(np.ones((2, 2)), np.array([0, 7]))
        path = tmp_path / "b.emb"
        write_batch(b, path)
        raw = bytearray(path.read_bytes())
        raw[12:16] = struct.pack("<I", 3)  # forge hint below max label
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            read_batch(path)

    def test_rejects_f32_overflow(self, tmp_path):
        huge = EmbeddingBatch(np.array([[1e300, 0.0]]), np.array([0]))
        with pytest.raises(FormatError):
            write_batch(huge, tmp_path / "x.emb")

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "b.emb"
        write_batch(make_batch(), path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"NOPE"
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="magic"):
            read_batch(path)

    def test_truncation_names_record(self, tmp_path):
        b = make_batch(n=5, dim=3)
        path = tmp_path / "b.emb"
        write_batch(b, path)
        record = 4 + 4 * 3
        # cut into the middle of the fourth record (index 3)
        path.write_bytes(path.read_bytes()[:EMB_HEADER_SIZE + 3 * record + 5])
        with pytest.raises(FormatError, match="record 3"):
            read_batch(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        path = tmp_path / "b.emb"
        write_batch(make_batch(), path)
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(FormatError):
            read_batch(path)


def write_cil_tree(tmp_path, n_tasks=2, n_classes=4, dim=3, per_split=6):
    """Small on-disk CIL dataset; returns a saveable manifest."""
    rng = np.random.Generator(np.random.PCG64(7))
    bounds = np.linspace(0, n_classes, n_tasks + 1).astype(int)
    tasks = []
    for t in range(1, n_tasks + 1):
        subset = tuple(range(bounds[t - 1], bounds[t]))
        paths = {}
        for role in ("train", "val", "test"):
            labels = rng.choice(subset, size=per_split)
            batch = EmbeddingBatch(rng.standard_normal((per_split, dim)), labels)
            path = tmp_path / f"task{t}.{role}.emb"
            write_batch(batch, path, class_count_hint=n_classes)
            paths[role] = path
        tasks.append(TaskSpec(t, [SplitPaths(**paths)], class_subset=subset))
    return ProtocolManifest(protocol="CIL", total_classes=n_classes,
                            embedding_dim=dim, tasks=tasks,
                            run_seeds=DEFAULT_RUN_SEEDS)


class TestManifest:
    def test_round_trip(self, tmp_path):
        manifest = write_cil_tree(tmp_path)
        save_manifest(manifest, tmp_path / "manifest.json")
        back = load_manifest(tmp_path / "manifest.json")
        assert back.protocol == "CIL"
        assert back.n_tasks == 2
        assert back.total_classes == 4
        assert back.tasks[0].class_subset == (0, 1)
        assert back.run_seeds == DEFAULT_RUN_SEEDS

    def test_paths_are_relative(self, tmp_path):
        manifest = write_cil_tree(tmp_path)
        save_manifest(manifest, tmp_path / "manifest.json")
        payload = json.loads((tmp_path / "manifest.json").read_text())
        for task in payload["tasks"]:
            for role in ("train", "val", "test"):
                assert not task[role].startswith("/")

    def test_content_hash_tracks_content(self, tmp_path):
        manifest = write_cil_tree(tmp_path)
        h1 = manifest.content_hash()
        assert h1 == manifest.content_hash()
        changed = ProtocolManifest(
            protocol=manifest.protocol, total_classes=manifest.total_classes,
            embedding_dim=manifest.embedding_dim, tasks=manifest.tasks,
            run_seeds=(9,),
        )
        assert changed.content_hash() != h1

    def test_dangling_reference(self, tmp_path):
        manifest = write_cil_tree(tmp_path)
        save_manifest(manifest, tmp_path / "manifest.json")
        (tmp_path / "task2.test.emb").unlink()
        with pytest.raises(ManifestError, match="task2.test.emb"):
            load_manifest(tmp_path / "manifest.json")

    def test_width_mismatch_detected(self, tmp_path):
        manifest = write_cil_tree(tmp_path, dim=3)
        save_manifest(manifest, tmp_path / "manifest.json")
        rogue = EmbeddingBatch(np.ones((2, 5)), np.array([0, 1]))
        write_batch(rogue, tmp_path / "task1.val.emb")
        with pytest.raises(ManifestError):
            load_manifest(tmp_path / "manifest.json")

    def test_cil_subsets_must_partition(self, tmp_path):
        manifest = write_cil_tree(tmp_path)
        bad_tasks = [
            TaskSpec(1, manifest.tasks[0].splits, class_subset=(0, 1)),
            TaskSpec(2, manifest.tasks[1].splits, class_subset=(1, 2)),
        ]
        bad = ProtocolManifest(protocol="CIL", total_classes=4,
                               embedding_dim=3, tasks=bad_tasks)
        save_manifest(bad, tmp_path / "bad.json")
        with pytest.raises(ManifestError, match="disjoint|overlap"):
            load_manifest(tmp_path / "bad.json")

    def test_needs_two_tasks(self, tmp_path):
        manifest = write_cil_tree(tmp_path)
        lone = ProtocolManifest(protocol="CIL", total_classes=4,
                                embedding_dim=3, tasks=manifest.tasks[:1])
        save_manifest(lone, tmp_path / "lone.json")
        with pytest.raises(ManifestError):
            load_manifest(tmp_path / "lone.json")

    def test_dil_requires_domain_tags(self, tmp_path):
        rng = np.random.Generator(np.random.PCG64(0))
        tasks = []
        for t in (1, 2):
            paths = {}
            for role in ("train", "val", "test"):
                b = EmbeddingBatch(rng.standard_normal((4, 3)),
                                   np.array([0, 1, 0, 1]))
                p = tmp_path / f"d{t}.{role}.emb"
                write_batch(b, p, class_count_hint=2)
                paths[role] = p
            tasks.append(TaskSpec(t, [SplitPaths(**paths)]))  # no tag
        bad = ProtocolManifest(protocol="DIL", total_classes=2,
                               embedding_dim=3, tasks=tasks)
        save_manifest(bad, tmp_path / "bad.json")
        with pytest.raises(ManifestError, match="domain"):
            load_manifest(tmp_path / "bad.json")

    def test_skip_data_check(self, tmp_path):
        manifest = write_cil_tree(tmp_path)
        save_manifest(manifest, tmp_path / "manifest.json")
        (tmp_path / "task2.test.emb").unlink()
        back = load_manifest(tmp_path / "manifest.json", check_data=False)
        assert back.n_tasks == 2
