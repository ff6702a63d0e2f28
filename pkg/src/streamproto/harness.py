"""Seeded multi-run execution of class- and domain-incremental protocols.

One integer (the run seed) reproduces an entire run: task order or
class-to-task assignment, the frozen projection, every holdout split and
every probe shuffle derive from it through documented sub-seeding. The
harness walks stages strictly in order, trains the chosen method on the
current task only (joint probes excepted, and flagged), evaluates on the
test splits of everything seen so far, and fills one accuracy ledger per
run. Access to train splits goes through a tracker so tests can prove the
incremental-data constraint instead of trusting it.
"""

import dataclasses
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .accumulator import stats_new
from .baselines import (
    MODE_OFFLINE,
    MODE_ONLINE,
    ProbeHyper,
    make_probe,
    ncm_new,
    ncm_predict,
    ncm_update,
    probe_joint_train,
    probe_predict,
    probe_train,
)
from .formats import (
    EmbeddingBatch,
    PROTOCOL_CIL,
    ProtocolManifest,
    concat_batches,
    read_batch,
)
from .metrics import AccuracyLedger, average_accuracy, average_forgetting, ledger_from_csv, ledger_to_csv
from .projector import RELU, identity_projection, make_projection, project_vectors
from .ridge import LAMBDA_GRID, learn_task, predict as ridge_predict

METHODS = ("proposed", "ncm", "lp_online", "lp_offline",
           "jlp_online", "jlp_offline")

RECORD_VERSION = 1


class HarnessError(RuntimeError):
    """Protocol violations and malformed run inputs."""


@dataclass(frozen=True)
class RunConfig:
    """Method knobs shared by every run of an experiment.

    use_projection=False bypasses the random expansion entirely (raw
    embeddings feed the accumulator, nonlinearity forced to identity);
    nonlinearity="identity" keeps the projection but drops the rectifier.
    """

    q_dim: int = 8192
    nonlinearity: str = RELU
    use_projection: bool = True
    lambda_fixed: float | None = None
    grid: tuple = LAMBDA_GRID
    stratified: bool = False
    hyper: ProbeHyper = field(default_factory=ProbeHyper)

    def to_payload(self) -> dict:
        return {
            "q_dim": int(self.q_dim),
            "nonlinearity": self.nonlinearity,
            "use_projection": bool(self.use_projection),
            "lambda_fixed": None if self.lambda_fixed is None
            else float(self.lambda_fixed),
            "grid": [float(g) for g in self.grid],
            "stratified": bool(self.stratified),
            "probe_lr": float(self.hyper.lr),
            "probe_batch_size": int(self.hyper.batch_size),
            "probe_max_epochs": int(self.hyper.max_epochs),
            "probe_patience": int(self.hyper.patience),
        }


class RunSeeds:
    """Sub-seeds derived from one run seed.

    Five 64-bit words come out of ``numpy.random.SeedSequence(run_seed)``:
    task order / class assignment, projection, holdout-split base, probe
    init, shuffle base. Per-stage seeds hash (base, stage) through another
    SeedSequence, so stage count never shifts earlier stages' draws.
    """

    def __init__(self, run_seed: int):
        words = np.random.SeedSequence(run_seed).generate_state(5, np.uint64)
        self.run_seed = int(run_seed)
        self.order = int(words[0])
        self.projection = int(words[1])
        self.split_base = int(words[2])
        self.probe_init = int(words[3])
        self.shuffle_base = int(words[4])

    @staticmethod
    def _stage_word(base: int, stage: int) -> int:
        return int(np.random.SeedSequence((base, stage))
                   .generate_state(1, np.uint64)[0])

    def split_seed(self, stage: int) -> int:
        return self._stage_word(self.split_base, stage)

    def shuffle_seed(self, stage: int) -> int:
        return self._stage_word(self.shuffle_base, stage)

    def to_payload(self) -> dict:
        return {
            "run": self.run_seed, "order": self.order,
            "projection": self.projection, "split_base": self.split_base,
            "probe_init": self.probe_init, "shuffle_base": self.shuffle_base,
        }


class StageStore:
    """Per-run view of the stage data with train-read accounting.

    The harness advances ``stage``; engines must fetch train data through
    ``train(task)``. Reaching backwards is an error unless the store was
    built for a method that legitimately pools history, in which case the
    read is allowed but counted. Test splits are free: evaluation is the
    harness's own job.
    """

    def __init__(self, stages: list, allow_history: bool = False):
        self._stages = stages
        self.allow_history = allow_history
        self.stage = 0
        self.train_reads: list[tuple[int, int]] = []
        self.history_reads = 0

    @property
    def n_stages(self) -> int:
        return len(self._stages)

    def _fetch(self, task: int, role: str) -> EmbeddingBatch:
        if not 1 <= task <= self.n_stages:
            raise HarnessError(f"no task {task} in a {self.n_stages}-stage run")
        return self._stages[task - 1][role]

    def train(self, task: int) -> EmbeddingBatch:
        self.train_reads.append((self.stage, task))
        if task > self.stage:
            raise HarnessError(
                f"train split of task {task} requested at stage {self.stage} "
                "(future data)"
            )
        if task < self.stage:
            if not self.allow_history:
                raise HarnessError(
                    f"train split of task {task} re-read at stage "
                    f"{self.stage}; past train data is inaccessible"
                )
            self.history_reads += 1
        return self._fetch(task, "train")

    def val(self, task: int) -> EmbeddingBatch:
        return self._fetch(task, "val")

    def test(self, task: int) -> EmbeddingBatch:
        return self._fetch(task, "test")


# --- method engines ---------------------------------------------------------


class _ProposedEngine:
    protocol_violating = False

    def __init__(self, h_dim, n_classes, config: RunConfig, seeds: RunSeeds):
        if config.use_projection:
            self.projection = make_projection(h_dim, config.q_dim,
                                              seeds.projection,
                                              config.nonlinearity)
        else:
            self.projection = identity_projection(h_dim)
        self.stats = stats_new(self.projection.out_dim, n_classes)
        self.seeds = seeds
        self.config = config
        self.head = None
        self.last_lambda = None

    def fit(self, store: StageStore, stage: int) -> None:
        self.stats, self.head = learn_task(
            self.stats, self.projection, store.train(stage),
            split_seed=self.seeds.split_seed(stage),
            lambda_fixed=self.config.lambda_fixed,
            grid=self.config.grid, stratified=self.config.stratified,
        )
        self.last_lambda = float(self.head.lam)

    def predict(self, vectors: np.ndarray) -> np.ndarray:
        _, labels = ridge_predict(self.head,
                                  project_vectors(self.projection, vectors))
        return labels


class _NcmEngine:
    protocol_violating = False

    def __init__(self, h_dim, n_classes, config, seeds):
        self.model = ncm_new(n_classes, h_dim)
        self.last_lambda = None

    def fit(self, store: StageStore, stage: int) -> None:
        ncm_update(self.model, store.train(stage))

    def predict(self, vectors: np.ndarray) -> np.ndarray:
        return ncm_predict(self.model, vectors)


class _ProbeEngine:
    protocol_violating = False

    def __init__(self, h_dim, n_classes, config: RunConfig, seeds: RunSeeds,
                 mode: str):
        self.probe = make_probe(h_dim, n_classes, seeds.probe_init)
        self.mode = mode
        self.config = config
        self.seeds = seeds
        self.last_lambda = None

    def fit(self, store: StageStore, stage: int) -> None:
        val = store.val(stage) if self.mode == MODE_OFFLINE else None
        self.probe = probe_train(self.probe, store.train(stage), self.mode,
                                 val, self.config.hyper,
                                 shuffle_seed=self.seeds.shuffle_seed(stage))

    def predict(self, vectors: np.ndarray) -> np.ndarray:
        return probe_predict(self.probe, vectors)


class _JointProbeEngine:
    protocol_violating = True

    def __init__(self, h_dim, n_classes, config: RunConfig, seeds: RunSeeds,
                 mode: str):
        self.n_classes = n_classes
        self.mode = mode
        self.config = config
        self.seeds = seeds
        self.probe = None
        self.last_lambda = None

    def fit(self, store: StageStore, stage: int) -> None:
        history = [store.train(j) for j in range(1, stage + 1)]
        val = None
        if self.mode == MODE_OFFLINE:
            val = concat_batches([store.val(j) for j in range(1, stage + 1)])
        self.probe = probe_joint_train(
            history, self.mode, self.config.hyper, val,
            class_count=self.n_classes, init_seed=self.seeds.probe_init,
            shuffle_seed=self.seeds.shuffle_seed(stage),
        )

    def predict(self, vectors: np.ndarray) -> np.ndarray:
        return probe_predict(self.probe, vectors)


def _make_engine(method: str, h_dim: int, n_classes: int, config: RunConfig,
                 seeds: RunSeeds):
    if method == "proposed":
        return _ProposedEngine(h_dim, n_classes, config, seeds)
    if method == "ncm":
        return _NcmEngine(h_dim, n_classes, config, seeds)
    if method == "lp_online":
        return _ProbeEngine(h_dim, n_classes, config, seeds, MODE_ONLINE)
    if method == "lp_offline":
        return _ProbeEngine(h_dim, n_classes, config, seeds, MODE_OFFLINE)
    if method == "jlp_online":
        return _JointProbeEngine(h_dim, n_classes, config, seeds, MODE_ONLINE)
    if method == "jlp_offline":
        return _JointProbeEngine(h_dim, n_classes, config, seeds, MODE_OFFLINE)
    raise HarnessError(f"unknown method {method!r}; choose from {METHODS}")


# --- run records ------------------------------------------------------------


@dataclass
class RunRecord:
    """Everything needed to reproduce and report one run."""

    manifest_hash: str
    protocol: str
    method: str
    run_seed: int
    seeds: dict
    task_order: tuple
    class_assignment: tuple | None
    lambdas: list          # [stage][fold] chosen lambda; [] for non-ridge
    ledger: AccuracyLedger  # fold-averaged accuracy cells
    stage_seconds: list
    fold_count: int
    history_reads: int
    protocol_violating: bool
    config: dict

    @property
    def n_stages(self) -> int:
        return self.ledger.n_tasks

    def aa_curve(self) -> list:
        return [average_accuracy(self.ledger, t)
                for t in range(1, self.n_stages + 1)]

    def fr_curve(self) -> list:
        """Stage-indexed forgetting; stage 1 has none and reads as NaN."""
        out = [float("nan")]
        out += [average_forgetting(self.ledger, t)
                for t in range(2, self.n_stages + 1)]
        return out


def _load_fold_data(manifest: ProtocolManifest):
    """fold -> task -> {train, val, test} batches, read once up front."""
    n_folds = manifest.fold_count or 1
    folds = []
    for f in range(n_folds):
        tasks = []
        for task in manifest.tasks:
            split = task.splits[f]
            tasks.append({
                "train": read_batch(split.train),
                "val": read_batch(split.val),
                "test": read_batch(split.test),
            })
        folds.append(tasks)
    return folds


def _cil_assignment(manifest: ProtocolManifest, order_seed: int):
    """Fresh draw of classes into tasks, preserving the subset sizes."""
    rng = np.random.Generator(np.random.PCG64(order_seed))
    perm = rng.permutation(manifest.total_classes)
    assignment, offset = [], 0
    for task in manifest.tasks:
        size = len(task.class_subset)
        assignment.append(tuple(sorted(int(c) for c in perm[offset:offset + size])))
        offset += size
    return tuple(assignment)


def _build_stages(manifest, fold_tasks, assignment, task_order):
    """Materialize one fold's per-stage batches for this run's arrangement."""
    roles = ("train", "val", "test")
    if assignment is not None:  # CIL: regroup samples by the fresh class draw
        pooled = {role: concat_batches([t[role] for t in fold_tasks])
                  for role in roles}
        stages = []
        for subset in assignment:
            picks = {}
            for role in roles:
                mask = np.isin(pooled[role].labels, np.asarray(subset))
                picks[role] = pooled[role].subset(np.flatnonzero(mask))
            stages.append(picks)
        return stages
    return [fold_tasks[tid - 1] for tid in task_order]  # DIL: reordered tasks


def _walk_stages(store: StageStore, engine, ledger: AccuracyLedger,
                 lambdas, seconds):
    """One pass over all stages for one fold, accumulating into the run.

    Cells are summed here and divided by the fold count afterwards, which
    is what makes each reported accuracy a fold average."""
    for t in range(1, store.n_stages + 1):
        store.stage = t
        t0 = time.perf_counter()
        engine.fit(store, t)
        seconds[t - 1] += time.perf_counter() - t0
        if engine.last_lambda is not None:
            lambdas[t - 1].append(engine.last_lambda)
        for j in range(1, t + 1):
            test = store.test(j)
            correct = engine.predict(test.vectors) == test.labels
            cell = float(np.mean(correct))
            prev = ledger.table[t - 1, j - 1]
            total = cell if np.isnan(prev) else prev + cell
            ledger.table[t - 1, j - 1] = total
    return store


def _execute_run(manifest: ProtocolManifest, fold_data, method: str,
                 run_seed: int, config: RunConfig) -> RunRecord:
    seeds = RunSeeds(run_seed)
    n_stages = manifest.n_tasks
    n_folds = len(fold_data)

    if manifest.protocol == PROTOCOL_CIL:
        assignment = _cil_assignment(manifest, seeds.order)
        task_order = tuple(range(1, n_stages + 1))
    else:
        rng = np.random.Generator(np.random.PCG64(seeds.order))
        task_order = tuple(int(i) + 1 for i in rng.permutation(n_stages))
        assignment = None

    ledger = AccuracyLedger(n_stages)
    ledger.table[:] = np.nan
    lambdas = [[] for _ in range(n_stages)]
    seconds = [0.0] * n_stages
    history_reads = 0
    allow_history = method.startswith("jlp")

    for fold_tasks in fold_data:
        stages = _build_stages(manifest, fold_tasks, assignment, task_order)
        store = StageStore(stages, allow_history=allow_history)
        engine = _make_engine(method, manifest.embedding_dim,
                              manifest.total_classes, config, seeds)
        _walk_stages(store, engine, ledger, lambdas, seconds)
        history_reads += store.history_reads

    ledger.table /= n_folds  # cells were summed per fold above
    return RunRecord(
        manifest_hash=manifest.content_hash(),
        protocol=manifest.protocol,
        method=method,
        run_seed=run_seed,
        seeds=seeds.to_payload(),
        task_order=task_order,
        class_assignment=assignment,
        lambdas=lambdas,
        ledger=ledger,
        stage_seconds=seconds,
        fold_count=n_folds,
        history_reads=history_reads,
        protocol_violating=bool(allow_history),
        config=config.to_payload(),
    )


def run_protocol(manifest: ProtocolManifest, method: str,
                 run_seeds=None, config: RunConfig | None = None,
                 jobs: int = 1) -> list:
    """Execute one method over every run seed and return the RunRecords.

    CIL runs redraw the class-to-task assignment per seed; DIL runs redraw
    the task order. Stages within a run are strictly sequential; seeds are
    independent, so ``jobs`` > 1 fans them out across threads.
    """
    if method not in METHODS:
        raise HarnessError(f"unknown method {method!r}; choose from {METHODS}")
    config = config or RunConfig()
    if run_seeds is None:
        run_seeds = manifest.run_seeds
    run_seeds = [int(s) for s in run_seeds]
    if not run_seeds:
        raise HarnessError("need at least one run seed")

    fold_data = _load_fold_data(manifest)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_execute_run, manifest, fold_data, method,
                                   seed, config) for seed in run_seeds]
            return [f.result() for f in futures]
    return [_execute_run(manifest, fold_data, method, seed, config)
            for seed in run_seeds]


# --- aggregation and ablations ---------------------------------------------


def _mean_std(values) -> tuple:
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return mean, std


def aggregate_runs(records: list) -> dict:
    """Per-stage mean and sample std of AA_t and FR_t across runs."""
    if not records:
        raise HarnessError("no records to aggregate")
    hashes = {r.manifest_hash for r in records}
    if len(hashes) > 1:
        raise HarnessError(f"mixed manifests in one aggregate: {sorted(hashes)}")
    methods = {r.method for r in records}
    if len(methods) > 1:
        raise HarnessError(f"mixed methods in one aggregate: {sorted(methods)}")
    n_stages = {r.n_stages for r in records}
    if len(n_stages) > 1:
        raise HarnessError("records disagree on stage count")
    t_max = n_stages.pop()

    aa = np.array([r.aa_curve() for r in records])
    fr = np.array([r.fr_curve() for r in records])
    stages = []
    for t in range(1, t_max + 1):
        aa_mean, aa_std = _mean_std(aa[:, t - 1])
        row = {"stage": t, "aa_mean": aa_mean, "aa_std": aa_std,
               "fr_mean": None, "fr_std": None}
        if t >= 2:
            row["fr_mean"], row["fr_std"] = _mean_std(fr[:, t - 1])
        stages.append(row)

    return {
        "method": records[0].method,
        "manifest_hash": records[0].manifest_hash,
        "protocol": records[0].protocol,
        "protocol_violating": any(r.protocol_violating for r in records),
        "n_runs": len(records),
        "n_stages": t_max,
        "stages": stages,
        "final": stages[-1],
    }


def head_parameter_count(q_dim: int, class_count: int) -> int:
    """Trainable parameters of the ridge head: the Q x C weight matrix."""
    if q_dim < 1 or class_count < 1:
        raise ValueError(f"dims must be >= 1, got {q_dim}x{class_count}")
    return int(q_dim) * int(class_count)


def probe_parameter_count(h_dim: int, class_count: int) -> int:
    """Linear-probe weight matrix H x C; the C bias terms are excluded
    from this accounting by convention."""
    if h_dim < 1 or class_count < 1:
        raise ValueError(f"dims must be >= 1, got {h_dim}x{class_count}")
    return int(h_dim) * int(class_count)


def projection_parameter_count(h_dim: int, q_dim: int) -> int:
    """Frozen (never trained) random-projection entries."""
    if h_dim < 1 or q_dim < 1:
        raise ValueError(f"dims must be >= 1, got {h_dim}x{q_dim}")
    return int(h_dim) * int(q_dim)


ABLATION_VARIANTS = ("full", "no_projection", "projection_no_relu", "q_sweep")


def run_ablation(manifest: ProtocolManifest, variant: str, q_list=None,
                 run_seeds=None, config: RunConfig | None = None,
                 jobs: int = 1) -> dict:
    """Run one ablation variant of the closed-form method and report curves.

    ``q_sweep`` takes a list of projection widths and emits one row per
    width; the other variants emit a single row. Every row carries the
    parameter accounting: trainable head entries, frozen projection
    entries, and the H x C linear-probe reference.
    """
    if variant not in ABLATION_VARIANTS:
        raise ValueError(
            f"unknown variant {variant!r}; choose from {ABLATION_VARIANTS}"
        )
    config = config or RunConfig()
    h_dim = manifest.embedding_dim
    n_classes = manifest.total_classes

    if variant == "q_sweep":
        if not q_list:
            raise ValueError("q_sweep needs a non-empty list of Q values")
        plans = [(f"q={q}", dataclasses.replace(config, q_dim=int(q)))
                 for q in q_list]
    elif variant == "no_projection":
        plans = [(variant, dataclasses.replace(config, use_projection=False))]
    elif variant == "projection_no_relu":
        plans = [(variant, dataclasses.replace(config, nonlinearity="identity"))]
    else:
        plans = [(variant, config)]

    for _, plan in plans:
        if plan.q_dim <= 0:
            raise ValueError(f"invalid projection width {plan.q_dim}")

    rows = []
    for name, plan in plans:
        records = run_protocol(manifest, "proposed", run_seeds, plan, jobs)
        agg = aggregate_runs(records)
        q_eff = plan.q_dim if plan.use_projection else h_dim
        rows.append({
            "variant": name,
            "q_dim": int(q_eff),
            "trainable_params": head_parameter_count(q_eff, n_classes),
            "frozen_projection_params": (
                projection_parameter_count(h_dim, plan.q_dim)
                if plan.use_projection else 0
            ),
            "probe_params": probe_parameter_count(h_dim, n_classes),
            "aa_mean_curve": [s["aa_mean"] for s in agg["stages"]],
            "aa_std_curve": [s["aa_std"] for s in agg["stages"]],
            "final_aa_mean": agg["final"]["aa_mean"],
            "final_aa_std": agg["final"]["aa_std"],
            "final_fr_mean": agg["final"]["fr_mean"],
            "final_fr_std": agg["final"]["fr_std"],
            "n_runs": agg["n_runs"],
        })
    return {"manifest_hash": manifest.content_hash(), "variant": variant,
            "rows": rows}


# --- persistence ------------------------------------------------------------


def save_run_record(record: RunRecord, out_dir) -> Path:
    """Write ``<method>_seed<k>.json`` plus the ledger CSV next to it."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{record.method}_seed{record.run_seed}"
    csv_name = f"{stem}.ledger.csv"
    (out_dir / csv_name).write_text(ledger_to_csv(record.ledger))

    fr = record.fr_curve()
    payload = {
        "record_version": RECORD_VERSION,
        "manifest_hash": record.manifest_hash,
        "protocol": record.protocol,
        "method": record.method,
        "run_seed": record.run_seed,
        "seeds": record.seeds,
        "task_order": list(record.task_order),
        "class_assignment": (None if record.class_assignment is None
                             else [list(s) for s in record.class_assignment]),
        "lambdas": record.lambdas,
        "stage_seconds": [round(s, 6) for s in record.stage_seconds],
        "fold_count": record.fold_count,
        "history_reads": record.history_reads,
        "protocol_violating": record.protocol_violating,
        "config": record.config,
        "aa": record.aa_curve(),
        "fr": [None if np.isnan(v) else v for v in fr],
        "ledger_csv": csv_name,
    }
    path = out_dir / f"{stem}.json"
    path.write_text(json.dumps(payload, indent=2) + "\n")
    return path


def load_run_record(json_path) -> RunRecord:
    json_path = Path(json_path)
    payload = json.loads(json_path.read_text())
    if payload.get("record_version") != RECORD_VERSION:
        raise HarnessError(
            f"{json_path}: unsupported record version "
            f"{payload.get('record_version')!r}"
        )
    ledger = ledger_from_csv((json_path.parent / payload["ledger_csv"]).read_text())
    assignment = payload["class_assignment"]
    return RunRecord(
        manifest_hash=payload["manifest_hash"],
        protocol=payload["protocol"],
        method=payload["method"],
        run_seed=int(payload["run_seed"]),
        seeds=payload["seeds"],
        task_order=tuple(payload["task_order"]),
        class_assignment=(None if assignment is None
                          else tuple(tuple(s) for s in assignment)),
        lambdas=payload["lambdas"],
        ledger=ledger,
        stage_seconds=list(payload["stage_seconds"]),
        fold_count=int(payload["fold_count"]),
        history_reads=int(payload["history_reads"]),
        protocol_violating=bool(payload["protocol_violating"]),
        config=payload["config"],
    )


def load_run_dir(run_dir) -> list:
    """All run records under a directory, sorted by (method, run_seed)."""
    run_dir = Path(run_dir)
    records = []
    for path in sorted(run_dir.glob("*.json")):
        try:
            payload = json.loads(path.read_text())
        except (json.JSONDecodeError, UnicodeDecodeError):
            continue  # not a run record; leave other JSON files alone
        if not isinstance(payload, dict) or "record_version" not in payload:
            continue  # some other JSON artifact sharing the directory
        records.append(load_run_record(path))
    if not records:
        raise HarnessError(f"no run records found in {run_dir}")
    return sorted(records, key=lambda r: (r.method, r.run_seed))
