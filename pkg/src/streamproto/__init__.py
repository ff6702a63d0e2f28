"""Streaming class-prototype classifier over frozen random projections.

A frozen random matrix expands fixed embeddings, a rectifier keeps the
useful nonlinearity, and two running sufficient statistics (a Gram matrix
and per-class feature sums) make the ridge-solved classification head
exactly order-independent: training is one forward pass per task, and the
head after task t is identical to batch training on everything seen.
Includes exact-mean and linear-probe baselines, CIL/DIL protocol
execution with seeded reruns, forgetting metrics, synthetic fixtures, and
binary file formats for embeddings, statistics, and checkpoints.
"""

from .accumulator import (
    SufficientStats,
    StatsError,
    stats_fingerprint,
    stats_merge,
    stats_new,
    stats_restore,
    stats_snapshot,
    stats_update,
)
from .baselines import (
    MODE_OFFLINE,
    MODE_ONLINE,
    LinearProbe,
    NcmModel,
    ProbeHyper,
    TrainingError,
    make_probe,
    ncm_new,
    ncm_predict,
    ncm_update,
    probe_joint_train,
    probe_predict,
    probe_train,
)
from .formats import (
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
from .harness import (
    METHODS,
    HarnessError,
    RunConfig,
    RunRecord,
    RunSeeds,
    StageStore,
    aggregate_runs,
    head_parameter_count,
    load_run_dir,
    load_run_record,
    probe_parameter_count,
    projection_parameter_count,
    run_ablation,
    run_protocol,
    save_run_record,
)
from .metrics import (
    AccuracyLedger,
    LedgerError,
    average_accuracy,
    average_forgetting,
    ledger_from_csv,
    ledger_to_csv,
)
from .projector import (
    IDENTITY,
    RELU,
    FeatureBatch,
    ProjectionMatrix,
    apply_nonlinearity,
    identity_projection,
    load_projection,
    make_projection,
    project,
    project_vectors,
    save_projection,
)
from .ridge import (
    LAMBDA_GRID,
    ConditioningError,
    RidgeHead,
    learn_task,
    load_head,
    predict,
    save_head,
    select_lambda,
    solve_head,
)
from .synth import (
    gen_domain_shifted,
    gen_gaussian_mixture,
    gen_xor_mixture,
    make_cil_manifest,
    make_dil_manifest,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyLedger", "ConditioningError", "DEFAULT_RUN_SEEDS",
    "EmbeddingBatch", "FeatureBatch", "FormatError", "HarnessError",
    "IDENTITY", "LAMBDA_GRID", "LedgerError", "LinearProbe", "METHODS",
    "MODE_OFFLINE", "MODE_ONLINE", "ManifestError", "NcmModel",
    "ProbeHyper", "ProjectionMatrix", "ProtocolManifest", "RELU",
    "RidgeHead", "RunConfig", "RunRecord", "RunSeeds", "SplitPaths",
    "StageStore", "StatsError", "SufficientStats", "TaskSpec",
    "TrainingError", "aggregate_runs", "average_accuracy",
    "average_forgetting", "concat_batches", "gen_domain_shifted",
    "gen_gaussian_mixture", "gen_xor_mixture", "head_parameter_count",
    "apply_nonlinearity",
    "identity_projection", "learn_task", "ledger_from_csv", "ledger_to_csv",
    "load_head", "load_manifest", "load_projection", "load_run_dir",
    "load_run_record", "make_cil_manifest", "make_dil_manifest",
    "make_probe", "make_projection", "ncm_new", "ncm_predict", "ncm_update",
    "predict", "probe_joint_train", "probe_parameter_count", "probe_predict",
    "probe_train", "project", "project_vectors",
    "projection_parameter_count", "read_batch", "run_ablation",
    "run_protocol", "save_head", "save_manifest", "save_projection",
    "save_run_record", "select_lambda", "solve_head", "stats_fingerprint",
    "stats_merge", "stats_new", "stats_restore", "stats_snapshot",
    "stats_update", "write_batch",
]
