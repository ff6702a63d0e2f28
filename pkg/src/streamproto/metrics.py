"""Average-accuracy and forgetting over a lower-triangular accuracy ledger.

``acc[t][j]`` (1-indexed, j <= t) is the accuracy of task j's test split
after learning task t. Average accuracy at stage t is the mean of row t;
average forgetting at stage t compares each earlier task's current
accuracy against the best it ever achieved at stages before t.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np


class LedgerError(ValueError):
    """Raised for out-of-shape ledger access or incomplete rows."""


@dataclass
class AccuracyLedger:
    """T x T lower-triangular accuracy matrix, entries in [0, 1]."""

    n_tasks: int
    table: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.n_tasks < 1:
            raise LedgerError("ledger needs at least one task")
        if self.table is None:
            self.table = np.full((self.n_tasks, self.n_tasks), np.nan)
        else:
            self.table = np.asarray(self.table, dtype=np.float64)
            if self.table.shape != (self.n_tasks, self.n_tasks):
                raise LedgerError("table shape does not match n_tasks")

    def _check_cell(self, stage: int, task: int) -> None:
        if not 1 <= task <= stage <= self.n_tasks:
            raise LedgerError(
                f"cell (stage={stage}, task={task}) outside the lower "
                f"triangle of a {self.n_tasks}-task ledger"
            )

    def set_accuracy(self, stage: int, task: int, value: float) -> None:
        self._check_cell(stage, task)
        if not 0.0 <= value <= 1.0:
            raise LedgerError(f"accuracy {value} outside [0, 1]")
        self.table[stage - 1, task - 1] = value

    def accuracy(self, stage: int, task: int) -> float:
        self._check_cell(stage, task)
        value = self.table[stage - 1, task - 1]
        if np.isnan(value):
            raise LedgerError(f"cell (stage={stage}, task={task}) not filled")
        return float(value)

    def row_complete(self, stage: int) -> bool:
        return not np.isnan(self.table[stage - 1, :stage]).any()


def average_accuracy(ledger: AccuracyLedger, stage: int) -> float:
    """Mean accuracy over tasks 1..stage after learning ``stage``."""
    if not 1 <= stage <= ledger.n_tasks:
        raise LedgerError(f"stage {stage} outside [1, {ledger.n_tasks}]")
    if not ledger.row_complete(stage):
        raise LedgerError(f"row {stage} is incomplete")
    return float(np.mean(ledger.table[stage - 1, :stage]))


def average_forgetting(ledger: AccuracyLedger, stage: int) -> float:
    """Mean drop from each earlier task's best past accuracy to its
    accuracy now.

    For each task j < stage, the reference is the maximum accuracy task j
    reached at any stage in {j, ..., stage-1} (cells before stage j do not
    exist). Needs stage >= 2 and every row up to ``stage`` complete.
    """
    if stage < 2:
        raise LedgerError("forgetting needs at least two learned tasks")
    if stage > ledger.n_tasks:
        raise LedgerError(f"stage {stage} outside [2, {ledger.n_tasks}]")
    for t in range(1, stage + 1):
        if not ledger.row_complete(t):
            raise LedgerError(f"row {t} is incomplete")
    drops = []
    for j in range(1, stage):
        past = ledger.table[j - 1:stage - 1, j - 1]
        drops.append(np.max(past) - ledger.table[stage - 1, j - 1])
    return float(np.mean(drops))


def ledger_to_csv(ledger: AccuracyLedger) -> str:
    """CSV with one row per stage; absent upper-triangle cells are blank."""
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["stage"] + [f"task_{j}" for j in range(1, ledger.n_tasks + 1)])
    for t in range(1, ledger.n_tasks + 1):
        row: list = [t]
        for j in range(1, ledger.n_tasks + 1):
            value = ledger.table[t - 1, j - 1]
            row.append("" if np.isnan(value) else f"{value:.6f}")
        writer.writerow(row)
    return out.getvalue()


def ledger_from_csv(text: str) -> AccuracyLedger:
    rows = list(csv.reader(io.StringIO(text)))
    if len(rows) < 2:
        raise LedgerError("ledger CSV has no data rows")
    n_tasks = len(rows[0]) - 1
    ledger = AccuracyLedger(n_tasks)
    for row in rows[1:]:
        stage = int(row[0])
        for j, cell in enumerate(row[1:], start=1):
            if cell:
                ledger.set_accuracy(stage, j, float(cell))
    return ledger
