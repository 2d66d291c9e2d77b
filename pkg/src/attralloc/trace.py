"""Per-run trace records and allocation-spread measures."""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

TRACE_COLUMNS = (
    "instance",
    "replication",
    "H",
    "rule",
    "stage",
    "alt",
    "attr",
    "sample",
    "selected",
    "oc",
    "correct",
    "entropy",
    "ms",
)


def allocation_entropy(counts: np.ndarray, t: int) -> float:
    """Entropy of the empirical allocation frequencies N_ij / t.

    Zero counts contribute nothing (0 * ln 0 = 0). When every sampled
    pair has the same count the value is returned as log(number of
    sampled pairs) directly, so a full uniform cycle scores exactly
    ln(m * k) with no float drift.
    """
    counts = np.asarray(counts)
    if np.any(counts < 0):
        raise ValueError("counts must be non-negative")
    total = int(counts.sum())
    if total != t:
        raise ValueError(f"counts sum to {total}, not t={t}")
    if t == 0:
        return 0.0
    nz = counts[counts > 0]
    if np.all(nz == nz[0]):
        return math.log(len(nz))
    p = nz / t
    return float(-(p @ np.log(p)))


@dataclass
class RunTrace:
    """Stage-by-stage record of one policy run on one instance.

    Arrays all have length equal to the sampling budget. ``oc`` is the
    opportunity cost of the alternative the configured selection rule
    would pick if sampling stopped at that stage; ``correct`` flags
    stages where that pick attains the best true utility. ``ms`` is
    cumulative wall time since the run started, the only
    non-deterministic column.
    """

    instance_id: str
    set_name: str
    value_kind: str
    utility_kind: str
    replication: int
    uniform_phase: int
    rule: str
    m: int
    k: int
    stage: np.ndarray
    alt: np.ndarray
    attr: np.ndarray
    sample: np.ndarray
    selected: np.ndarray
    oc: np.ndarray
    correct: np.ndarray
    entropy: np.ndarray
    ms: np.ndarray
    true_utility_ranks: tuple[int, ...] = ()
    max_belief_sum_dev: float | None = None
    max_util_sum_dev: float | None = None
    max_prob_best_dev: float | None = None

    @property
    def budget(self) -> int:
        return len(self.stage)

    @property
    def final_selection(self) -> int:
        return int(self.selected[-1])

    @property
    def total_ms(self) -> float:
        return float(self.ms[-1])

    def pair_counts(self) -> np.ndarray:
        counts = np.zeros((self.m, self.k), dtype=np.int64)
        np.add.at(counts, (self.alt, self.attr), 1)
        return counts

    def distinct_pairs(self) -> int:
        return len({(int(i), int(j)) for i, j in zip(self.alt, self.attr)})

    def validate(self) -> None:
        """Raise if the trace violates its structural guarantees."""
        n = len(self.stage)
        for name in ("alt", "attr", "sample", "selected", "oc", "correct", "entropy", "ms"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} has the wrong length")
        if not np.array_equal(self.stage, np.arange(1, n + 1)):
            raise ValueError("stages must run 1..budget")
        if np.any(self.oc < 0.0):
            raise ValueError("opportunity cost must be non-negative")
        if np.any(self.oc[self.correct.astype(bool)] != 0.0):
            raise ValueError("correct selections must have zero opportunity cost")
        if np.any(np.diff(self.ms) < 0.0):
            raise ValueError("cumulative time must be non-decreasing")
