"""Replication harness, aggregation, and statistical comparison.

Runs are deterministic: every (instance, policy, replication) triple
gets its own generator seeded from the experiment root and the
triple's indices, so results do not depend on execution order or on
the worker count. Only the cumulative-time column varies between
repeated executions.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .instances import Instance
from .policies import PolicyConfig, run_policy
from .preference import ValueLattice
from .trace import RunTrace, TRACE_COLUMNS, allocation_entropy

__all__ = [
    "InsufficientData",
    "SummaryRow",
    "ComparisonResult",
    "SamplingBehavior",
    "child_seed",
    "run_unit",
    "run_experiment",
    "aggregate",
    "compare",
    "sampling_behavior",
    "write_trace_csv",
    "read_trace_csv",
    "allocation_entropy",
]

CONFIDENCE_Z = 1.96
ALPHA = 0.05


class InsufficientData(ValueError):
    """Too few runs for a statistical comparison."""


def child_seed(
    rng_root: int, instance_index: int, policy_index: int, replication: int
) -> np.random.SeedSequence:
    """Seed for one run, a pure function of the root and the run's indices."""
    return np.random.SeedSequence(
        entropy=(int(rng_root), int(instance_index), int(policy_index), int(replication))
    )


def run_unit(
    instance: Instance,
    policy: PolicyConfig,
    rng_root: int,
    instance_index: int,
    policy_index: int,
    replications: int,
    validate: bool = False,
) -> list[RunTrace]:
    """All replications of one (instance, policy) pair."""
    lattice = ValueLattice(instance.vspec, instance.uspec)
    return [
        run_policy(
            instance,
            policy,
            np.random.default_rng(child_seed(rng_root, instance_index, policy_index, rep)),
            replication=rep,
            validate=validate,
            lattice=lattice,
        )
        for rep in range(replications)
    ]


def run_experiment(
    instances: Sequence[Instance],
    policies: Sequence[PolicyConfig],
    replications: int,
    rng_root: int,
    workers: int = 1,
    validate: bool = False,
    progress: Callable[[int, int], None] | None = None,
) -> list[RunTrace]:
    """Every policy on every instance, ``replications`` times each.

    Returns traces ordered by (instance index, policy index,
    replication). With ``workers > 1`` the units run in a process
    pool; everything but the timing column is identical either way.
    """
    units = [(ii, pi) for ii in range(len(instances)) for pi in range(len(policies))]
    results: list[list[RunTrace] | None] = [None] * len(units)
    if workers <= 1:
        for n, (ii, pi) in enumerate(units):
            results[n] = run_unit(
                instances[ii], policies[pi], rng_root, ii, pi, replications, validate
            )
            if progress is not None:
                progress(n + 1, len(units))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(
                    run_unit,
                    instances[ii],
                    policies[pi],
                    rng_root,
                    ii,
                    pi,
                    replications,
                    validate,
                ): n
                for n, (ii, pi) in enumerate(units)
            }
            done = 0
            for fut in as_completed(futures):
                results[futures[fut]] = fut.result()
                done += 1
                if progress is not None:
                    progress(done, len(units))
    traces: list[RunTrace] = []
    for group in results:
        traces.extend(group)
    return traces


@dataclass(frozen=True)
class SummaryRow:
    """Mean opportunity cost and correct-selection count at one stage."""

    set_name: str
    value_kind: str
    utility_kind: str
    uniform_phase: int
    rule: str
    stage: int
    runs: int
    mean_oc: float
    correct_count: int


def aggregate(traces: Sequence[RunTrace]) -> list[SummaryRow]:
    """Per-stage summaries grouped by problem cell and policy.

    One row per (set, value kind, utility kind, uniform phase, rule,
    stage); this is the data behind per-stage mean-cost curves and
    final-stage results tables.
    """
    groups: dict[tuple, list[RunTrace]] = {}
    for tr in traces:
        key = (tr.set_name, tr.value_kind, tr.utility_kind, tr.uniform_phase, tr.rule)
        groups.setdefault(key, []).append(tr)
    rows: list[SummaryRow] = []
    for key in sorted(groups):
        members = groups[key]
        budgets = {tr.budget for tr in members}
        if len(budgets) != 1:
            raise ValueError(f"mixed budgets in group {key}")
        oc = np.stack([tr.oc for tr in members])
        correct = np.stack([tr.correct for tr in members])
        mean_oc = oc.mean(axis=0)
        correct_count = correct.sum(axis=0)
        for s in range(budgets.pop()):
            rows.append(
                SummaryRow(
                    *key,
                    stage=s + 1,
                    runs=len(members),
                    mean_oc=float(mean_oc[s]),
                    correct_count=int(correct_count[s]),
                )
            )
    return rows


@dataclass(frozen=True)
class ComparisonResult:
    """Two-policy comparison on final opportunity cost and correctness.

    Verdicts are from the first policy's perspective: "better" means
    lower mean cost (Welch test) or a correct-selection rate whose
    difference CI lies above zero.
    """

    n_a: int
    n_b: int
    mean_oc_a: float
    mean_oc_b: float
    t_stat: float
    p_value: float
    oc_verdict: str
    share_correct_a: float
    share_correct_b: float
    diff_correct: float
    ci_low: float
    ci_high: float
    selection_verdict: str


def compare(
    rows_a: Sequence[tuple[float, bool]],
    rows_b: Sequence[tuple[float, bool]],
    alpha: float = ALPHA,
) -> ComparisonResult:
    """Compare per-run (opportunity cost, correct) outcomes of two policies.

    Mean costs are compared with Welch's unequal-variance t test; the
    correct-selection proportions with a normal-approximation CI on
    their difference (z = 1.96 for the usual alpha). Raises
    InsufficientData when either side has fewer than two runs.
    """
    n_a, n_b = len(rows_a), len(rows_b)
    if n_a < 2 or n_b < 2:
        raise InsufficientData("need at least two runs on each side")
    oc_a = np.array([float(r[0]) for r in rows_a])
    oc_b = np.array([float(r[0]) for r in rows_b])
    mean_a, mean_b = float(oc_a.mean()), float(oc_b.mean())
    # constant samples have zero variance mathematically even when the
    # float mean of the repeated value is inexact, so test elementwise
    if np.all(oc_a == oc_a[0]) and np.all(oc_b == oc_b[0]):
        if oc_a[0] == oc_b[0]:
            t_stat, p_value = 0.0, 1.0
        else:
            t_stat = float(np.sign(oc_a[0] - oc_b[0])) * float("inf")
            p_value = 0.0
    else:
        res = stats.ttest_ind(oc_a, oc_b, equal_var=False)
        t_stat, p_value = float(res.statistic), float(res.pvalue)
    if p_value < alpha and mean_a < mean_b:
        oc_verdict = "better"
    elif p_value < alpha and mean_a > mean_b:
        oc_verdict = "worse"
    else:
        oc_verdict = "indistinguishable"
    p_a = float(np.mean([bool(r[1]) for r in rows_a]))
    p_b = float(np.mean([bool(r[1]) for r in rows_b]))
    diff = p_a - p_b
    se = float(np.sqrt(p_a * (1 - p_a) / n_a + p_b * (1 - p_b) / n_b))
    ci_low, ci_high = diff - CONFIDENCE_Z * se, diff + CONFIDENCE_Z * se
    if ci_low > 0.0:
        selection_verdict = "better"
    elif ci_high < 0.0:
        selection_verdict = "worse"
    else:
        selection_verdict = "indistinguishable"
    return ComparisonResult(
        n_a=n_a,
        n_b=n_b,
        mean_oc_a=mean_a,
        mean_oc_b=mean_b,
        t_stat=t_stat,
        p_value=p_value,
        oc_verdict=oc_verdict,
        share_correct_a=p_a,
        share_correct_b=p_b,
        diff_correct=diff,
        ci_low=ci_low,
        ci_high=ci_high,
        selection_verdict=selection_verdict,
    )


def final_rows(traces: Sequence[RunTrace]) -> list[tuple[float, bool]]:
    """Per-run (final opportunity cost, final correct) pairs for compare()."""
    return [(float(tr.oc[-1]), bool(tr.correct[-1])) for tr in traces]


@dataclass(frozen=True)
class SamplingBehavior:
    """Where a policy actually spent its samples, averaged over runs."""

    runs: int
    m: int
    k: int
    mean_distinct_pairs: float
    share_by_rank: tuple[float, ...]
    share_by_attribute: tuple[float, ...]


def sampling_behavior(traces: Sequence[RunTrace]) -> SamplingBehavior:
    """Sample shares by true-utility rank and by attribute.

    Rank 0 is the alternative with the highest true utility in each
    trace's instance (ties broken toward lower index), so the first
    share entry answers "what fraction of the budget went to the true
    best". All traces must come from instances of one shape.
    """
    if not traces:
        raise ValueError("no traces given")
    m = traces[0].m
    k = traces[0].k
    if m == 0 or k == 0:
        raise ValueError("traces lack instance shape information")
    by_rank = np.zeros(m)
    by_attr = np.zeros(k)
    distinct = 0
    for tr in traces:
        if tr.m != m or tr.k != k or len(tr.true_utility_ranks) != m:
            raise ValueError("traces mix instance shapes")
        t = tr.budget
        alt_counts = np.bincount(tr.alt, minlength=m) / t
        for i, r in enumerate(tr.true_utility_ranks):
            by_rank[r] += alt_counts[i]
        by_attr += np.bincount(tr.attr, minlength=k) / t
        distinct += tr.distinct_pairs()
    n = len(traces)
    return SamplingBehavior(
        runs=n,
        m=m,
        k=k,
        mean_distinct_pairs=distinct / n,
        share_by_rank=tuple((by_rank / n).tolist()),
        share_by_attribute=tuple((by_attr / n).tolist()),
    )


def write_trace_csv(traces: Sequence[RunTrace], path: str | Path) -> None:
    """Write traces as CSV (UTF-8, LF): one row per stage per run.

    Floats are written with repr precision so reading the file back
    reproduces them exactly.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for tr in traces:
            for s in range(tr.budget):
                writer.writerow(
                    (
                        tr.instance_id,
                        tr.replication,
                        tr.uniform_phase,
                        tr.rule,
                        int(tr.stage[s]),
                        int(tr.alt[s]),
                        int(tr.attr[s]),
                        int(tr.sample[s]),
                        int(tr.selected[s]),
                        repr(float(tr.oc[s])),
                        int(tr.correct[s]),
                        repr(float(tr.entropy[s])),
                        repr(float(tr.ms[s])),
                    )
                )


def read_trace_csv(path: str | Path) -> list[RunTrace]:
    """Read a trace CSV written by write_trace_csv.

    Instance shape and cell metadata are not part of the wire format;
    callers that need them (rank-based behavior summaries, grouping by
    cell) should fill them in afterwards from the instance records.
    """
    runs: dict[tuple, dict[str, list]] = {}
    order: list[tuple] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace header {header!r}")
        for row in reader:
            key = (row[0], int(row[1]), int(row[2]), row[3])
            if key not in runs:
                runs[key] = {c: [] for c in TRACE_COLUMNS[4:]}
                order.append(key)
            cols = runs[key]
            cols["stage"].append(int(row[4]))
            cols["alt"].append(int(row[5]))
            cols["attr"].append(int(row[6]))
            cols["sample"].append(int(row[7]))
            cols["selected"].append(int(row[8]))
            cols["oc"].append(float(row[9]))
            cols["correct"].append(bool(int(row[10])))
            cols["entropy"].append(float(row[11]))
            cols["ms"].append(float(row[12]))
    traces = []
    for key in order:
        cols = runs[key]
        traces.append(
            RunTrace(
                instance_id=key[0],
                set_name="",
                value_kind="",
                utility_kind="",
                replication=key[1],
                uniform_phase=key[2],
                rule=key[3],
                m=0,
                k=0,
                stage=np.array(cols["stage"], dtype=np.int64),
                alt=np.array(cols["alt"], dtype=np.int64),
                attr=np.array(cols["attr"], dtype=np.int64),
                sample=np.array(cols["sample"], dtype=np.int64),
                selected=np.array(cols["selected"], dtype=np.int64),
                oc=np.array(cols["oc"]),
                correct=np.array(cols["correct"], dtype=bool),
                entropy=np.array(cols["entropy"]),
                ms=np.array(cols["ms"]),
            )
        )
    return traces
