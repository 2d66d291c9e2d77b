"""Sample allocation policies and the policy runner.

The uniform policy cycles deterministically through every
(alternative, attribute) pair. The sequential policies score every
pair by what one more sample of it is expected to do to a selection
criterion: the best alternative's mean utility for rule "I", its
probability of truly being best for rule "II". Each criterion is a
martingale under the predictive distribution of the next sample, so
scores never fall below the criterion's current value and the surplus
is exactly the expected value of the information in that sample.
Hybrid policies spend the first part of the budget uniformly, then
hand over to a sequential rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from time import perf_counter
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .belief import (
    BeliefState,
    apply_sample,
    init_uniform,
    prob_best,
    select_rule_I,
)
from .instances import Instance, draw_sample
from .pmf import ErrorModel
from .preference import ValueLattice
from .trace import RunTrace, allocation_entropy

RULES = ("I", "II")


class NotMultiple(ValueError):
    """Uniform sample count does not fill whole round-robin cycles."""


@dataclass(frozen=True)
class PolicyConfig:
    """A sampling budget split into a uniform phase and a sequential rule.

    ``uniform_phase`` equal to ``budget`` is the pure uniform policy;
    zero hands every sample to the sequential rule. The rule also
    determines which alternative the runner reports as its selection
    at every stage.
    """

    budget: int
    uniform_phase: int
    rule: str

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be positive")
        if not 0 <= self.uniform_phase <= self.budget:
            raise ValueError("uniform phase must lie within the budget")
        if self.rule not in RULES:
            raise ValueError(f"unknown rule {self.rule!r}")

    @property
    def label(self) -> str:
        return f"H{self.uniform_phase:03d}-{self.rule}"


def standard_policies(
    budget: int = 180,
    uniform_phases: Sequence[int] = (0, 36, 72, 108, 144, 180),
    rules: Sequence[str] = RULES,
) -> list[PolicyConfig]:
    """The usual policy grid: every uniform phase crossed with every rule."""
    return [PolicyConfig(budget, h, r) for h in uniform_phases for r in rules]


def uniform_schedule(m: int, k: int, count: int) -> list[tuple[int, int]]:
    """Round-robin order over pairs: alternatives cycle fastest.

    ``count`` must cover whole cycles, i.e. be a multiple of m * k, so
    the uniform phase leaves every pair with the same sample count.
    """
    if count % (m * k) != 0:
        raise NotMultiple(f"{count} samples do not fill cycles of {m * k} pairs")
    return [
        (i, j)
        for _ in range(count // (m * k))
        for j in range(k)
        for i in range(m)
    ]


@lru_cache(maxsize=64)
def _likelihoods(error: ErrorModel, max_magnitude: int) -> tuple[np.ndarray, np.ndarray]:
    """Sample values and likelihood table for magnitudes 1..max_magnitude."""
    return error.likelihood_matrix(np.arange(1, max_magnitude + 1))


def _loo_rests(lattice: ValueLattice, mag_row: np.ndarray) -> list[tuple[np.ndarray, int]]:
    """Leave-one-out key distributions for one alternative.

    Entry j is the distribution of the key contributions of every
    attribute except j, as (dense array, start key). Computed with
    prefix/suffix convolutions so the whole list costs about three
    convolution chains instead of k separate ones.
    """
    k = mag_row.shape[0]
    contribs = [lattice.contribution_dense(j, mag_row[j]) for j in range(k)]
    unit = (np.ones(1), 0)
    prefix = [unit]
    for arr, start in contribs[:-1]:
        p, s = prefix[-1]
        prefix.append((np.convolve(p, arr), s + start))
    suffix = [unit]
    for arr, start in reversed(contribs[1:]):
        p, s = suffix[0]
        suffix.insert(0, (np.convolve(p, arr), s + start))
    out = []
    for j in range(k):
        pa, ps = prefix[j]
        sa, ss = suffix[j]
        out.append((np.convolve(pa, sa), ps + ss))
    return out


def _posterior_block(
    prior: np.ndarray, error: ErrorModel, max_magnitude: int
) -> tuple[np.ndarray, np.ndarray]:
    """Predictive sample probabilities and per-sample posterior rows.

    Returns (ps, posts): ps[w] is the predictive probability of each
    reachable sample value with zero-probability values dropped, and
    posts[w] the posterior magnitude distribution after observing it.
    """
    _, L = _likelihoods(error, max_magnitude)
    ps = L @ prior
    keep = ps > 0.0
    posts = L[keep] * prior / ps[keep][:, None]
    return ps[keep], posts


def _others_max(values: np.ndarray) -> np.ndarray:
    """For each index, the maximum of the other entries."""
    top = int(np.argmax(values))
    second = float(np.delete(values, top).max())
    out = np.full(len(values), float(values[top]))
    out[top] = second
    return out


def _scores_rule_I(state: BeliefState, error_models: Sequence[ErrorModel]) -> np.ndarray:
    lat = state.lattice
    m, k = state.m, state.k
    scores = np.empty((m, k))
    others = _others_max(state.zmeans)
    u = lat.utilities
    for i in range(m):
        rests = _loo_rests(lat, state.mag[i])
        for j in range(k):
            ps, posts = _posterior_block(state.mag[i, j], error_models[j], lat.max_magnitude)
            rest, rstart = rests[j]
            # mean utility after seeing magnitude x: window of the utility
            # table starting at x's key contribution, weighted by the rest
            starts = rstart + lat.contrib_keys[j] - lat.key_min
            g = sliding_window_view(u, len(rest))[starts] @ rest
            new_means = posts @ g
            scores[i, j] = ps @ np.maximum(new_means, others[i])
    return scores


def _scores_rule_II(state: BeliefState, error_models: Sequence[ErrorModel]) -> np.ndarray:
    lat = state.lattice
    m, k = state.m, state.k
    Z = state.zdense
    cols = np.nonzero(Z.any(axis=0))[0]
    lo, hi = int(cols[0]), int(cols[-1]) + 1
    Zw = Z[:, lo:hi]
    width = hi - lo
    F = np.cumsum(Zw, axis=1)
    S = F - Zw
    scores = np.empty((m, k))
    for i in range(m):
        # W[h] weights "h beats every rival other than i": strictly above
        # all lower-indexed ones, at or above all higher-indexed ones.
        # Row i, whose own factor is never included, is the candidate's
        # weight curve against all rivals.
        W = np.empty((m, width))
        acc = np.ones(width)
        for h in range(m):
            W[h] = acc
            if h != i:
                acc = acc * S[h]
        acc = np.ones(width)
        for h in range(m - 1, -1, -1):
            W[h] *= acc
            if h != i:
                acc = acc * F[h]
        D = Zw * W
        Dlt = D[:i]
        Dgt = D[i + 1 :]
        rests = _loo_rests(lat, state.mag[i])
        for j in range(k):
            prior = state.mag[i, j]
            ps, posts = _posterior_block(prior, error_models[j], lat.max_magnitude)
            rest, rstart = rests[j]
            R = np.zeros((lat.max_magnitude, width))
            base = rstart - lat.key_min - lo + lat.contrib_keys[j]
            for x in np.nonzero(prior)[0]:
                c0 = int(base[x])
                R[x, c0 : c0 + len(rest)] = rest
            Znew = posts @ R
            Fz = np.cumsum(Znew, axis=1)
            f = Znew @ W[i]
            if len(Dlt):
                # rivals below i see the candidate through a non-strict cdf
                np.maximum(f, (Fz @ Dlt.T).max(axis=1), out=f)
            if len(Dgt):
                np.maximum(f, ((Fz - Znew) @ Dgt.T).max(axis=1), out=f)
            scores[i, j] = ps @ f
    return scores


def lookahead_scores(
    state: BeliefState, error_models: Sequence[ErrorModel], rule: str
) -> np.ndarray:
    """Expected post-sample criterion value for every (alternative, attribute).

    Rule "I" scores a pair by the expectation, over the pair's
    predictive sample distribution, of the best mean utility after the
    update. Rule "II" does the same for the best probability of being
    best. Beliefs about unsampled pairs are left untouched by each
    hypothetical update.
    """
    if rule not in RULES:
        raise ValueError(f"unknown rule {rule!r}")
    if len(error_models) != state.k:
        raise ValueError("one error model per attribute required")
    if rule == "I":
        return _scores_rule_I(state, error_models)
    return _scores_rule_II(state, error_models)


def next_pair(scores: np.ndarray) -> tuple[int, int]:
    """Highest-scoring pair; ties go to the lowest alternative, then attribute."""
    flat = int(np.argmax(scores))
    k = scores.shape[1]
    return flat // k, flat % k


def run_policy(
    instance: Instance,
    config: PolicyConfig,
    rng: np.random.Generator,
    replication: int = 0,
    validate: bool = False,
    lattice: ValueLattice | None = None,
) -> RunTrace:
    """Run one policy on one instance and record every stage.

    At each stage the runner allocates a sample (round-robin during
    the uniform phase, by lookahead score afterwards), updates the
    belief state, and records the alternative the configured rule
    would select, its opportunity cost against the true utilities,
    whether that selection is truly best, the allocation entropy, and
    cumulative wall time. With ``validate=True`` it also tracks the
    worst belief-normalization and probability-of-best deviations seen
    at any stage.
    """
    t_start = perf_counter()
    if lattice is None:
        lattice = ValueLattice(instance.vspec, instance.uspec)
    m, k = instance.m, instance.k
    state = init_uniform(m, k, instance.max_magnitude, instance.vspec, instance.uspec, lattice)
    errors = instance.error_models
    keys = [lattice.key_of(row) for row in instance.mu]
    xi = np.array([lattice.utility_of_key(key) for key in keys])
    best_key = max(keys)
    best_set = {i for i, key in enumerate(keys) if key == best_key}
    xi_star = lattice.utility_of_key(best_key)
    order = sorted(range(m), key=lambda a: (-keys[a], a))
    ranks = [0] * m
    for r, a in enumerate(order):
        ranks[a] = r
    schedule = uniform_schedule(m, k, config.uniform_phase)
    counts = np.zeros((m, k), dtype=np.int64)
    T = config.budget
    alt = np.empty(T, dtype=np.int64)
    attr = np.empty(T, dtype=np.int64)
    sample = np.empty(T, dtype=np.int64)
    selected = np.empty(T, dtype=np.int64)
    oc = np.empty(T)
    correct = np.empty(T, dtype=bool)
    entropy = np.empty(T)
    ms = np.empty(T)
    max_sum_dev = 0.0
    max_usum_dev = 0.0
    max_pb_dev = 0.0
    for t in range(1, T + 1):
        if t <= config.uniform_phase:
            i, j = schedule[t - 1]
        else:
            i, j = next_pair(lookahead_scores(state, errors, config.rule))
        w = draw_sample(instance, i, j, rng)
        state = apply_sample(state, i, j, w, errors[j])
        counts[i, j] += 1
        if config.rule == "I":
            b = select_rule_I(state)
            if validate:
                P = prob_best(state)
        else:
            P = prob_best(state)
            b = int(np.argmax(P))
        if validate:
            max_sum_dev = max(
                max_sum_dev, float(np.abs(state.mag.sum(axis=2) - 1.0).max())
            )
            max_usum_dev = max(
                max_usum_dev, float(np.abs(state.zdense.sum(axis=1) - 1.0).max())
            )
            max_pb_dev = max(max_pb_dev, abs(float(P.sum()) - 1.0))
        idx = t - 1
        alt[idx] = i
        attr[idx] = j
        sample[idx] = w
        selected[idx] = b
        oc[idx] = xi_star - xi[b]
        correct[idx] = b in best_set
        entropy[idx] = allocation_entropy(counts, t)
        ms[idx] = (perf_counter() - t_start) * 1000.0
    return RunTrace(
        instance_id=instance.instance_id,
        set_name=instance.set_name,
        value_kind=instance.vspec.kind,
        utility_kind=instance.uspec.kind,
        replication=replication,
        uniform_phase=config.uniform_phase,
        rule=config.rule,
        m=m,
        k=k,
        stage=np.arange(1, T + 1),
        alt=alt,
        attr=attr,
        sample=sample,
        selected=selected,
        oc=oc,
        correct=correct,
        entropy=entropy,
        ms=ms,
        true_utility_ranks=tuple(ranks),
        max_belief_sum_dev=max_sum_dev if validate else None,
        max_util_sum_dev=max_usum_dev if validate else None,
        max_prob_best_dev=max_pb_dev if validate else None,
    )
