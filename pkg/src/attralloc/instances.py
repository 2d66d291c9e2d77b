"""Benchmark problem sets and random instance generation.

Two fixed problem-set shapes are provided. Set "A" has twelve
alternatives with three attributes, set "B" nine alternatives with
four attributes; both use integer magnitudes 1..15 and additive
integer measurement errors on -3..3 drawn from per-attribute tables.
The table rows are quoted to three decimals and do not sum to one
exactly, so they are renormalized when loaded; the quoted standard
deviations are kept as labels.

Instances hide one deliberate structural feature: magnitudes are
generated so that one randomly chosen anchor attribute trades off
against a weighted power mean of the others, which keeps alternatives
close in value and makes identifying the best one genuinely hard.
"""

from __future__ import annotations

from dataclasses import dataclass
import json
from pathlib import Path

import numpy as np

from .pmf import ErrorModel, Pmf
from .preference import UtilityFunctionSpec, ValueFunctionSpec, ValueLattice

ERROR_OFFSETS = tuple(range(-3, 4))

# (probabilities for offsets -3..3, quoted standard deviation)
_ERROR_ROWS = {
    "A": (
        ((0.020, 0.116, 0.211, 0.307, 0.211, 0.116, 0.020), 1.31),
        ((0.080, 0.129, 0.178, 0.227, 0.178, 0.129, 0.080), 1.68),
        ((0.140, 0.142, 0.144, 0.147, 0.144, 0.142, 0.140), 1.99),
    ),
    "B": (
        ((0.020, 0.116, 0.211, 0.307, 0.211, 0.116, 0.020), 1.31),
        ((0.060, 0.124, 0.189, 0.253, 0.189, 0.124, 0.060), 1.57),
        ((0.100, 0.133, 0.167, 0.200, 0.167, 0.133, 0.100), 1.79),
        ((0.140, 0.142, 0.144, 0.147, 0.144, 0.142, 0.140), 1.99),
    ),
}

_SET_SHAPES = {"A": (12, 3), "B": (9, 4)}

PROBLEM_SETS = tuple(_SET_SHAPES)

MAX_MAGNITUDE = 15


class UnknownSet(ValueError):
    """Requested problem set name is not defined."""


def error_table(set_name: str) -> tuple[ErrorModel, ...]:
    """The measurement-error models of a problem set, renormalized."""
    if set_name not in _ERROR_ROWS:
        raise UnknownSet(f"no problem set named {set_name!r}")
    return tuple(
        ErrorModel(Pmf(ERROR_OFFSETS, probs), std_dev)
        for probs, std_dev in _ERROR_ROWS[set_name]
    )


@dataclass(frozen=True)
class ProblemSetSpec:
    """Shape of a benchmark problem set."""

    name: str
    m: int
    k: int
    max_magnitude: int
    error_rows: tuple[ErrorModel, ...]

    def __post_init__(self):
        if self.m < 2 or self.k < 2:
            raise ValueError("need at least two alternatives and two attributes")
        if len(self.error_rows) != self.k:
            raise ValueError("one error row per attribute required")


def problem_set(name: str) -> ProblemSetSpec:
    if name not in _SET_SHAPES:
        raise UnknownSet(f"no problem set named {name!r}")
    m, k = _SET_SHAPES[name]
    return ProblemSetSpec(name, m, k, MAX_MAGNITUDE, error_table(name))


@dataclass(frozen=True, eq=False)
class Instance:
    """One selection problem: true magnitudes plus its error models.

    ``error_assignment[j]`` records which row of the set's error table
    was permuted onto attribute j. The generator latents (anchor
    attribute, exponent, weights) are retained for auditing; the
    anchor's slots in the weight tuples are zero.
    """

    instance_id: str
    set_name: str
    m: int
    k: int
    max_magnitude: int
    mu: np.ndarray
    error_assignment: tuple[int, ...]
    error_models: tuple[ErrorModel, ...]
    vspec: ValueFunctionSpec
    uspec: UtilityFunctionSpec
    anchor_attr: int
    exponent: float
    raw_weights: tuple[float, ...]
    weights: tuple[float, ...]
    seed_entropy: tuple[int, ...] | None = None

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.int64)
        mu.flags.writeable = False
        object.__setattr__(self, "mu", mu)
        if mu.shape != (self.m, self.k):
            raise ValueError("mu must have shape (m, k)")
        if mu.min() < 1 or mu.max() > self.max_magnitude:
            raise ValueError(f"magnitudes must lie in 1..{self.max_magnitude}")
        if sorted(self.error_assignment) != list(range(self.k)):
            raise ValueError("error assignment must be a permutation of the rows")
        if len(self.error_models) != self.k:
            raise ValueError("one error model per attribute required")
        if self.vspec.k != self.k:
            raise ValueError("value spec does not match the attribute count")
        if not 0 <= self.anchor_attr < self.k:
            raise ValueError("anchor attribute out of range")
        off_anchor = sum(
            w for j, w in enumerate(self.weights) if j != self.anchor_attr
        )
        if abs(off_anchor - 1.0) > 1e-9:
            raise ValueError("off-anchor weights must sum to one")


def generate_instance(
    spec: ProblemSetSpec,
    value_kind: str,
    utility_kind: str,
    rng: np.random.Generator,
    instance_id: str | None = None,
    seed_entropy: tuple[int, ...] | None = None,
) -> Instance:
    """Draw one random instance of a problem set.

    The draw order is fixed (anchor, exponent, weights, magnitude
    latents by alternative then attribute, error permutation, risk
    gamma), so a given generator state always yields the same
    instance.

    For each alternative, latent scores in [0, 1) are drawn for every
    non-anchor attribute and the anchor's score is set to one minus
    the weighted sum of the others raised to the exponent; this keeps
    overall values close across alternatives. Scores map to integer
    magnitudes by mu = 1 + floor(score * max_magnitude), capped at
    max_magnitude.
    """
    m, k = spec.m, spec.k
    anchor = int(rng.integers(k))
    exponent = float(rng.uniform(1.0, 3.0))
    raw = np.zeros(k)
    for j in range(k):
        if j != anchor:
            raw[j] = rng.uniform(0.0, 1.0)
    weights = np.zeros(k)
    total = raw.sum()
    for j in range(k):
        if j != anchor:
            weights[j] = raw[j] / total
    mu = np.zeros((m, k), dtype=np.int64)
    for i in range(m):
        scores = np.zeros(k)
        for j in range(k):
            if j != anchor:
                scores[j] = rng.random()
        scores[anchor] = 1.0 - float(
            sum(weights[j] * scores[j] ** exponent for j in range(k) if j != anchor)
        )
        mu[i] = np.minimum(
            1 + np.floor(scores * spec.max_magnitude).astype(np.int64),
            spec.max_magnitude,
        )
    assignment = tuple(int(r) for r in rng.permutation(k))
    models = tuple(spec.error_rows[r] for r in assignment)
    if utility_kind == "exponential":
        uspec = UtilityFunctionSpec("exponential", float(rng.uniform(1.0, 10.0)))
    else:
        uspec = UtilityFunctionSpec(utility_kind)
    vspec = ValueFunctionSpec.uniform(value_kind, k, spec.max_magnitude)
    if instance_id is None:
        instance_id = f"{spec.name}-{value_kind}-{ukind_code(utility_kind)}-x"
    return Instance(
        instance_id=instance_id,
        set_name=spec.name,
        m=m,
        k=k,
        max_magnitude=spec.max_magnitude,
        mu=mu,
        error_assignment=assignment,
        error_models=models,
        vspec=vspec,
        uspec=uspec,
        anchor_attr=anchor,
        exponent=exponent,
        raw_weights=tuple(raw.tolist()),
        weights=tuple(weights.tolist()),
        seed_entropy=seed_entropy,
    )


def ukind_code(utility_kind: str) -> str:
    """Short file-name code for a utility kind."""
    codes = {"risk-neutral": "rn", "exponential": "ra"}
    if utility_kind not in codes:
        raise ValueError(f"unknown utility kind: {utility_kind!r}")
    return codes[utility_kind]


def true_utility_ranks(instance: "Instance") -> tuple[int, ...]:
    """Rank of each alternative by true utility: 0 is best, ties to lower index."""
    lattice = ValueLattice(instance.vspec, instance.uspec)
    keys = [lattice.key_of(row) for row in instance.mu]
    order = sorted(range(instance.m), key=lambda i: (-keys[i], i))
    ranks = [0] * instance.m
    for r, i in enumerate(order):
        ranks[i] = r
    return tuple(ranks)


def draw_sample(instance: Instance, i: int, j: int, rng: np.random.Generator) -> int:
    """One noisy measurement of attribute j of alternative i.

    The result is the true magnitude plus an error offset and can fall
    outside 1..max_magnitude; consumers must not clamp it, because the
    likelihood of an out-of-range sample still discriminates between
    interior magnitudes.
    """
    return int(instance.mu[i, j]) + instance.error_models[j].sample_offset(rng)


def save_instance(instance: Instance, path: str | Path) -> None:
    """Write an instance to a human-readable JSON file."""
    payload = {
        "instance_id": instance.instance_id,
        "set": instance.set_name,
        "m": instance.m,
        "k": instance.k,
        "max_magnitude": instance.max_magnitude,
        "value_kind": instance.vspec.kind,
        "utility_kind": instance.uspec.kind,
        "gamma": instance.uspec.gamma,
        "mu": instance.mu.tolist(),
        "error_assignment": list(instance.error_assignment),
        "anchor_attr": instance.anchor_attr,
        "exponent": instance.exponent,
        "raw_weights": list(instance.raw_weights),
        "weights": list(instance.weights),
        "seed_entropy": list(instance.seed_entropy) if instance.seed_entropy else None,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_instance(path: str | Path) -> Instance:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    spec = problem_set(payload["set"])
    assignment = tuple(payload["error_assignment"])
    uspec = UtilityFunctionSpec(payload["utility_kind"], payload["gamma"])
    return Instance(
        instance_id=payload["instance_id"],
        set_name=payload["set"],
        m=payload["m"],
        k=payload["k"],
        max_magnitude=payload["max_magnitude"],
        mu=np.asarray(payload["mu"], dtype=np.int64),
        error_assignment=assignment,
        error_models=tuple(spec.error_rows[r] for r in assignment),
        vspec=ValueFunctionSpec.uniform(payload["value_kind"], payload["k"], payload["max_magnitude"]),
        uspec=uspec,
        anchor_attr=payload["anchor_attr"],
        exponent=payload["exponent"],
        raw_weights=tuple(payload["raw_weights"]),
        weights=tuple(payload["weights"]),
        seed_entropy=tuple(payload["seed_entropy"]) if payload.get("seed_entropy") else None,
    )
