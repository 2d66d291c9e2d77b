"""Multi-attribute value and utility functions on integer magnitude grids.

Two value function shapes are supported. Kind "A" is an additive
weighted average with weights proportional to the attribute index, so
later attributes matter more. Kind "B" is a compensating
root-mean-square shape that rewards balanced profiles. Both are
monotone transforms of an integer statistic of the magnitude vector
(a weighted sum for "A", a sum of squares for "B"), which is what the
ValueLattice exploits: distributions over value, and therefore over
utility, can be carried exactly on a small integer grid instead of
enumerating every magnitude vector.
"""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Sequence

import numpy as np

from .pmf import Pmf

VALUE_KINDS = ("A", "B")
UTILITY_KINDS = ("risk-neutral", "exponential")
GAMMA_RANGE = (1.0, 10.0)


class OutOfRange(ValueError):
    """A magnitude or value argument lies outside its declared domain."""


@dataclass(frozen=True)
class ValueFunctionSpec:
    """Shape of the scalar value assigned to a magnitude vector.

    kind "A": sum over attributes of (j / (1 + ... + k)) * (x_j / max_j),
    with 1-based attribute index j. kind "B": sqrt of the mean of
    (x_j / max_j)^2. Both map into [0, 1] with 1 attained only at the
    all-max vector.
    """

    kind: str
    k: int
    max_magnitudes: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in VALUE_KINDS:
            raise ValueError(f"unknown value kind {self.kind!r}")
        if self.k < 2:
            raise ValueError("need at least two attributes")
        object.__setattr__(self, "max_magnitudes", tuple(int(x) for x in self.max_magnitudes))
        if len(self.max_magnitudes) != self.k:
            raise ValueError("one magnitude bound per attribute required")
        if any(mx < 1 for mx in self.max_magnitudes):
            raise ValueError("magnitude bounds must be positive")

    @classmethod
    def uniform(cls, kind: str, k: int, max_magnitude: int = 15) -> "ValueFunctionSpec":
        return cls(kind, k, (max_magnitude,) * k)

    @property
    def weight_total(self) -> int:
        """1 + 2 + ... + k, the normalizer of the kind "A" weights."""
        return self.k * (self.k + 1) // 2


@dataclass(frozen=True)
class UtilityFunctionSpec:
    """Utility of value: identity, or normalized concave exponential.

    The exponential form is (1 - exp(-gamma * v)) / (1 - exp(-gamma))
    with risk aversion gamma in [1, 10]; it fixes U(0) = 0 and
    U(1) = 1 like the risk-neutral form.
    """

    kind: str
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in UTILITY_KINDS:
            raise ValueError(f"unknown utility kind {self.kind!r}")
        if self.kind == "exponential":
            if self.gamma is None:
                raise ValueError("exponential utility requires gamma")
            if not GAMMA_RANGE[0] <= self.gamma <= GAMMA_RANGE[1]:
                raise ValueError(f"gamma must lie in {GAMMA_RANGE}")
            object.__setattr__(self, "gamma", float(self.gamma))
        elif self.gamma is not None:
            raise ValueError("risk-neutral utility takes no gamma")


def single_attr_value(x: int, max_x: int) -> float:
    """Per-attribute value x / max_x for integer x in 1..max_x."""
    if not 1 <= x <= max_x:
        raise OutOfRange(f"magnitude {x} outside 1..{max_x}")
    return x / max_x


def value(vspec: ValueFunctionSpec, magnitudes: Sequence[int]) -> float:
    """Scalar value of a full magnitude vector."""
    if len(magnitudes) != vspec.k:
        raise OutOfRange(f"expected {vspec.k} magnitudes, got {len(magnitudes)}")
    parts = [
        single_attr_value(int(x), mx)
        for x, mx in zip(magnitudes, vspec.max_magnitudes)
    ]
    if vspec.kind == "A":
        b = vspec.weight_total
        return sum((j + 1) / b * v for j, v in enumerate(parts))
    return math.sqrt(sum(v * v for v in parts) / vspec.k)


def utility(uspec: UtilityFunctionSpec, v: float) -> float:
    """Utility of a value in [0, 1]."""
    if not 0.0 <= v <= 1.0:
        raise OutOfRange(f"value {v} outside [0, 1]")
    if uspec.kind == "risk-neutral":
        return v
    g = uspec.gamma
    return (1.0 - math.exp(-g * v)) / (1.0 - math.exp(-g))


class ValueLattice:
    """Exact integer keying of magnitude vectors, ordered like value.

    Every magnitude vector x maps to an integer key: sum of j * x_j
    (1-based j) for kind "A", sum of x_j^2 for kind "B". The key
    determines the value exactly, key order equals value order, and
    keys add across attributes, so distributions over utility are
    computed by convolving per-attribute contribution arrays over at
    most key_max - key_min + 1 integer cells. This only works when all
    attributes share one magnitude bound, which construction enforces.
    """

    __slots__ = (
        "vspec",
        "uspec",
        "max_magnitude",
        "contrib_keys",
        "key_min",
        "key_max",
        "size",
        "values",
        "utilities",
    )

    def __init__(self, vspec: ValueFunctionSpec, uspec: UtilityFunctionSpec):
        maxes = set(vspec.max_magnitudes)
        if len(maxes) != 1:
            raise ValueError(
                "integer value keys need a shared magnitude bound across attributes"
            )
        self.vspec = vspec
        self.uspec = uspec
        self.max_magnitude = vspec.max_magnitudes[0]
        x = np.arange(1, self.max_magnitude + 1, dtype=np.int64)
        if vspec.kind == "A":
            self.contrib_keys = tuple((j + 1) * x for j in range(vspec.k))
        else:
            self.contrib_keys = tuple(x * x for _ in range(vspec.k))
        self.key_min = int(sum(ck[0] for ck in self.contrib_keys))
        self.key_max = int(sum(ck[-1] for ck in self.contrib_keys))
        self.size = self.key_max - self.key_min + 1
        keys = np.arange(self.key_min, self.key_max + 1)
        self.values = self._values_of_keys(keys)
        self.utilities = self._utilities_of_values(self.values)

    def _values_of_keys(self, keys: np.ndarray) -> np.ndarray:
        v = self.vspec
        if v.kind == "A":
            return keys / (v.weight_total * self.max_magnitude)
        return np.sqrt(keys / (v.k * self.max_magnitude**2))

    def _utilities_of_values(self, values: np.ndarray) -> np.ndarray:
        u = self.uspec
        if u.kind == "risk-neutral":
            return values.copy()
        return (1.0 - np.exp(-u.gamma * values)) / (1.0 - math.exp(-u.gamma))

    def key_of(self, magnitudes: Sequence[int]) -> int:
        if len(magnitudes) != self.vspec.k:
            raise OutOfRange(
                f"expected {self.vspec.k} magnitudes, got {len(magnitudes)}"
            )
        total = 0
        for j, x in enumerate(magnitudes):
            x = int(x)
            if not 1 <= x <= self.max_magnitude:
                raise OutOfRange(f"magnitude {x} outside 1..{self.max_magnitude}")
            total += int(self.contrib_keys[j][x - 1])
        return total

    def value_of_key(self, key: int) -> float:
        self._check_key(key)
        return float(self.values[key - self.key_min])

    def utility_of_key(self, key: int) -> float:
        self._check_key(key)
        return float(self.utilities[key - self.key_min])

    def _check_key(self, key: int):
        if not self.key_min <= key <= self.key_max:
            raise OutOfRange(f"key {key} outside {self.key_min}..{self.key_max}")

    def contribution_dense(self, j: int, probs: np.ndarray) -> tuple[np.ndarray, int]:
        """Distribution of attribute j's key contribution as a dense array.

        ``probs`` is indexed by magnitude - 1 over the full 1..max grid.
        Returns (arr, start_key) trimmed to the nonzero key window.
        """
        keys = self.contrib_keys[j]
        nz = np.nonzero(probs)[0]
        lo, hi = nz[0], nz[-1]
        start = int(keys[lo])
        arr = np.zeros(int(keys[hi]) - start + 1)
        arr[keys[lo : hi + 1] - start] = probs[lo : hi + 1]
        return arr, start

    def dense_dist(self, mag_probs: np.ndarray) -> np.ndarray:
        """Distribution of the total key for one alternative.

        ``mag_probs`` has shape (k, max_magnitude): row j is the belief
        over attribute j's magnitude. Independence across attributes is
        assumed, so the total-key distribution is the convolution of
        the per-attribute contributions, returned dense over the full
        key_min..key_max grid.
        """
        acc, start = self.contribution_dense(0, mag_probs[0])
        for j in range(1, self.vspec.k):
            arr, s = self.contribution_dense(j, mag_probs[j])
            acc = np.convolve(acc, arr)
            start += s
        out = np.zeros(self.size)
        out[start - self.key_min : start - self.key_min + len(acc)] = acc
        return out

    def pmf_of_dense(self, dense: np.ndarray) -> Pmf:
        support = np.nonzero(dense)[0]
        return Pmf(support + self.key_min, dense[support])


def utility_distribution(
    beliefs: Sequence[Pmf],
    vspec: ValueFunctionSpec,
    uspec: UtilityFunctionSpec,
    lattice: ValueLattice | None = None,
) -> Pmf:
    """Exact distribution of an alternative's utility under magnitude beliefs.

    Returns a Pmf over integer lattice keys; map keys through
    ``lattice.utility_of_key`` (or ``value_of_key``) for real
    utilities. Computed by convolution over the integer key grid, never
    by enumerating magnitude vectors, so cost grows with the key span
    rather than with the product of support sizes.
    """
    if lattice is None:
        lattice = ValueLattice(vspec, uspec)
    if len(beliefs) != vspec.k:
        raise OutOfRange("one belief per attribute required")
    mag_probs = np.zeros((vspec.k, lattice.max_magnitude))
    for j, b in enumerate(beliefs):
        if b.support[0] < 1 or b.support[-1] > lattice.max_magnitude:
            raise OutOfRange(
                f"belief support for attribute {j} escapes 1..{lattice.max_magnitude}"
            )
        mag_probs[j, b.support - 1] = b.probs
    return lattice.pmf_of_dense(lattice.dense_dist(mag_probs))


def enumerate_utility_distribution(
    beliefs: Sequence[Pmf],
    vspec: ValueFunctionSpec,
    uspec: UtilityFunctionSpec,
    merge_tol: float = 1e-12,
) -> tuple[np.ndarray, np.ndarray]:
    """Utility distribution by brute-force enumeration of magnitude vectors.

    Fallback and cross-check path; cost is the product of the belief
    support sizes. Returns (utilities, probs) sorted by utility, with
    utilities closer than ``merge_tol`` merged. Unlike
    ``utility_distribution`` it does not require a shared magnitude
    bound.
    """
    if len(beliefs) != vspec.k:
        raise OutOfRange("one belief per attribute required")
    pairs: dict[float, float] = {}
    idx = [0] * vspec.k
    sizes = [len(b) for b in beliefs]
    while True:
        mags = [int(beliefs[j].support[idx[j]]) for j in range(vspec.k)]
        p = 1.0
        for j in range(vspec.k):
            p *= float(beliefs[j].probs[idx[j]])
        u = utility(uspec, value(vspec, mags))
        pairs[u] = pairs.get(u, 0.0) + p
        j = vspec.k - 1
        while j >= 0:
            idx[j] += 1
            if idx[j] < sizes[j]:
                break
            idx[j] = 0
            j -= 1
        if j < 0:
            break
    utils = np.array(sorted(pairs))
    probs = np.array([pairs[u] for u in utils])
    if len(utils) > 1:
        merged_u = [utils[0]]
        merged_p = [probs[0]]
        for u, p in zip(utils[1:], probs[1:]):
            if u - merged_u[-1] <= merge_tol:
                merged_p[-1] += p
            else:
                merged_u.append(u)
                merged_p.append(p)
        utils = np.array(merged_u)
        probs = np.array(merged_p)
    return utils, probs / probs.sum()


def true_utility(
    magnitudes: Sequence[int],
    vspec: ValueFunctionSpec,
    uspec: UtilityFunctionSpec,
) -> float:
    """Utility of a known magnitude vector."""
    return utility(uspec, value(vspec, magnitudes))


def best_alternatives(
    mu: np.ndarray,
    vspec: ValueFunctionSpec,
    uspec: UtilityFunctionSpec,
    lattice: ValueLattice | None = None,
) -> tuple[float, list[int]]:
    """Best achievable utility and every alternative attaining it.

    ``mu`` is the m x k matrix of true magnitudes. Ties are resolved
    exactly on integer keys, so "attains the best" is never a float
    comparison.
    """
    if lattice is None:
        lattice = ValueLattice(vspec, uspec)
    keys = [lattice.key_of(row) for row in np.asarray(mu)]
    best_key = max(keys)
    best = [i for i, key in enumerate(keys) if key == best_key]
    return lattice.utility_of_key(best_key), best
