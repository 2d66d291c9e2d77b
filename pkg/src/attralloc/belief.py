"""Decision-maker belief state over alternatives' attribute magnitudes.

A BeliefState carries, for each alternative, one magnitude belief per
attribute plus the derived distribution of the alternative's utility.
Utility distributions live on the integer key grid of a shared
ValueLattice and are kept dense internally; they are recomputed for an
alternative whenever one of its magnitude beliefs changes, so the two
representations never drift apart.
"""

from __future__ import annotations

import json
from typing import Sequence

import numpy as np

from .pmf import Pmf, ErrorModel, ZeroLikelihood
from .preference import (
    OutOfRange,
    UtilityFunctionSpec,
    ValueFunctionSpec,
    ValueLattice,
)

__all__ = [
    "BeliefState",
    "init_uniform",
    "apply_sample",
    "expected_utilities",
    "prob_best",
    "select_rule_I",
    "select_rule_II",
    "state_to_json",
    "state_from_json",
]


class BeliefState:
    """Beliefs at sampling stage t for m alternatives and k attributes.

    ``mag[i, j]`` is the belief over attribute j of alternative i,
    dense over magnitudes 1..max_magnitude. ``zdense[i]`` is the
    induced distribution of alternative i's utility over the lattice
    key grid and ``zmeans[i]`` its mean utility. States are treated as
    immutable; updates return new states.
    """

    __slots__ = ("t", "lattice", "mag", "zdense", "zmeans")

    def __init__(self, t: int, lattice: ValueLattice, mag: np.ndarray):
        if mag.ndim != 3 or mag.shape[1] != lattice.vspec.k:
            raise ValueError("belief array must have shape (m, k, max_magnitude)")
        if mag.shape[2] != lattice.max_magnitude:
            raise ValueError("belief array magnitude axis does not match the lattice")
        if mag.shape[0] < 2:
            raise ValueError("need at least two alternatives")
        sums = mag.sum(axis=2)
        if np.any(np.abs(sums - 1.0) > 1e-9) or np.any(mag < 0.0):
            raise ValueError("each magnitude belief must be a normalized pmf")
        self.t = int(t)
        self.lattice = lattice
        self.mag = mag
        self.zdense = np.stack([lattice.dense_dist(mag[i]) for i in range(mag.shape[0])])
        self.zmeans = self.zdense @ lattice.utilities

    @classmethod
    def _from_parts(cls, t, lattice, mag, zdense, zmeans) -> "BeliefState":
        state = cls.__new__(cls)
        state.t = t
        state.lattice = lattice
        state.mag = mag
        state.zdense = zdense
        state.zmeans = zmeans
        return state

    @classmethod
    def from_beliefs(
        cls,
        beliefs: Sequence[Sequence[Pmf]],
        vspec: ValueFunctionSpec,
        uspec: UtilityFunctionSpec,
        t: int = 0,
        lattice: ValueLattice | None = None,
    ) -> "BeliefState":
        """Build a state from explicit per-(alternative, attribute) beliefs."""
        if lattice is None:
            lattice = ValueLattice(vspec, uspec)
        m = len(beliefs)
        mag = np.zeros((m, vspec.k, lattice.max_magnitude))
        for i, row in enumerate(beliefs):
            if len(row) != vspec.k:
                raise ValueError("one belief per attribute required")
            for j, b in enumerate(row):
                if b.support[0] < 1 or b.support[-1] > lattice.max_magnitude:
                    raise OutOfRange(
                        f"belief support escapes 1..{lattice.max_magnitude}"
                    )
                mag[i, j, b.support - 1] = b.probs
        return cls(t, lattice, mag)

    @property
    def m(self) -> int:
        return self.mag.shape[0]

    @property
    def k(self) -> int:
        return self.mag.shape[1]

    @property
    def vspec(self) -> ValueFunctionSpec:
        return self.lattice.vspec

    @property
    def uspec(self) -> UtilityFunctionSpec:
        return self.lattice.uspec

    def magnitude_belief(self, i: int, j: int) -> Pmf:
        probs = self.mag[i, j]
        support = np.nonzero(probs)[0]
        return Pmf(support + 1, probs[support])

    @property
    def magnitude_beliefs(self) -> tuple[tuple[Pmf, ...], ...]:
        return tuple(
            tuple(self.magnitude_belief(i, j) for j in range(self.k))
            for i in range(self.m)
        )

    @property
    def utility_dists(self) -> tuple[Pmf, ...]:
        """Per-alternative utility distributions as Pmfs over lattice keys."""
        return tuple(self.lattice.pmf_of_dense(self.zdense[i]) for i in range(self.m))


def init_uniform(
    m: int,
    k: int,
    max_magnitude: int,
    vspec: ValueFunctionSpec,
    uspec: UtilityFunctionSpec,
    lattice: ValueLattice | None = None,
) -> BeliefState:
    """State at t = 0: every magnitude uniform on 1..max_magnitude."""
    if k != vspec.k:
        raise ValueError("attribute count does not match the value spec")
    if lattice is None:
        lattice = ValueLattice(vspec, uspec)
    if max_magnitude != lattice.max_magnitude:
        raise ValueError("magnitude bound does not match the value spec")
    if m < 2:
        raise ValueError("need at least two alternatives")
    mag = np.full((m, k, max_magnitude), 1.0 / max_magnitude)
    return BeliefState(0, lattice, mag)


def _posterior_row(prior: np.ndarray, error: ErrorModel, sample: int) -> np.ndarray:
    offsets = error.pmf.support
    lo, hi = int(offsets[0]), int(offsets[-1])
    dense = np.zeros(hi - lo + 1)
    dense[offsets - lo] = error.pmf.probs
    diff = sample - np.arange(1, len(prior) + 1)
    like = np.zeros(len(prior))
    inside = (diff >= lo) & (diff <= hi)
    like[inside] = dense[diff[inside] - lo]
    weighted = prior * like
    total = weighted.sum()
    if total <= 0.0:
        raise ZeroLikelihood(f"sample {sample} is impossible under the current belief")
    return weighted / total


def apply_sample(
    state: BeliefState, i: int, j: int, sample: int, error: ErrorModel
) -> BeliefState:
    """Condition on one sample of attribute j of alternative i.

    Only the (i, j) magnitude belief and alternative i's utility
    distribution change; every other array row is copied bit-for-bit.
    """
    mag = state.mag.copy()
    mag[i, j] = _posterior_row(state.mag[i, j], error, sample)
    zdense = state.zdense.copy()
    zdense[i] = state.lattice.dense_dist(mag[i])
    zmeans = state.zmeans.copy()
    zmeans[i] = zdense[i] @ state.lattice.utilities
    return BeliefState._from_parts(state.t + 1, state.lattice, mag, zdense, zmeans)


def expected_utilities(state: BeliefState) -> np.ndarray:
    """Mean utility of each alternative under the current beliefs."""
    return state.zmeans.copy()


def _prob_best_dense(Z: np.ndarray) -> np.ndarray:
    """P{alternative i is best} for rows of utility mass on one grid.

    Best means highest utility with ties going to the lowest index, so
    alternative i wins at level z when every lower-indexed rival is
    strictly below z and every higher-indexed rival is at or below z.
    """
    m = Z.shape[0]
    F = np.cumsum(Z, axis=1)
    W = np.empty_like(Z)
    acc = np.ones(Z.shape[1])
    for h in range(m):
        W[h] = acc
        acc = acc * (F[h] - Z[h])
    acc = np.ones(Z.shape[1])
    for h in range(m - 1, -1, -1):
        W[h] *= acc
        acc = acc * F[h]
    return np.einsum("ij,ij->i", Z, W)


def prob_best(state: BeliefState) -> np.ndarray:
    """Probability each alternative has the highest utility (lowest index wins ties)."""
    Z = state.zdense
    cols = np.nonzero(Z.any(axis=0))[0]
    return _prob_best_dense(Z[:, cols[0] : cols[-1] + 1])


def select_rule_I(state: BeliefState) -> int:
    """Alternative with the highest mean utility; lowest index on ties."""
    return int(np.argmax(state.zmeans))


def select_rule_II(state: BeliefState) -> int:
    """Alternative most likely to be best; lowest index on ties."""
    return int(np.argmax(prob_best(state)))


def state_to_json(state: BeliefState) -> str:
    """Serialize a state to JSON text.

    Belief rows are written with their raw (already normalized)
    probabilities, so deserializing reproduces the arrays
    bit-for-bit; JSON float formatting round-trips doubles exactly.
    """
    vspec = state.vspec
    uspec = state.uspec
    rows = []
    for i in range(state.m):
        row = []
        for j in range(state.k):
            probs = state.mag[i, j]
            support = np.nonzero(probs)[0]
            row.append(
                {
                    "support": (support + 1).tolist(),
                    "probs": probs[support].tolist(),
                }
            )
        rows.append(row)
    payload = {
        "t": state.t,
        "m": state.m,
        "k": state.k,
        "value": {
            "kind": vspec.kind,
            "k": vspec.k,
            "max_magnitudes": list(vspec.max_magnitudes),
        },
        "utility": {"kind": uspec.kind, "gamma": uspec.gamma},
        "magnitude_beliefs": rows,
    }
    return json.dumps(payload, indent=2)


def state_from_json(text: str) -> BeliefState:
    """Rebuild a state serialized by state_to_json.

    Utility distributions are recomputed from the magnitude beliefs,
    which reproduces them exactly because the convolution is
    deterministic.
    """
    payload = json.loads(text)
    vspec = ValueFunctionSpec(
        payload["value"]["kind"],
        payload["value"]["k"],
        tuple(payload["value"]["max_magnitudes"]),
    )
    uspec = UtilityFunctionSpec(payload["utility"]["kind"], payload["utility"]["gamma"])
    lattice = ValueLattice(vspec, uspec)
    mag = np.zeros((payload["m"], payload["k"], lattice.max_magnitude))
    for i, row in enumerate(payload["magnitude_beliefs"]):
        for j, cell in enumerate(row):
            support = np.asarray(cell["support"], dtype=np.int64)
            mag[i, j, support - 1] = cell["probs"]
    return BeliefState(payload["t"], lattice, mag)
