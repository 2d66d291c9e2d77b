"""Finite discrete probability mass functions on integer support.

Everything downstream (beliefs about attribute magnitudes, derived
utility distributions, predictive sample distributions) is built from
the small Pmf class here, so construction is strict: supports are
strictly increasing integer arrays, zero-mass points are pruned, and
probabilities are renormalized so they sum to one within 1e-12.
"""

from __future__ import annotations

from typing import Callable, Iterable, Mapping

import numpy as np

SUM_TOL = 1e-12


class ZeroLikelihood(ValueError):
    """An observation has zero probability under the current belief."""


class Pmf:
    """Probability mass function over a strictly increasing integer support.

    Construction normalizes: zero-probability keys are dropped and the
    remaining probabilities are divided by their sum. Negative
    probabilities and empty / all-zero inputs are rejected.
    """

    __slots__ = ("support", "probs")

    def __init__(self, support, probs):
        support = np.asarray(support)
        probs = np.asarray(probs, dtype=float)
        if support.ndim != 1 or probs.ndim != 1 or len(support) != len(probs):
            raise ValueError("support and probs must be 1-d and the same length")
        if len(support) == 0:
            raise ValueError("empty support")
        if not np.issubdtype(support.dtype, np.integer):
            as_int = support.astype(np.int64)
            if not np.array_equal(as_int, support):
                raise ValueError("support keys must be integers")
            support = as_int
        else:
            support = support.astype(np.int64)
        if np.any(np.diff(support) <= 0):
            raise ValueError("support must be strictly increasing")
        if np.any(probs < 0.0):
            raise ValueError("probabilities must be non-negative")
        total = probs.sum()
        if total <= 0.0:
            raise ValueError("total probability mass must be positive")
        keep = probs > 0.0
        support = support[keep]
        probs = probs[keep] / total
        support.flags.writeable = False
        probs.flags.writeable = False
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)

    def __setattr__(self, name, value):
        raise AttributeError("Pmf is immutable")

    def __getstate__(self):
        return self.support, self.probs

    def __setstate__(self, state):
        # Bypasses __init__ so pickling round-trips bit-for-bit with no
        # renormalization drift.
        support, probs = state
        support.flags.writeable = False
        probs.flags.writeable = False
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_dict(cls, mapping: Mapping[int, float]) -> "Pmf":
        keys = sorted(mapping)
        return cls(keys, [mapping[z] for z in keys])

    @classmethod
    def point(cls, key: int) -> "Pmf":
        return cls([key], [1.0])

    @classmethod
    def uniform(cls, keys: Iterable[int]) -> "Pmf":
        keys = list(keys)
        return cls(keys, np.full(len(keys), 1.0 / len(keys)))

    def prob(self, key: int) -> float:
        idx = np.searchsorted(self.support, key)
        if idx < len(self.support) and self.support[idx] == key:
            return float(self.probs[idx])
        return 0.0

    def items(self):
        return zip(self.support.tolist(), self.probs.tolist())

    def as_dict(self) -> dict[int, float]:
        return dict(self.items())

    def __len__(self) -> int:
        return len(self.support)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Pmf):
            return NotImplemented
        return np.array_equal(self.support, other.support) and np.array_equal(
            self.probs, other.probs
        )

    def __hash__(self):
        return hash((self.support.tobytes(), self.probs.tobytes()))

    def __repr__(self) -> str:
        pairs = ", ".join(f"{z}: {p:.6g}" for z, p in self.items())
        return f"Pmf({{{pairs}}})"


class ErrorModel:
    """Additive integer measurement error, symmetric about zero.

    The distribution must satisfy p(e) == p(-e) and put its largest
    mass at zero, so repeated samples concentrate belief rather than
    drift it. ``std_dev`` is descriptive only; if omitted it is
    computed from the pmf.
    """

    __slots__ = ("pmf", "std_dev", "cumulative")

    def __init__(self, pmf: Pmf, std_dev: float | None = None):
        support = pmf.support
        if not np.array_equal(support, -support[::-1]):
            raise ValueError("error support must be symmetric about zero")
        if not np.array_equal(pmf.probs, pmf.probs[::-1]):
            raise ValueError("error probabilities must be symmetric about zero")
        zero_idx = np.searchsorted(support, 0)
        if zero_idx >= len(support) or support[zero_idx] != 0:
            raise ValueError("error support must include zero")
        if pmf.probs[zero_idx] < pmf.probs.max():
            raise ValueError("zero error must carry the largest probability")
        if std_dev is None:
            std_dev = float(np.sqrt(np.dot(pmf.probs, support.astype(float) ** 2)))
        cumulative = np.cumsum(pmf.probs)
        cumulative.flags.writeable = False
        object.__setattr__(self, "pmf", pmf)
        object.__setattr__(self, "std_dev", float(std_dev))
        object.__setattr__(self, "cumulative", cumulative)

    def __setattr__(self, name, value):
        raise AttributeError("ErrorModel is immutable")

    def __getstate__(self):
        return self.pmf, self.std_dev

    def __setstate__(self, state):
        pmf, std_dev = state
        cumulative = np.cumsum(pmf.probs)
        cumulative.flags.writeable = False
        object.__setattr__(self, "pmf", pmf)
        object.__setattr__(self, "std_dev", std_dev)
        object.__setattr__(self, "cumulative", cumulative)

    def sample_offset(self, rng: np.random.Generator) -> int:
        """Draw one error offset using a single uniform variate."""
        idx = int(np.searchsorted(self.cumulative, rng.random(), side="right"))
        return int(self.pmf.support[min(idx, len(self.pmf.support) - 1)])

    @classmethod
    def from_probs(cls, offsets, probs, std_dev: float | None = None) -> "ErrorModel":
        return cls(Pmf(offsets, probs), std_dev)

    @classmethod
    def exact(cls) -> "ErrorModel":
        """Error-free measurement: a point mass at zero."""
        return cls(Pmf.point(0), 0.0)

    @property
    def offsets(self) -> np.ndarray:
        return self.pmf.support

    @property
    def probs(self) -> np.ndarray:
        return self.pmf.probs

    def prob(self, offset: int) -> float:
        return self.pmf.prob(offset)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ErrorModel):
            return NotImplemented
        return self.pmf == other.pmf

    def __hash__(self):
        return hash(self.pmf)

    def __repr__(self) -> str:
        return f"ErrorModel({self.pmf!r}, std_dev={self.std_dev:.4g})"

    def likelihood_matrix(self, magnitudes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Likelihood table over every sample value reachable from ``magnitudes``.

        Returns ``(samples, L)`` where ``samples`` enumerates w from
        min(x)+min(e) to max(x)+max(e) and ``L[w_idx, x_idx]`` is the
        probability of observing w when the true magnitude is x.
        """
        magnitudes = np.asarray(magnitudes, dtype=np.int64)
        offsets = self.pmf.support
        samples = np.arange(
            magnitudes.min() + offsets[0], magnitudes.max() + offsets[-1] + 1
        )
        diff = samples[:, None] - magnitudes[None, :]
        L = np.zeros(diff.shape)
        lo, hi = offsets[0], offsets[-1]
        dense = np.zeros(hi - lo + 1)
        dense[offsets - lo] = self.pmf.probs
        inside = (diff >= lo) & (diff <= hi)
        L[inside] = dense[diff[inside] - lo]
        return samples, L


def bayes_update(prior: Pmf, error: ErrorModel, sample: int) -> Pmf:
    """Condition a magnitude belief on one noisy sample.

    The posterior weight of magnitude x is proportional to
    prior(x) * p_error(sample - x). Raises ZeroLikelihood when no
    supported magnitude could have produced the sample.
    """
    offsets = error.pmf.support
    lo, hi = int(offsets[0]), int(offsets[-1])
    dense = np.zeros(hi - lo + 1)
    dense[offsets - lo] = error.pmf.probs
    diff = sample - prior.support
    like = np.zeros(len(diff))
    inside = (diff >= lo) & (diff <= hi)
    like[inside] = dense[diff[inside] - lo]
    weighted = prior.probs * like
    if weighted.sum() <= 0.0:
        raise ZeroLikelihood(
            f"sample {sample} is impossible under the current belief"
        )
    return Pmf(prior.support, weighted)


def predictive_sample_dist(belief: Pmf, error: ErrorModel) -> Pmf:
    """Distribution of the next sample: the belief convolved with the error.

    Samples can land outside the magnitude domain (a large true value
    plus a positive error); they are kept as-is, not clamped, and the
    Bayes update handles them through the likelihood.
    """
    keys = np.add.outer(belief.support, error.pmf.support).ravel()
    mass = np.outer(belief.probs, error.pmf.probs).ravel()
    base = keys.min()
    dense = np.bincount(keys - base, weights=mass)
    support = np.nonzero(dense)[0]
    return Pmf(support + base, dense[support])


def cdf_at(pmf: Pmf, z: float) -> float:
    """P{Z <= z}."""
    idx = np.searchsorted(pmf.support, z, side="right")
    return float(pmf.probs[:idx].sum())


def cdf_below(pmf: Pmf, z: float) -> float:
    """P{Z < z}, the strict variant used for tie-splitting."""
    idx = np.searchsorted(pmf.support, z, side="left")
    return float(pmf.probs[:idx].sum())


def expectation(pmf: Pmf, key_to_real: Callable[[int], float] | None = None) -> float:
    """E[f(Z)] for f given by ``key_to_real`` (identity when omitted)."""
    if key_to_real is None:
        values = pmf.support.astype(float)
    else:
        values = np.array([key_to_real(int(z)) for z in pmf.support], dtype=float)
    return float(np.dot(values, pmf.probs))
