"""Shared builders for randomized test states."""

from types import SimpleNamespace

import numpy as np

import attralloc as al


def random_pmf(rng: np.random.Generator, lo: int, hi: int) -> al.Pmf:
    size = int(rng.integers(1, hi - lo + 2))
    keys = np.sort(rng.choice(np.arange(lo, hi + 1), size=size, replace=False))
    probs = rng.random(size) + 0.05
    return al.Pmf(keys, probs)


def random_error(rng: np.random.Generator, max_radius: int = 2) -> al.ErrorModel:
    radius = int(rng.integers(0, max_radius + 1))
    if radius == 0:
        return al.ErrorModel.exact()
    half = rng.random(radius) * 0.3 + 0.02
    center = half.max() + rng.random() * 0.5 + 0.05
    probs = np.concatenate([half[::-1], [center], half])
    return al.ErrorModel(al.Pmf(np.arange(-radius, radius + 1), probs))


def random_specs(rng: np.random.Generator, k: int, max_x: int):
    vkind = "A" if rng.random() < 0.5 else "B"
    if rng.random() < 0.5:
        uspec = al.UtilityFunctionSpec("risk-neutral")
    else:
        uspec = al.UtilityFunctionSpec("exponential", float(rng.uniform(1.0, 10.0)))
    return al.ValueFunctionSpec.uniform(vkind, k, max_x), uspec


def random_state(
    rng: np.random.Generator,
    m: int | None = None,
    k: int = 2,
    max_x: int = 5,
    max_err_radius: int = 2,
) -> SimpleNamespace:
    """A random belief state plus plain-data mirrors for the oracles."""
    if m is None:
        m = int(rng.integers(2, 4))
    vspec, uspec = random_specs(rng, k, max_x)
    beliefs = [[random_pmf(rng, 1, max_x) for _ in range(k)] for _ in range(m)]
    state = al.BeliefState.from_beliefs(beliefs, vspec, uspec)
    errors = [random_error(rng, max_err_radius) for _ in range(k)]
    return SimpleNamespace(
        state=state,
        vspec=vspec,
        uspec=uspec,
        beliefs=beliefs,
        belief_rows=[[list(pmf.items()) for pmf in row] for row in beliefs],
        errors=errors,
        error_rows=[list(e.pmf.items()) for e in errors],
        gamma=uspec.gamma,
    )
