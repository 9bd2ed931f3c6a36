"""Distances and statistics over laws on a finite site set.

Total variation here follows the sum-of-absolute-differences convention,
``tv(mu, nu) = sum_x |mu(x) - nu(x)|``, with range [0, 2].  Path distance
integrates that quantity in time over the exact merged event grid of two
piecewise-constant measure-valued paths, so there is no discretization
error.  Empirical laws carry a distribution-free confidence half-width
``sqrt(ln(2/delta) / (2M))`` so whole-law comparisons compose into a
total-variation error bound of ``|D| * half_width``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence, Union

import numpy as np

__all__ = [
    "LawOnStates",
    "StepPath",
    "ConcentrationStats",
    "exact_law",
    "empirical_law",
    "tv_distance",
    "l1_tv_path_distance",
    "concentration_stats",
]


@dataclass(frozen=True)
class LawOnStates:
    """A probability vector over a declared, ordered state set.

    ``kind`` is "exact" for analytically computed laws (sum within 1e-10
    of 1) or "empirical" for Monte Carlo frequencies, in which case
    ``nsamples`` and ``half_width`` are set.
    """

    states: tuple[str, ...]
    probs: np.ndarray
    kind: str = "exact"
    nsamples: int | None = None
    half_width: float | None = None

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=float)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        if probs.shape != (len(self.states),):
            raise ValueError("probability vector length must match state set")
        if np.any(probs < -1e-12):
            raise ValueError("negative probability entry")
        tol = 1e-10 if self.kind == "exact" else 1e-12
        if abs(float(probs.sum()) - 1.0) > tol:
            raise ValueError(f"probabilities sum to {probs.sum()}, not 1")

    def prob(self, state: str) -> float:
        return float(self.probs[self.states.index(state)])

    def as_dict(self) -> dict[str, float]:
        return {s: float(p) for s, p in zip(self.states, self.probs)}


def exact_law(states: Sequence[str], probs) -> LawOnStates:
    return LawOnStates(tuple(states), np.asarray(probs, dtype=float), kind="exact")


def empirical_law(
    samples: Iterable[Union[str, int]],
    states: Sequence[str],
    delta: float = 0.05,
) -> LawOnStates:
    """Frequency vector of sampled sites with a confidence half-width.

    ``samples`` may contain state labels or integer indices into
    ``states``.  The attached half-width is the distribution-free bound
    ``sqrt(ln(2/delta) / (2M))`` at confidence level ``1 - delta``.
    """
    states = tuple(states)
    index = {s: i for i, s in enumerate(states)}
    counts = np.zeros(len(states), dtype=np.int64)
    total = 0
    for s in samples:
        i = s if isinstance(s, (int, np.integer)) else index[s]
        counts[i] += 1
        total += 1
    if total < 1:
        raise ValueError("empirical_law requires at least one sample")
    eps = math.sqrt(math.log(2.0 / delta) / (2.0 * total))
    return LawOnStates(states, counts / total, kind="empirical", nsamples=total, half_width=eps)


def _tv(u: np.ndarray, v: np.ndarray) -> float:
    return float(np.abs(np.asarray(u, dtype=float) - np.asarray(v, dtype=float)).sum())


def tv_distance(mu: LawOnStates, nu: LawOnStates) -> float:
    """Total variation sum_x |mu(x) - nu(x)| in [0, 2]."""
    if mu.states != nu.states:
        raise ValueError(f"mismatched state sets: {mu.states} vs {nu.states}")
    return _tv(mu.probs, nu.probs)


@dataclass(frozen=True)
class StepPath:
    """A cadlag piecewise-constant path of probability vectors on [0, T].

    ``values[i]`` holds on ``[times[i], times[i+1])`` and ``values[-1]``
    up to the horizon.  ``times[0]`` must be 0 and times strictly
    increase.
    """

    times: np.ndarray
    values: np.ndarray
    horizon: float

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if times.ndim != 1 or len(times) == 0 or times[0] != 0.0:
            raise ValueError("times must start at 0")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must strictly increase")
        if len(values) != len(times):
            raise ValueError("one value row per time point required")
        if self.horizon < times[-1]:
            raise ValueError("horizon precedes last jump time")

    @classmethod
    def constant(cls, value, horizon: float) -> "StepPath":
        return cls(np.array([0.0]), np.asarray([value], dtype=float), horizon)


def l1_tv_path_distance(a: StepPath, b: StepPath, T: float | None = None) -> float:
    """Integral over [0, T] of the total variation between two step paths.

    The two event grids are merged exactly, so the result carries no
    time-discretization error.  ``T`` defaults to the common horizon.
    """
    if a.values.shape[1] != b.values.shape[1]:
        raise ValueError("paths must share a state set")
    if T is None:
        if a.horizon != b.horizon:
            raise ValueError("paths have different horizons; pass T explicitly")
        T = a.horizon
    grid = np.union1d(a.times, b.times)
    grid = grid[grid < T]
    ia = np.searchsorted(a.times, grid, side="right") - 1
    ib = np.searchsorted(b.times, grid, side="right") - 1
    seg = np.diff(np.append(grid, T))
    tv_per_seg = np.abs(a.values[ia] - b.values[ib]).sum(axis=1)
    return float(np.dot(seg, tv_per_seg))


class ConcentrationStats(NamedTuple):
    pair_corr: float
    g2: float
    max_mass: float


def concentration_stats(measure) -> ConcentrationStats:
    """Concentration statistics of a probability vector xi.

    Returns ``pair_corr = sum_{x != y} xi(x) xi(y) = 1 - g2``,
    ``g2 = sum_x xi(x)^2`` and ``max_mass = max_x xi(x)``.  Accepts a raw
    vector, a :class:`LawOnStates`, or anything with a ``probs()``
    method (an empirical measure).
    """
    if isinstance(measure, LawOnStates):
        xi = measure.probs
    elif hasattr(measure, "probs"):
        attr = measure.probs
        xi = attr() if callable(attr) else attr
    else:
        xi = np.asarray(measure, dtype=float)
    xi = np.asarray(xi, dtype=float)
    g2 = float(np.dot(xi, xi))
    return ConcentrationStats(pair_corr=1.0 - g2, g2=g2, max_mass=float(xi.max()))
