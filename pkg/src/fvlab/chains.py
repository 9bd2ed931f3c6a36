"""Condensate Markov chains and exact CTMC marginals.

After fast selection condenses all particles onto one site, that site
performs a Markov chain whose rates are the mutation rates damped by the
probability that a mutant's line takes over: each edge (x, y) carries

    rate(x, y) = n * q(x, y) * (alpha - 1) / (alpha**n - 1),

with ``alpha`` the killing ratio ``lambda(y)/lambda(x)`` evaluated at
finite intensity or in the large-intensity limit (``alpha = 1`` gives
``q(x, y)`` back; ``alpha = inf`` gives 0; ``alpha = 0`` gives
``n * q(x, y)``, the continuous extension of the same formula).

Letting the particle count grow as well yields a chain on the "stable"
sites only (no mutation neighbour with strictly lower killing order);
unstable sites relay mass instantaneously along strictly descending
cascades.  :func:`conjectured_limit_rates` builds that chain together
with the full cascade diagnostics.

Marginals of any of these chains are computed to near machine accuracy
by uniformization, and paths are sampled by the standard exponential-
clock method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from .committor import invasion_probability
from .metrics import LawOnStates, exact_law
from .model import ExtendedRatio, Model

__all__ = [
    "RateMatrix",
    "CascadeAnalysis",
    "condensate_rates",
    "conjectured_limit_rates",
    "simulate_ctmc",
    "ctmc_marginal",
]

_UNIFORMIZATION_MARGIN = 1.01
_POISSON_TAIL = 1e-13


@dataclass(frozen=True)
class RateMatrix:
    """Off-diagonal jump rates over an ordered state set (diagonal implicit)."""

    states: tuple[str, ...]
    rates: np.ndarray

    def __post_init__(self) -> None:
        rates = np.asarray(self.rates, dtype=float)
        rates.setflags(write=False)
        object.__setattr__(self, "rates", rates)
        d = len(self.states)
        if rates.shape != (d, d):
            raise ValueError("rate matrix shape must match state set")
        if np.any(np.diag(rates) != 0.0):
            raise ValueError("diagonal must be zero (it is implicit)")
        if np.any(rates < 0) or not np.all(np.isfinite(rates)):
            raise ValueError("off-diagonal rates must be finite and nonnegative")

    def entry(self, x: Union[str, int], y: Union[str, int]) -> float:
        i = self.states.index(x) if isinstance(x, str) else x
        j = self.states.index(y) if isinstance(y, str) else y
        return float(self.rates[i, j])

    def row_sums(self) -> np.ndarray:
        return self.rates.sum(axis=1)

    def generator(self) -> np.ndarray:
        G = self.rates.copy()
        G[np.diag_indices_from(G)] = -self.row_sums()
        return G

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("from,to,rate\n")
            for i, x in enumerate(self.states):
                for j, y in enumerate(self.states):
                    if i != j and self.rates[i, j] != 0.0:
                        fh.write(f"{x},{y},{self.rates[i, j]:.17g}\n")


def _takeover_factor(n: int, ratio: ExtendedRatio) -> float:
    # (alpha - 1)/(alpha**n - 1) extended to the closed ratio classes.
    if ratio.is_infinite:
        return 0.0
    if ratio.is_zero:
        return 1.0
    return invasion_probability(n, ratio.value)


def condensate_rates(model: Model, n: int, r: float | None = None) -> RateMatrix:
    """Rate matrix of the condensate chain at fixed particle count n.

    ``r`` selects the killing intensity; ``None`` uses the large-r limit
    ratios.  Entries are ``n * q(x,y) * (alpha-1)/(alpha**n - 1)`` with
    the balanced case ``alpha = 1`` giving ``q(x, y)``.
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    d = model.num_states
    rates = np.zeros((d, d))
    for i, j, q in model.mutation:
        rates[i, j] = n * q * _takeover_factor(n, model.alpha(i, j, r))
    return RateMatrix(states=model.states, rates=rates)


@dataclass(frozen=True)
class CascadeAnalysis:
    """Descent structure behind the many-particle condensate chain.

    ``stable_sites`` collects sites with no strictly descending mutation
    edge.  For every unstable site z, ``descent_targets[z]`` lists the
    admissible next steps, ``absorption_weights[z]`` the law of the
    stable site eventually reached, ``reachable[z]`` its support, and
    ``paths[z]`` every descent path with its product weight.  For stable
    x and y, ``triggers[(x, y)]`` lists the balanced neighbours z of x
    whose cascade can deposit the condensate at y.
    """

    stable_sites: tuple[str, ...]
    descent_targets: Mapping[str, tuple[str, ...]]
    absorption_weights: Mapping[str, Mapping[str, float]]
    reachable: Mapping[str, tuple[str, ...]]
    paths: Mapping[str, tuple[tuple[tuple[str, ...], float], ...]]
    triggers: Mapping[tuple[str, str], tuple[str, ...]]
    alt_reading: bool = False

    def to_json_dict(self) -> dict:
        return {
            "stable_sites": list(self.stable_sites),
            "descent_targets": {z: list(t) for z, t in self.descent_targets.items()},
            "absorption_weights": {
                z: dict(w) for z, w in self.absorption_weights.items()
            },
            "reachable": {z: list(t) for z, t in self.reachable.items()},
            "paths": {
                z: [{"path": list(p), "weight": w} for p, w in plist]
                for z, plist in self.paths.items()
            },
            "triggers": {f"{x}->{y}": list(t) for (x, y), t in self.triggers.items()},
            "alt_reading": self.alt_reading,
        }


def _descent_targets(model: Model, z: int, alt_reading: bool) -> list[int]:
    """Admissible descent steps out of an unstable site z.

    Default reading: the mutation neighbours minimizing the limit ratio
    (ties kept as a set, compared on exact ratio classes).  Alternate
    reading: neighbours y that descend (ratio < 1) and additionally
    satisfy ratio(y, w) >= 1 against every mutation neighbour w of z,
    i.e. are minimal within z's whole neighbourhood.  The two differ
    only when the descending neighbourhood mixes several killing orders.
    """
    neigh = model.out_targets[z]
    if not neigh:
        return []
    if alt_reading:
        chosen = []
        for y in neigh:
            ay = model.alpha(z, y, None)
            if not (ay.is_zero or (ay.is_finite and ay.value < 1.0)):
                continue
            if all(
                (model.alpha(y, w, None).is_infinite
                 or (model.alpha(y, w, None).is_finite and model.alpha(y, w, None).value >= 1.0))
                for w in neigh
            ):
                chosen.append(y)
        return chosen
    keys = {y: model.alpha(z, y, None).sort_key() for y in neigh}
    best = min(keys.values())
    if best >= (1, 1.0):  # no strictly descending edge: z is stable
        return []
    return [y for y in neigh if keys[y] == best]


def conjectured_limit_rates(
    model: Model, *, alt_reading: bool = False
) -> tuple[CascadeAnalysis, RateMatrix]:
    """Chain on stable sites in the joint many-particle fast-killing limit.

    A stable site keeps rate ``q(x, y)`` toward balanced stable
    neighbours (limit ratio exactly 1), and additionally inherits mass
    through balanced unstable neighbours z whose descending cascade
    reaches y: each such z contributes ``q(x, z)`` times the cascade's
    absorption weight at y.  Cascade steps branch among the descent
    targets proportionally to their mutation rates; strict descent in
    the killing order makes the cascade graph acyclic.
    """
    d = model.num_states
    stable = [
        x
        for x in range(d)
        if all(
            model.alpha(x, y, None).is_infinite
            or (model.alpha(x, y, None).is_finite and model.alpha(x, y, None).value >= 1.0)
            for y in model.out_targets[x]
        )
    ]
    stable_set = set(stable)

    targets: dict[int, list[int]] = {}
    for z in range(d):
        if z not in stable_set:
            targets[z] = _descent_targets(model, z, alt_reading)
            if not targets[z]:
                raise RuntimeError(
                    f"no stable sink reachable: site {model.states[z]!r} has no "
                    "admissible descent step"
                )

    # Memoized absorption law of the cascade started at z; strict descent
    # guarantees acyclicity, the in-progress mark is a defensive check.
    weights: dict[int, dict[int, float]] = {}
    in_progress: set[int] = set()

    def absorb(z: int) -> dict[int, float]:
        if z in stable_set:
            return {z: 1.0}
        if z in weights:
            return weights[z]
        if z in in_progress:
            raise RuntimeError(
                f"no stable sink reachable: descent cycles through {model.states[z]!r}"
            )
        in_progress.add(z)
        out = targets[z]
        denom = sum(model.mutation_rate(z, y) for y in out)
        law: dict[int, float] = {}
        for y in out:
            w = model.mutation_rate(z, y) / denom
            for site, p in absorb(y).items():
                law[site] = law.get(site, 0.0) + w * p
        in_progress.discard(z)
        weights[z] = law
        return law

    # Explicit path enumeration (diagnostics and JSON export).
    def enumerate_paths(z: int) -> list[tuple[tuple[int, ...], float]]:
        if z in stable_set:
            return [((z,), 1.0)]
        out = targets[z]
        denom = sum(model.mutation_rate(z, y) for y in out)
        acc = []
        for y in out:
            w = model.mutation_rate(z, y) / denom
            for tail, p in enumerate_paths(y):
                acc.append(((z,) + tail, w * p))
        return acc

    unstable = [z for z in range(d) if z not in stable_set]
    for z in unstable:
        absorb(z)

    rates = np.zeros((d, d))
    triggers: dict[tuple[str, str], tuple[str, ...]] = {}
    for x in stable:
        for j, q in zip(model.out_targets[x], model.out_rates[x]):
            a = model.alpha(x, j, None)
            balanced = a.is_finite and a.value == 1.0
            if not balanced:
                continue
            if j in stable_set:
                if j != x:
                    rates[x, j] += q
            else:
                for y, p in weights[j].items():
                    if y == x or p == 0.0:
                        continue
                    rates[x, y] += q * p
                    key = (model.states[x], model.states[y])
                    prev = triggers.get(key, ())
                    if model.states[j] not in prev:
                        triggers[key] = prev + (model.states[j],)

    labels = model.states
    analysis = CascadeAnalysis(
        stable_sites=tuple(labels[x] for x in stable),
        descent_targets={labels[z]: tuple(labels[y] for y in targets[z]) for z in unstable},
        absorption_weights={
            labels[z]: {labels[y]: p for y, p in weights[z].items()} for z in unstable
        },
        reachable={labels[z]: tuple(sorted(labels[y] for y in weights[z])) for z in unstable},
        paths={
            labels[z]: tuple(
                (tuple(labels[s] for s in path), w) for path, w in enumerate_paths(z)
            )
            for z in unstable
        },
        triggers=triggers,
        alt_reading=alt_reading,
    )
    sub = [labels.index(s) for s in analysis.stable_sites]
    chain = RateMatrix(
        states=analysis.stable_sites,
        rates=rates[np.ix_(sub, sub)],
    )
    return analysis, chain


def _init_vector(rates: RateMatrix, init) -> np.ndarray:
    if isinstance(init, LawOnStates):
        if init.states != rates.states:
            raise ValueError("initial law is over a different state set")
        return np.asarray(init.probs, dtype=float)
    v = np.zeros(len(rates.states))
    i = rates.states.index(init) if isinstance(init, str) else int(init)
    v[i] = 1.0
    return v


def simulate_ctmc(
    rates: RateMatrix,
    init: Union[str, int, LawOnStates],
    T: float,
    rng: np.random.Generator,
) -> list[tuple[float, int]]:
    """Exponential-clock realization of the chain on [0, T].

    Returns the jump skeleton ``[(0.0, i0), (t1, i1), ...]`` with times
    strictly increasing; the path is right-continuous and constant
    between entries.  ``init`` may be a site (label or index) or a law
    to sample the starting site from.
    """
    if T <= 0:
        raise ValueError(f"horizon must be positive, got {T}")
    if isinstance(init, LawOnStates):
        probs = _init_vector(rates, init)
        site = int(rng.choice(len(probs), p=probs))
    else:
        site = rates.states.index(init) if isinstance(init, str) else int(init)
    R = rates.rates
    row_sum = rates.row_sums()
    t = 0.0
    path = [(0.0, site)]
    while True:
        total = row_sum[site]
        if total <= 0.0:
            return path
        t += -math.log1p(-rng.random()) / total
        if t >= T:
            return path
        u = rng.random() * total
        acc = 0.0
        nxt = site
        for j in range(len(row_sum)):
            acc += R[site, j]
            if u < acc:
                nxt = j
                break
        site = nxt
        path.append((t, site))


def ctmc_marginal(
    rates: RateMatrix, init: Union[str, int, LawOnStates], t: float
) -> LawOnStates:
    """Marginal law at time t computed by uniformization.

    The generator is embedded into a discrete chain at rate
    ``1.01 * max row sum`` and the Poisson time-randomization series is
    truncated once its cumulative weight reaches ``1 - 1e-13``, so the
    truncation error is below 1e-12 in total variation.
    """
    if t < 0:
        raise ValueError(f"time must be nonnegative, got {t}")
    v = _init_vector(rates, init)
    G = rates.generator()
    unif_rate = _UNIFORMIZATION_MARGIN * float(rates.row_sums().max(initial=0.0))
    if t == 0.0 or unif_rate == 0.0:
        return exact_law(rates.states, v)
    P = np.eye(len(v)) + G / unif_rate
    mu = unif_rate * t
    # Poisson weights in log space: underflowed early terms contribute
    # nothing; the loop ends when the cumulative weight is within the
    # configured tail of 1.
    log_mu = math.log(mu)
    out = np.zeros_like(v)
    term = v.copy()
    cum = 0.0
    k = 0
    k_cap = int(mu + 12.0 * math.sqrt(mu) + 60.0) + 2000
    while cum < 1.0 - _POISSON_TAIL and k <= k_cap:
        log_w = k * log_mu - mu - math.lgamma(k + 1)
        w = math.exp(log_w)
        if w > 0.0:
            out += w * term
            cum += w
        term = term @ P
        k += 1
    return exact_law(rates.states, out)
