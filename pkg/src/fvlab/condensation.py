"""Where the condensate forms: the limiting law of the first Dirac mass.

Started from a configuration with support D0, the selection-only
dynamics at large killing intensity is absorbed in a Dirac mass whose
site has a deterministic limiting law.  Sites of non-minimal killing
order are vacated first: each of their particles relocates onto the
minimal-order set ``Lambda`` proportionally to current occupancy, which
is exactly a Polya urn with one draw per relocated particle (note: per
*particle*, not per vacated site).  The resulting occupancy of
``Lambda`` then resolves by the committors of the limit rate ratios.

The urn step follows the Dirichlet-multinomial law

    P(add vector (m_i)) = multinomial(m; m_1..m_k) * prod_i a_i^(m_i) / A^(m)

with ``a^(m)`` the rising factorial and ``A = sum a_i``, computed in
exact rational arithmetic for small draw counts and 50-digit floats
beyond.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Mapping, Sequence, Union

import numpy as np

from .committor import CompositionSpace, committor_numeric
from .metrics import LawOnStates
from .model import Model

__all__ = [
    "UrnLaw",
    "InitialCondensationLaw",
    "minimal_order_set",
    "limit_weight_profile",
    "polya_urn_law",
    "initial_condensation_law",
]

_EXACT_DRAW_LIMIT = 64
_OUTCOME_CAP = 10_000


def minimal_order_set(model: Model, support: Sequence[Union[str, int]]) -> tuple[str, ...]:
    """Sites of the support whose killing order is minimal.

    A site x stays iff no support site y has vanishing limit ratio
    ``lambda(y)/lambda(x)`` (which would mean y dies at a strictly
    smaller order).  The result is nonempty and keeps model order.
    """
    idx = [model.state_index(s) for s in support]
    if not idx:
        raise ValueError("support must be nonempty")
    keep = [
        x for x in idx if not any(model.alpha(x, y, None).is_zero for y in idx)
    ]
    return tuple(model.states[x] for x in keep)


def limit_weight_profile(model: Model, subset: Sequence[Union[str, int]]) -> np.ndarray:
    """Normalized limit killing weights over a same-order subset.

    For x in the subset, ``weight(x) = 1 / min_y ratio(x, y)`` equals
    the limit of ``lambda_r(x)`` over the subset's minimal rate, a
    finite value >= 1.  Requires the subset to be its own minimal-order
    set (every pairwise limit ratio positive).
    """
    idx = [model.state_index(s) for s in subset]
    out = np.empty(len(idx))
    for pos, x in enumerate(idx):
        ratios = [model.alpha(x, y, None) for y in idx]
        if any(a.is_zero for a in ratios):
            raise ValueError(
                f"state {model.states[x]!r} is not of minimal order in the subset"
            )
        out[pos] = 1.0 / min(a.value for a in ratios if not a.is_infinite)
    return out


@dataclass(frozen=True)
class UrnLaw:
    """Law of a Polya urn's final counts after a fixed number of draws."""

    initial: tuple[int, ...]
    draws: int
    outcomes: Mapping[tuple[int, ...], float]
    exact: Mapping[tuple[int, ...], Fraction] | None

    def support(self) -> list[tuple[int, ...]]:
        return sorted(self.outcomes)


def polya_urn_law(
    initial_counts: Sequence[int], draws: int, *, cap: int = _OUTCOME_CAP
) -> UrnLaw:
    """Exact Dirichlet-multinomial law of the urn's final counts.

    Each draw observes a color proportionally to its current count and
    adds one ball of that color.  ``initial_counts`` must be >= 1
    (empty colors can never be drawn and would stay empty).
    """
    a = [int(v) for v in initial_counts]
    if not a or any(v < 1 for v in a):
        raise ValueError(f"initial counts must all be >= 1, got {initial_counts}")
    m = int(draws)
    if m < 0:
        raise ValueError(f"draw count must be >= 0, got {draws}")
    k = len(a)
    n_outcomes = comb(m + k - 1, k - 1)
    if n_outcomes > cap:
        raise ValueError(f"{n_outcomes} outcomes exceed the cap {cap}")

    A = sum(a)
    space = CompositionSpace(k, m)
    if m <= _EXACT_DRAW_LIMIT:
        def rising(x: int, j: int) -> int:
            out = 1
            for i in range(j):
                out *= x + i
            return out

        exact: dict[tuple[int, ...], Fraction] = {}
        for adds in space:
            multinom = math.factorial(m)
            num = 1
            for ai, mi in zip(a, adds):
                multinom //= math.factorial(mi)
                num *= rising(ai, mi)
            exact[tuple(av + mv for av, mv in zip(a, adds))] = Fraction(
                multinom * num, rising(A, m)
            )
        total = sum(exact.values())
        if total != 1:
            raise RuntimeError("urn law does not sum to 1 exactly")
        outcomes = {key: float(p) for key, p in exact.items()}
        return UrnLaw(tuple(a), m, outcomes, exact)

    import mpmath

    with mpmath.workdps(50):
        probs: dict[tuple[int, ...], float] = {}
        log_m_fact = mpmath.loggamma(m + 1)
        log_A_rising = mpmath.loggamma(A + m) - mpmath.loggamma(A)
        for adds in space:
            logp = log_m_fact - log_A_rising
            for ai, mi in zip(a, adds):
                logp += mpmath.loggamma(ai + mi) - mpmath.loggamma(ai)
                logp -= mpmath.loggamma(mi + 1)
            probs[tuple(av + mv for av, mv in zip(a, adds))] = float(mpmath.exp(logp))
    total = math.fsum(probs.values())
    if abs(total - 1.0) > 1e-12:
        raise RuntimeError(f"urn law sums to {total}, not 1")
    return UrnLaw(tuple(a), m, probs, None)


@dataclass(frozen=True)
class InitialCondensationLaw:
    """Limiting law of the condensate's initial site.

    ``law`` is supported inside ``lambda_set``.  When particles start
    outside the minimal-order set, ``urn`` records the redistribution
    law and ``mixture`` maps each urn outcome (counts over
    ``lambda_set``) to its committor row, so ``law`` is the
    urn-weighted average of those rows.
    """

    law: LawOnStates
    support: tuple[str, ...]
    lambda_set: tuple[str, ...]
    weights: tuple[float, ...]
    urn: UrnLaw | None
    mixture: Mapping[tuple[int, ...], np.ndarray] | None

    def to_json_dict(self) -> dict:
        return {
            "lambda_set": list(self.lambda_set),
            "eta_infinity": self.law.as_dict(),
        }


def initial_condensation_law(model: Model, counts: Sequence[int]) -> InitialCondensationLaw:
    """Limiting site law of the first Dirac mass under fast selection.

    ``counts`` gives the particle counts per model state (total n >= 2,
    unless the measure is already a Dirac mass, which is returned
    unchanged); an empirical-measure object with a ``counts`` attribute
    is accepted too.  Depends on the killing family only through its
    limit ratios.
    """
    if hasattr(counts, "counts"):
        counts = counts.counts
    counts = [int(c) for c in counts]
    if len(counts) != model.num_states or any(c < 0 for c in counts):
        raise ValueError("counts must be nonnegative, one per model state")
    n = sum(counts)
    if n < 1:
        raise ValueError("at least one particle required")
    support = tuple(model.states[i] for i, c in enumerate(counts) if c > 0)

    def point_mass(site: str) -> LawOnStates:
        v = np.zeros(model.num_states)
        v[model.state_index(site)] = 1.0
        return LawOnStates(model.states, v, kind="exact")

    if len(support) == 1:
        # already a Dirac: absorbed at time 0
        lam = support
        return InitialCondensationLaw(
            law=point_mass(support[0]),
            support=support,
            lambda_set=lam,
            weights=(1.0,),
            urn=None,
            mixture=None,
        )
    if n < 2:
        raise ValueError("a non-Dirac measure needs n >= 2")

    lam = minimal_order_set(model, support)
    gamma = limit_weight_profile(model, lam)
    lam_idx = [model.state_index(s) for s in lam]
    inside = [counts[i] for i in lam_idx]
    outside = n - sum(inside)

    if len(lam) == 1:
        return InitialCondensationLaw(
            law=point_mass(lam[0]),
            support=support,
            lambda_set=lam,
            weights=(float(gamma[0]),),
            urn=None,
            mixture=None,
        )

    table = committor_numeric(gamma, n, states=lam)
    full = np.zeros(model.num_states)
    if outside == 0:
        row = table.row(inside)
        mixture = {tuple(inside): row}
        urn = None
        for s, p in zip(lam, row):
            full[model.state_index(s)] = p
    else:
        urn = polya_urn_law(inside, outside)
        mixture = {}
        for outcome, p in urn.outcomes.items():
            row = table.row(outcome)
            mixture[outcome] = row
            for s, v in zip(lam, row):
                full[model.state_index(s)] += p * v

    law = LawOnStates(model.states, full, kind="exact")
    return InitialCondensationLaw(
        law=law,
        support=support,
        lambda_set=lam,
        weights=tuple(float(g) for g in gamma),
        urn=urn,
        mixture=mixture,
    )
