"""Exact event-driven simulation of the interacting particle system.

n particles sit on the model's sites.  Each particle mutates along the
kernel ``q`` independently, and dies at its site's killing rate, being
replaced instantly by a copy of a uniformly chosen survivor.  Because
particles are exchangeable, the per-site count vector is a sufficient
state, and the direct (total-rate) method runs on per-site aggregated
clocks at O(|support|) cost per event:

* mutation out of x: rate ``k_x * sum_y q(x, y)``;
* a count-changing death at x: rate ``k_x * lambda_r(x) * (n - k_x)/(n - 1)``,
  the survivor being chosen at another site y with probability
  ``k_y / (n - k_x)``.

Deaths whose replacement lands back on the killed particle's own site do
not change the state; they are removed analytically by the
``(n - k_x)/(n - 1)`` thinning factor and never generated, which is what
keeps the event count bounded as killing rates grow: a count-changing
death at rate ``lambda`` is always followed, within O(1/lambda) time, by
the short duel that resolves it.

Every replica consumes one private RNG stream with a fixed draw pattern
(waiting time, event category, event target), so trajectories are
bit-reproducible for a given (model, seed, parameters).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np

from .metrics import StepPath
from .model import Model

__all__ = [
    "EmpiricalMeasure",
    "Event",
    "Trajectory",
    "AbsorptionResult",
    "EventCapError",
    "next_event",
    "simulate_fv",
    "simulate_selection_absorption",
]

DEFAULT_EVENT_CAP = 10**9
_BLOCK = 4096  # uniforms pre-drawn per refill


class EventCapError(RuntimeError):
    """A replica exceeded its hard event cap (diagnostic, not a result)."""

    def __init__(self, cap: int, time: float, counts: Sequence[int]):
        super().__init__(
            f"event cap {cap} exceeded at t={time:.6g} with counts {tuple(counts)}"
        )
        self.cap = cap
        self.time = time
        self.counts = tuple(counts)


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Particle counts per site; the normalized vector is the measure."""

    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(c < 0 for c in self.counts):
            raise ValueError(f"negative count in {self.counts}")
        if self.n < 2:
            raise ValueError("at least two particles required")

    @classmethod
    def from_counts(cls, counts: Sequence[int]) -> "EmpiricalMeasure":
        return cls(tuple(int(c) for c in counts))

    @classmethod
    def dirac(cls, num_sites: int, site: int, n: int) -> "EmpiricalMeasure":
        counts = [0] * num_sites
        counts[site] = n
        return cls(tuple(counts))

    @property
    def n(self) -> int:
        return sum(self.counts)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.counts) if c > 0)

    @property
    def is_dirac(self) -> bool:
        return len(self.support) == 1

    def probs(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.n


@dataclass(frozen=True)
class Event:
    """One recorded transition: a particle moved from source to target.

    ``kind`` is "mutation" (the particle jumped along the kernel) or
    "selection" (a particle died at source and a survivor at target was
    duplicated).  Same-site selections are never recorded.
    """

    kind: str
    source: int
    target: int


@dataclass
class Trajectory:
    """A realized path: initial counts plus time-ordered recorded events.

    Each event moves exactly one particle (source count -1, target
    count +1), so the path of measures is reconstructed by replay.
    ``event_count`` counts the generated events even when recording was
    turned off (``events`` empty).
    """

    states: tuple[str, ...]
    initial: EmpiricalMeasure
    events: list[tuple[float, Event]]
    horizon: float
    final: EmpiricalMeasure
    event_count: int = 0

    def occupancy_path(self) -> StepPath:
        times = [0.0]
        rows = [self.initial.probs()]
        counts = list(self.initial.counts)
        n = self.initial.n
        for t, ev in self.events:
            counts[ev.source] -= 1
            counts[ev.target] += 1
            times.append(t)
            rows.append(np.asarray(counts, dtype=float) / n)
        return StepPath(np.asarray(times), np.asarray(rows), self.horizon)

    def max_mass_integral(self) -> float:
        """Time integral of ``2 * (1 - max_x pi_t(x))`` over [0, horizon].

        This is the integral of the total-variation distance from the
        path to its nearest Dirac mass at each instant; zero iff the
        path stays a Dirac.
        """
        path = self.occupancy_path()
        seg = np.diff(np.append(path.times, self.horizon))
        return float(np.dot(seg, 2.0 * (1.0 - path.values.max(axis=1))))

    def to_csv(self, path, model_hash: str = "", seed: Union[int, str] = "") -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# model_hash={model_hash} seed={seed}\n")
            fh.write("time,event_kind,from,to\n")
            for t, ev in self.events:
                fh.write(
                    f"{t:.17g},{ev.kind},{self.states[ev.source]},{self.states[ev.target]}\n"
                )


class AbsorptionResult(NamedTuple):
    """Absorption time and site of the selection-only dynamics."""

    tau: float
    site: str
    event_count: int


def _kernel_arrays(model: Model, r: float, selection_only: bool):
    d = model.num_states
    lam = [model.killing_rate(r, i) for i in range(d)]
    if selection_only:
        mut_exit = [0.0] * d
        mut_targets: tuple = ((),) * d
        mut_rates: tuple = ((),) * d
    else:
        mut_exit = list(model.exit_rate)
        mut_targets = model.out_targets
        mut_rates = model.out_rates
    return d, lam, mut_exit, mut_targets, mut_rates


def _simulate(
    model: Model,
    r: float,
    init: EmpiricalMeasure,
    T: float | None,
    rng: np.random.Generator,
    *,
    selection_only: bool = False,
    record: bool = True,
    event_cap: int = DEFAULT_EVENT_CAP,
    max_events: int | None = None,
):
    """Shared event loop.

    Runs until the horizon ``T`` (if given), absorption in a Dirac mass
    with zero remaining rate, or ``max_events``.  Returns
    ``(time, counts, events, n_events)``.
    """
    if len(init.counts) != model.num_states:
        raise ValueError("initial counts must match the model's state count")
    d, lam, mut_exit, mut_targets, mut_rates = _kernel_arrays(model, r, selection_only)
    counts = list(init.counts)
    n = init.n
    inv_nm1 = 1.0 / (n - 1)
    log1p, rnd = math.log1p, rng.random

    # Uniforms are pre-drawn in blocks that grow geometrically, so short
    # replicas stay cheap and long ones amortize the generator call.
    size = 64
    buf = rnd(size)
    limit = size - 3
    pos = 0
    t = 0.0
    events: list[tuple[float, Event]] = []
    n_events = 0
    while True:
        r_mut = 0.0
        r_sel = 0.0
        for i in range(d):
            k = counts[i]
            if k:
                r_mut += k * mut_exit[i]
                r_sel += k * lam[i] * (n - k)
        r_sel *= inv_nm1
        total = r_mut + r_sel
        if total <= 0.0:
            break

        if pos > limit:
            size = min(size * 2, _BLOCK)
            buf = rnd(size)
            limit = size - 3
            pos = 0
        u_time = buf[pos]
        u_cat = buf[pos + 1]
        u_tgt = buf[pos + 2]
        pos += 3

        dt = -log1p(-u_time) / total
        if T is not None and t + dt > T:
            t = T
            break
        t += dt

        x = u_cat * total
        if x < r_mut:
            # mutation: locate the site, then the outgoing edge
            src = -1
            for i in range(d):
                k = counts[i]
                if k:
                    x -= k * mut_exit[i]
                    if x < 0.0:
                        src = i
                        break
            if src < 0:  # guard against roundoff at the block boundary
                src = max(i for i in range(d) if counts[i] and mut_exit[i] > 0.0)
            rates = mut_rates[src]
            y = u_tgt * mut_exit[src]
            tgt = mut_targets[src][-1]
            for j, rate in zip(mut_targets[src], rates):
                y -= rate
                if y < 0.0:
                    tgt = j
                    break
            kind = "mutation"
        else:
            # count-changing death: killed site, then survivor's site
            x -= r_mut
            src = -1
            for i in range(d):
                k = counts[i]
                if k:
                    x -= k * lam[i] * (n - k) * inv_nm1
                    if x < 0.0:
                        src = i
                        break
            if src < 0:
                src = max(i for i in range(d) if 0 < counts[i] < n)
            y = u_tgt * (n - counts[src])
            tgt = -1
            for j in range(d):
                if j != src and counts[j]:
                    y -= counts[j]
                    if y < 0.0:
                        tgt = j
                        break
            if tgt < 0:
                tgt = max(j for j in range(d) if j != src and counts[j])
            kind = "selection"

        counts[src] -= 1
        counts[tgt] += 1
        n_events += 1
        if record:
            events.append((t, Event(kind, src, tgt)))
        if n_events >= event_cap:
            raise EventCapError(event_cap, t, counts)
        if max_events is not None and n_events >= max_events:
            break

    return t, counts, events, n_events


def next_event(
    model: Model, r: float, state: EmpiricalMeasure, rng: np.random.Generator
) -> tuple[float, Event] | None:
    """Draw the next transition from ``state``, or None if no rate remains.

    Reference single-step form of the same sampler used by the bulk
    simulators (identical draw pattern and rate layout).
    """
    t, _, events, n_events = _simulate(
        model, r, state, None, rng, record=True, max_events=1
    )
    if n_events == 0:
        return None
    return t, events[0][1]


def simulate_fv(
    model: Model,
    r: float,
    init: EmpiricalMeasure,
    T: float,
    rng: np.random.Generator,
    *,
    record: bool = True,
    event_cap: int = DEFAULT_EVENT_CAP,
) -> Trajectory:
    """Exact realization of the full mutation + selection dynamics on [0, T].

    With ``record=False`` the event list stays empty (the final state
    and the event count are still exact); use this for marginals, where
    storing paths would dominate the cost.
    """
    if T <= 0:
        raise ValueError(f"horizon must be positive, got {T}")
    t, counts, events, n_events = _simulate(
        model, r, init, T, rng, record=record, event_cap=event_cap
    )
    return Trajectory(
        states=model.states,
        initial=init,
        events=events,
        horizon=T,
        final=EmpiricalMeasure.from_counts(counts),
        event_count=n_events,
    )


def simulate_selection_absorption(
    model: Model,
    r: float,
    init: EmpiricalMeasure,
    rng: np.random.Generator,
    *,
    event_cap: int = DEFAULT_EVENT_CAP,
) -> AbsorptionResult:
    """Run the selection-only dynamics until a Dirac mass is reached.

    Returns the absorption time, the absorbed site's label, and the
    number of events consumed.  Absorption is almost sure; the event
    cap converts pathological configurations into diagnostics.
    """
    if init.is_dirac:
        return AbsorptionResult(0.0, model.states[init.support[0]], 0)
    t, counts, _, n_events = _simulate(
        model, r, init, None, rng, selection_only=True, record=False, event_cap=event_cap
    )
    n = init.n
    site = counts.index(n)
    return AbsorptionResult(t, model.states[site], n_events)
