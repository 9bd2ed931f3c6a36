"""State space, mutation kernel, and parametric killing-rate families.

A model couples a finite set of sites, a conservative mutation kernel
``q(x, y)`` and a family of killing rates ``lambda_r(x)`` indexed by an
intensity parameter ``r >= 1``.  Two parametric families are supported:

* power law: ``lambda_r(x) = c(x) * r**beta(x)`` with ``c(x) > 0`` and
  ``beta(x) > 0``.  The large-``r`` ratio ``lambda_r(y)/lambda_r(x)`` then
  converges to ``0``, ``c(y)/c(x)`` or ``inf`` according to the exponent
  comparison, which realizes every possible limit class.
* uniform plus bounded offset: ``lambda_r(x) = r + m(x)`` with
  ``m(x) >= 0``; all large-``r`` ratios equal 1.

Exponents are stored as exact rationals so the limit trichotomy is decided
by exact comparison, never by floating-point noise.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence, Union

__all__ = [
    "ModelError",
    "ExtendedRatio",
    "PowerLawKilling",
    "UniformPlusBoundedKilling",
    "KillingFamily",
    "Model",
    "validate_model",
    "load_model",
]


class ModelError(ValueError):
    """Raised when a model configuration violates a structural constraint."""


@dataclass(frozen=True)
class ExtendedRatio:
    """A rate ratio in the extended half line [0, inf].

    Values fall into three exact classes: zero, finite positive, and
    infinite.  ``value`` is ``0.0``, a positive float, or ``math.inf``.
    """

    value: float

    def __post_init__(self) -> None:
        if math.isnan(self.value) or self.value < 0:
            raise ValueError(f"ratio must lie in [0, inf], got {self.value}")

    @classmethod
    def zero(cls) -> "ExtendedRatio":
        return cls(0.0)

    @classmethod
    def infinite(cls) -> "ExtendedRatio":
        return cls(math.inf)

    @property
    def is_zero(self) -> bool:
        return self.value == 0.0

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)

    @property
    def is_finite(self) -> bool:
        return not (self.is_zero or self.is_infinite)

    def reciprocal(self) -> "ExtendedRatio":
        if self.is_zero:
            return ExtendedRatio.infinite()
        if self.is_infinite:
            return ExtendedRatio.zero()
        return ExtendedRatio(1.0 / self.value)

    def sort_key(self) -> tuple[int, float]:
        # zero < any finite < infinite; finite values ordered by magnitude.
        if self.is_zero:
            return (0, 0.0)
        if self.is_infinite:
            return (2, 0.0)
        return (1, self.value)

    def __float__(self) -> float:
        return self.value


def _as_fraction(value) -> Fraction:
    # Accept ints, exact decimal floats and strings like "3/2" or "0.5".
    if isinstance(value, bool):
        raise ModelError(f"exponent must be numeric, got {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    if isinstance(value, str):
        return Fraction(value)
    raise ModelError(f"exponent must be numeric, got {value!r}")


@dataclass(frozen=True)
class PowerLawKilling:
    """Killing rates ``c(x) * r**beta(x)`` per site index."""

    c: tuple[float, ...]
    beta: tuple[Fraction, ...]

    kind = "power"

    def rate(self, r: float, i: int) -> float:
        return self.c[i] * r ** float(self.beta[i])

    def min_rate(self, r: float) -> float:
        return min(self.rate(r, i) for i in range(len(self.c)))

    def limit_ratio(self, i: int, j: int) -> ExtendedRatio:
        """Large-r limit of rate(r, j) / rate(r, i)."""
        if self.beta[j] > self.beta[i]:
            return ExtendedRatio.infinite()
        if self.beta[j] < self.beta[i]:
            return ExtendedRatio.zero()
        return ExtendedRatio(self.c[j] / self.c[i])

    def config_dict(self, states: Sequence[str]) -> dict:
        return {
            "kind": "power",
            "c": {s: v for s, v in zip(states, self.c)},
            "beta": {s: str(b) for s, b in zip(states, self.beta)},
        }


@dataclass(frozen=True)
class UniformPlusBoundedKilling:
    """Killing rates ``r + m(x)`` per site index."""

    m: tuple[float, ...]

    kind = "uniform_plus"

    def rate(self, r: float, i: int) -> float:
        return r + self.m[i]

    def min_rate(self, r: float) -> float:
        return r + min(self.m)

    def limit_ratio(self, i: int, j: int) -> ExtendedRatio:
        return ExtendedRatio(1.0)

    @property
    def m_sup(self) -> float:
        """Largest pairwise rate gap sup_{x,y} |rate(r,x) - rate(r,y)| = max(m) - min(m)."""
        return max(self.m) - min(self.m)

    def config_dict(self, states: Sequence[str]) -> dict:
        return {"kind": "uniform_plus", "m": {s: v for s, v in zip(states, self.m)}}


KillingFamily = Union[PowerLawKilling, UniformPlusBoundedKilling]


@dataclass(frozen=True, eq=False)
class Model:
    """Validated, immutable model: sites, mutation kernel, killing family.

    Attributes
    ----------
    states : tuple of str
        Site labels in declaration order; internal arrays are indexed by
        position in this tuple.
    mutation : tuple of (int, int, float)
        Sparse mutation entries (source index, target index, rate), each
        rate positive, no self loops.
    killing : KillingFamily
    Q : float
        ``max_x sum_y q(x, y)``, the uniform bound on mutation exit rates.
    """

    states: tuple[str, ...]
    mutation: tuple[tuple[int, int, float], ...]
    killing: KillingFamily
    Q: float
    index: Mapping[str, int] = field(repr=False)
    out_targets: tuple[tuple[int, ...], ...] = field(repr=False)
    out_rates: tuple[tuple[float, ...], ...] = field(repr=False)
    exit_rate: tuple[float, ...] = field(repr=False)

    @property
    def num_states(self) -> int:
        return len(self.states)

    def state_index(self, x: Union[str, int]) -> int:
        if isinstance(x, str):
            try:
                return self.index[x]
            except KeyError:
                raise ModelError(f"unknown state {x!r}") from None
        if not 0 <= x < len(self.states):
            raise ModelError(f"state index {x} out of range")
        return x

    def mutation_rate(self, x: Union[str, int], y: Union[str, int]) -> float:
        i, j = self.state_index(x), self.state_index(y)
        for t, rate in zip(self.out_targets[i], self.out_rates[i]):
            if t == j:
                return rate
        return 0.0

    def killing_rate(self, r: float, x: Union[str, int]) -> float:
        """Evaluate lambda_r(x); requires r >= 1."""
        if r < 1:
            raise ModelError(f"intensity r must be >= 1, got {r}")
        return self.killing.rate(r, self.state_index(x))

    def min_killing_rate(self, r: float) -> float:
        """The uniform floor min_x lambda_r(x)."""
        if r < 1:
            raise ModelError(f"intensity r must be >= 1, got {r}")
        return self.killing.min_rate(r)

    def alpha(self, x: Union[str, int], y: Union[str, int], r: float | None = None) -> ExtendedRatio:
        """Rate ratio lambda_r(y)/lambda_r(x); ``r=None`` gives the large-r limit."""
        i, j = self.state_index(x), self.state_index(y)
        if i == j:
            return ExtendedRatio(1.0)
        if r is None:
            return self.killing.limit_ratio(i, j)
        if r < 1:
            raise ModelError(f"intensity r must be >= 1, got {r}")
        return ExtendedRatio(self.killing.rate(r, j) / self.killing.rate(r, i))

    def config_dict(self) -> dict:
        """Canonical JSON-ready form (mutation entries sorted)."""
        entries = [
            {"from": self.states[i], "to": self.states[j], "rate": rate}
            for i, j, rate in self.mutation
        ]
        entries.sort(key=lambda e: (e["from"], e["to"]))
        return {
            "states": list(self.states),
            "mutation": entries,
            "killing": self.killing.config_dict(self.states),
        }

    def content_hash(self) -> str:
        blob = json.dumps(self.config_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _positive_rate(value, what: str) -> float:
    try:
        rate = float(value)
    except (TypeError, ValueError):
        raise ModelError(f"{what} must be a number, got {value!r}") from None
    if math.isnan(rate) or math.isinf(rate):
        raise ModelError(f"{what} must be finite, got {value!r}")
    return rate


def validate_model(config: Mapping) -> Model:
    """Build a validated :class:`Model` from a configuration mapping.

    The expected document shape is::

        {"states": [...],
         "mutation": [{"from": ..., "to": ..., "rate": ...}, ...],
         "killing": {"kind": "power", "c": {...}, "beta": {...}}
                  | {"kind": "uniform_plus", "m": {...}}}

    Raises
    ------
    ModelError
        On duplicate or missing states, negative or self-loop mutation
        rates, non-positive power-law parameters, or negative offsets.
    """
    if "states" not in config:
        raise ModelError("config must list states")
    states = tuple(str(s) for s in config["states"])
    if len(states) == 0:
        raise ModelError("states must be nonempty")
    if len(set(states)) != len(states):
        raise ModelError("duplicate state identifiers")
    index = {s: i for i, s in enumerate(states)}

    seen: set[tuple[int, int]] = set()
    entries: list[tuple[int, int, float]] = []
    for entry in config.get("mutation", ()):
        for key in ("from", "to", "rate"):
            if key not in entry:
                raise ModelError(f"mutation entry missing {key!r}: {entry!r}")
        fx, ty = str(entry["from"]), str(entry["to"])
        if fx not in index:
            raise ModelError(f"unknown state in mutation entry: {fx!r}")
        if ty not in index:
            raise ModelError(f"unknown state in mutation entry: {ty!r}")
        rate = _positive_rate(entry["rate"], f"rate q({fx},{ty})")
        if rate < 0:
            raise ModelError(f"negative rate q({fx},{ty}) = {rate}")
        i, j = index[fx], index[ty]
        if i == j:
            raise ModelError(f"self-loop mutation entry at {fx!r}")
        if (i, j) in seen:
            raise ModelError(f"duplicate mutation entry ({fx},{ty})")
        seen.add((i, j))
        if rate > 0:  # zero entries are legal input but carry no dynamics
            entries.append((i, j, rate))
    entries.sort()

    killing_cfg = config.get("killing")
    if not isinstance(killing_cfg, Mapping) or "kind" not in killing_cfg:
        raise ModelError("config must declare a killing family with a 'kind'")
    kind = killing_cfg["kind"]
    if kind == "power":
        c_map, beta_map = killing_cfg.get("c", {}), killing_cfg.get("beta", {})
        c, beta = [], []
        for s in states:
            if s not in c_map or s not in beta_map:
                raise ModelError(f"power-law killing missing parameters for state {s!r}")
            cv = _positive_rate(c_map[s], f"c({s})")
            if cv <= 0:
                raise ModelError(f"c({s}) must be positive, got {cv}")
            bv = _as_fraction(beta_map[s])
            if bv <= 0:
                raise ModelError(f"beta({s}) must be positive, got {beta_map[s]!r}")
            c.append(cv)
            beta.append(bv)
        killing: KillingFamily = PowerLawKilling(tuple(c), tuple(beta))
    elif kind == "uniform_plus":
        m_map = killing_cfg.get("m", {})
        m = []
        for s in states:
            if s not in m_map:
                raise ModelError(f"uniform_plus killing missing offset for state {s!r}")
            mv = _positive_rate(m_map[s], f"m({s})")
            if mv < 0:
                raise ModelError(f"m({s}) must be nonnegative, got {mv}")
            m.append(mv)
        killing = UniformPlusBoundedKilling(tuple(m))
    else:
        raise ModelError(f"unknown killing kind {kind!r}")

    out_targets: list[tuple[int, ...]] = []
    out_rates: list[tuple[float, ...]] = []
    exit_rate: list[float] = []
    for i in range(len(states)):
        row = [(j, rate) for (src, j, rate) in entries if src == i]
        out_targets.append(tuple(j for j, _ in row))
        out_rates.append(tuple(rate for _, rate in row))
        exit_rate.append(math.fsum(rate for _, rate in row))
    Q = max(exit_rate) if exit_rate else 0.0

    return Model(
        states=states,
        mutation=tuple(entries),
        killing=killing,
        Q=Q,
        index=index,
        out_targets=tuple(out_targets),
        out_rates=tuple(out_rates),
        exit_rate=tuple(exit_rate),
    )


def load_model(path) -> Model:
    """Read and validate a model from a JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        return validate_model(json.load(fh))
