"""Shared fixtures and independent numerical oracles for the test suite.

The oracles here deliberately avoid the library's own algorithms:
``dense_expm`` uses plain scaling-and-squaring on the power series,
``brute_force_urn`` enumerates draw sequences with exact rationals, and
``dense_committor`` assembles and solves the absorption system with a
dense LU factorization.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from fvlab import validate_model


# ------------------------------------------------------------- oracles


def dense_expm(G: np.ndarray, t: float) -> np.ndarray:
    """expm(G t) by power series with scaling and squaring (oracle)."""
    A = np.asarray(G, dtype=float) * t
    norm = np.abs(A).sum(axis=1).max()
    squarings = max(0, int(np.ceil(np.log2(norm))) + 1) if norm > 0 else 0
    A = A / (2.0**squarings)
    out = np.eye(A.shape[0])
    term = np.eye(A.shape[0])
    for k in range(1, 40):
        term = term @ A / k
        out = out + term
        if np.abs(term).max() < 1e-18:
            break
    for _ in range(squarings):
        out = out @ out
    return out


def brute_force_urn(initial: tuple[int, ...], draws: int) -> dict[tuple[int, ...], Fraction]:
    """Exact urn law by enumerating every draw sequence (oracle)."""
    outcomes: dict[tuple[int, ...], Fraction] = {}

    def recurse(counts: tuple[int, ...], remaining: int, prob: Fraction) -> None:
        if remaining == 0:
            outcomes[counts] = outcomes.get(counts, Fraction(0)) + prob
            return
        total = sum(counts)
        for i, c in enumerate(counts):
            if c == 0:
                continue
            nxt = list(counts)
            nxt[i] += 1
            recurse(tuple(nxt), remaining - 1, prob * Fraction(c, total))

    recurse(tuple(initial), draws, Fraction(1))
    return outcomes


def dense_committor(weights, n: int) -> dict[tuple[int, ...], np.ndarray]:
    """Absorption probabilities by dense linear solve over compositions.

    Built independently of the library's sparse path: enumerates
    compositions with itertools, assembles the full transition system
    and solves it with numpy's dense solver.
    """
    d = len(weights)
    comps = [c for c in product(range(n + 1), repeat=d) if sum(c) == n]
    index = {c: i for i, c in enumerate(comps)}
    diracs = [tuple(n if i == j else 0 for i in range(d)) for j in range(d)]
    psi = np.zeros((len(comps), d))
    interior = [c for c in comps if c not in diracs]
    if interior:
        A = np.zeros((len(interior), len(interior)))
        B = np.zeros((len(interior), d))
        pos = {c: i for i, c in enumerate(interior)}
        for c, row in pos.items():
            total = 0.0
            for x in range(d):
                for y in range(d):
                    if x == y or c[x] == 0 or c[y] == 0:
                        continue
                    rate = c[x] * weights[x] * c[y] / (n - 1)
                    total += rate
                    nxt = list(c)
                    nxt[x] -= 1
                    nxt[y] += 1
                    nxt = tuple(nxt)
                    if nxt in pos:
                        A[row, pos[nxt]] += rate
                    else:
                        B[row, diracs.index(nxt)] += rate
            A[row, row] -= total
        sol = np.linalg.solve(A, -B)
        for c, row in pos.items():
            psi[index[c]] = sol[row]
    for j, dcomp in enumerate(diracs):
        psi[index[dcomp], j] = 1.0
    return {c: psi[i] for c, i in index.items()}


# ------------------------------------------------------------- fixtures


def cycle_model_config(c=(1.0, 2.0, 4.0), beta=(1, 1, 1), q=1.0) -> dict:
    states = ["a", "b", "c"]
    return {
        "states": states,
        "mutation": [
            {"from": "a", "to": "b", "rate": q},
            {"from": "b", "to": "c", "rate": q},
            {"from": "c", "to": "a", "rate": q},
        ],
        "killing": {
            "kind": "power",
            "c": dict(zip(states, c)),
            "beta": dict(zip(states, beta)),
        },
    }


def two_site_config(alpha: float = 2.0, beta=(1, 1)) -> dict:
    return {
        "states": ["x", "y"],
        "mutation": [],
        "killing": {
            "kind": "power",
            "c": {"x": 1.0, "y": alpha},
            "beta": {"x": beta[0], "y": beta[1]},
        },
    }


@pytest.fixture
def cycle_model():
    return validate_model(cycle_model_config())


@pytest.fixture
def two_site():
    return validate_model(two_site_config())
