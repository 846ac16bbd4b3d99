"""Exact convergence-time ground truth for tiny instances.

Both protocols are invariant under relabeling of the resources, so the
process projected onto sorted load vectors is again a Markov chain with a
much smaller state space.  This module builds that lumped chain in exact
rational arithmetic and solves for expected hitting times of the
equilibrium set, serving as the reference the simulator is tested against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations
from typing import Sequence

from .core import Assignment
from .protocol import (
    DEFAULT_ENUMERATION_BUDGET,
    ProtocolVariant,
    exact_step_distribution,
)


class SingularSystemError(RuntimeError):
    """The hitting-time system has no unique solution (equilibrium unreachable)."""


def sorted_state(loads: Sequence[int]) -> tuple[int, ...]:
    """Canonical representative: loads in non-increasing order."""
    return tuple(sorted(loads, reverse=True))


def enumerate_sorted_states(m: int, n: int) -> list[tuple[int, ...]]:
    """All non-increasing load vectors with m tasks on n resources."""
    out: list[tuple[int, ...]] = []

    def rec(remaining: int, slots: int, cap: int, prefix: list[int]) -> None:
        if slots == 0:
            if remaining == 0:
                out.append(tuple(prefix))
            return
        if remaining > cap * slots:
            return
        for v in range(min(cap, remaining), -1, -1):
            prefix.append(v)
            rec(remaining - v, slots - 1, v, prefix)
            prefix.pop()

    rec(m, n, m, [])
    return out


def _is_nash_sorted(state: tuple[int, ...]) -> bool:
    return state[0] - state[-1] <= 1


@dataclass
class LumpedChain:
    """Exact Markov chain over sorted load vectors for one (m, n, variant)."""

    m: int
    n: int
    variant: ProtocolVariant
    states: list[tuple[int, ...]]
    index: dict[tuple[int, ...], int]
    kernel: list[list[Fraction]]
    absorbing: list[bool]

    def row(self, state: Sequence[int]) -> list[Fraction]:
        return self.kernel[self.index[sorted_state(state)]]


def build_chain(
    m: int,
    n: int,
    variant: ProtocolVariant,
    max_outcomes: int = DEFAULT_ENUMERATION_BUDGET,
) -> LumpedChain:
    """Build the lumped chain by aggregating the per-task enumeration oracle."""
    states = enumerate_sorted_states(m, n)
    index = {s: i for i, s in enumerate(states)}
    kernel: list[list[Fraction]] = []
    absorbing = [_is_nash_sorted(s) for s in states]
    for i, s in enumerate(states):
        dist = exact_step_distribution(Assignment(s), variant, max_outcomes)
        row = [Fraction(0)] * len(states)
        for outcome, prob in dist.items():
            row[index[sorted_state(outcome)]] += prob
        assert sum(row) == 1
        if variant is ProtocolVariant.NEUTRAL_DISALLOWED and absorbing[i]:
            # the strict rule freezes equilibria; anything else is a bug
            assert row[i] == 1
        kernel.append(row)
    return LumpedChain(m, n, variant, states, index, kernel, absorbing)


def _solve(matrix: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    """Exact Gauss-Jordan elimination with nonzero pivoting."""
    k = len(matrix)
    aug = [row[:] + [rhs[i]] for i, row in enumerate(matrix)]
    for col in range(k):
        pivot_row = next((r for r in range(col, k) if aug[r][col] != 0), None)
        if pivot_row is None:
            raise SingularSystemError("hitting-time system is singular")
        aug[col], aug[pivot_row] = aug[pivot_row], aug[col]
        pivot = aug[col][col]
        aug[col] = [v / pivot for v in aug[col]]
        for r in range(k):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [vr - factor * vc for vr, vc in zip(aug[r], aug[col])]
    return [aug[i][k] for i in range(k)]


def hitting_times(chain: LumpedChain) -> list[Fraction]:
    """Expected rounds to first reach the equilibrium set, from every state.

    Solves h(s) = 1 + sum_s' K(s, s') h(s') over the non-equilibrium states
    with h = 0 on equilibria.  Equilibrium states are treated as absorbing
    regardless of variant, which turns the neutral rule's first-hitting
    time into an absorption time without changing its law.
    """
    transient = [i for i, a in enumerate(chain.absorbing) if not a]
    pos = {i: k for k, i in enumerate(transient)}
    size = len(transient)
    matrix = [
        [
            (Fraction(1) if i == j else Fraction(0)) - chain.kernel[i][j]
            for j in transient
        ]
        for i in transient
    ]
    solution = _solve(matrix, [Fraction(1)] * size) if size else []
    times = [Fraction(0)] * len(chain.states)
    for i in transient:
        times[i] = solution[pos[i]]
    return times


def expected_hitting_time(chain: LumpedChain, start: Sequence[int]) -> Fraction:
    """Expected rounds to reach equilibrium from one start state."""
    key = sorted_state(start)
    if key not in chain.index:
        raise KeyError(f"state {key} is not a state of this chain")
    return hitting_times(chain)[chain.index[key]]


def two_zero_ones_hitting_time(n: int) -> Fraction:
    """Exact expected convergence time from one doubled, one empty resource.

    From the state (2, 0, 1, ..., 1) with m == n only the two tasks on the
    doubled resource can ever move, each targeting the empty resource with
    probability 1/n per round (and then always accepting).  Exactly one
    move reaches equilibrium; both moving swaps the two special resources,
    which is the same sorted state.  Solving the resulting two-state chain
    gives n^2 / (2*(n-1)).
    """
    if n < 2:
        raise ValueError(f"need at least two resources, got {n}")
    move = Fraction(1, n)
    exactly_one = 2 * move * (1 - move)
    start = sorted_state([2, 0] + [1] * (n - 2))
    nash = tuple([1] * n)
    chain = LumpedChain(
        m=n,
        n=n,
        variant=ProtocolVariant.NEUTRAL_DISALLOWED,
        states=[start, nash],
        index={start: 0, nash: 1},
        kernel=[[1 - exactly_one, exactly_one], [Fraction(0), Fraction(1)]],
        absorbing=[False, True],
    )
    return expected_hitting_time(chain, start)


def verify_lumpability(
    m: int,
    n: int,
    variant: ProtocolVariant,
    max_outcomes: int = DEFAULT_ENUMERATION_BUDGET,
) -> bool:
    """Check that sorting the state space is a valid quotient.

    For every sorted class, every unsorted member must project to the same
    distribution over sorted outcomes; otherwise the lumped process would
    not be Markov.
    """
    for s in enumerate_sorted_states(m, n):
        seen = set()
        for perm in set(permutations(s)):
            dist = exact_step_distribution(Assignment(perm), variant, max_outcomes)
            projected: dict[tuple[int, ...], Fraction] = {}
            for outcome, prob in dist.items():
                key = sorted_state(outcome)
                projected[key] = projected.get(key, Fraction(0)) + prob
            seen.add(tuple(sorted(projected.items())))
        if len(seen) != 1:
            return False
    return True


def _fraction_str(f: Fraction) -> str:
    return f"{f.numerator}/{f.denominator}"


def chain_to_json(chain: LumpedChain, include_hitting_times: bool = True) -> str:
    """Serialize a chain (and optionally its hitting times) for inspection.

    Probabilities and times are emitted as exact "num/den" strings.
    """
    doc = {
        "m": chain.m,
        "n": chain.n,
        "variant": chain.variant.value,
        "states": [list(s) for s in chain.states],
        "absorbing": chain.absorbing,
        "kernel": [[_fraction_str(v) for v in row] for row in chain.kernel],
    }
    if include_hitting_times:
        doc["hitting_times"] = [_fraction_str(h) for h in hitting_times(chain)]
    return json.dumps(doc, indent=2)
