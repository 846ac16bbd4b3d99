"""Closed-form drift quantities and machine checks of the convergence bounds.

All quantities here concern the strict (neutral-disallowed) rule, whose
potential is a supermartingale; the exact checkers route through the
per-task enumeration oracle, the Monte Carlo checkers through the same
sampler the simulator uses.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np

from .core import Assignment, is_nash, potential
from .protocol import (
    DEFAULT_ENUMERATION_BUDGET,
    ProtocolVariant,
    RngStream,
    exact_step_distribution,
    sample_next_states,
)

_STRICT = ProtocolVariant.NEUTRAL_DISALLOWED


@dataclass(frozen=True)
class DriftReport:
    """Per-state drift quantities for the strict rule.

    ``u = u1/n + u2/n**2`` upper-bounds the expected potential one round
    later.  ``u1`` sums |x_i - x_j| over ordered pairs differing by at
    least two (the variance contribution); ``u2`` sums, per resource, the
    squared difference between the number of resources exactly one below
    and exactly one above it (the squared-mean contribution).  ``d[i]`` is
    the exact drift of resource i's expected load; ``slack = phi - u`` is
    non-negative for every assignment, which is what makes the potential a
    supermartingale.
    """

    phi: Fraction
    u1: int
    u2: int
    u: Fraction
    d: tuple[Fraction, ...]
    var_upper: tuple[Fraction, ...]
    slack: Fraction


def variance_floor(n: int) -> Fraction:
    """Lower bound 0.4 / n**2 on the per-round potential-change probability."""
    if n < 1:
        raise ValueError(f"resource count must be positive, got {n}")
    return Fraction(2, 5 * n * n)


def variance_upper_bounds(x: Assignment) -> tuple[Fraction, ...]:
    """Per-resource upper bound on the variance of the next load.

    For resource i this is (1/n) * (sum of loads above x_i+1 minus x_i,
    plus x_i minus each load below x_i-1).
    """
    n = x.n
    counts = Counter(x.loads)
    bounds = []
    for xi in x.loads:
        total = 0
        for value, cnt in counts.items():
            if value > xi + 1:
                total += cnt * (value - xi)
            elif value < xi - 1:
                total += cnt * (xi - value)
        bounds.append(Fraction(total, n))
    return tuple(bounds)


def drift_report(x: Assignment) -> DriftReport:
    """All drift quantities of one state, in exact arithmetic."""
    n = x.n
    counts = Counter(x.loads)
    u1 = 0
    for a, ca in counts.items():
        for b, cb in counts.items():
            if abs(a - b) > 1:
                u1 += ca * cb * abs(a - b)
    u2 = 0
    d = []
    for xi in x.loads:
        below = counts.get(xi - 1, 0)
        above = counts.get(xi + 1, 0)
        u2 += (below - above) ** 2
        d.append(Fraction(below - above, n))
    phi = potential(x).exact
    u = Fraction(u1, n) + Fraction(u2, n * n)
    return DriftReport(
        phi=phi,
        u1=u1,
        u2=u2,
        u=u,
        d=tuple(d),
        var_upper=variance_upper_bounds(x),
        slack=phi - u,
    )


def expected_next_potential_bound(x: Assignment) -> float:
    """Coarse upper bound n + 2*sqrt(n*phi) on the expected next potential."""
    return x.n + 2.0 * math.sqrt(potential(x).n_phi)


def _batch_n_phi(states: np.ndarray, n: int) -> np.ndarray:
    """n*phi for each row of an int64 state matrix, exactly."""
    peak = int(states.max(initial=0))
    if n * n * peak * peak < 1 << 62:
        sq = (states * states).sum(axis=1)
        tot = states.sum(axis=1)
        return n * sq - tot * tot
    return np.array(
        [n * sum(v * v for v in row) - sum(row) ** 2 for row in states.tolist()],
        dtype=object,
    )


def check_supermartingale(
    x: Assignment, trials: int, rng: RngStream
) -> tuple[float, float, Fraction]:
    """Monte Carlo estimate of the expected next potential against its bound.

    Returns (mc_mean, std_err, u(x)); the drift bound contract is
    ``mc_mean <= u(x) + 3 * std_err``.
    """
    if trials < 1000:
        raise ValueError(f"need at least 1000 trials, got {trials}")
    nxt = sample_next_states(x, _STRICT, rng, trials)
    phis = np.asarray(_batch_n_phi(nxt, x.n), dtype=np.float64) / x.n
    mean = float(phis.mean())
    std_err = float(phis.std(ddof=1) / math.sqrt(trials))
    return mean, std_err, drift_report(x).u


def check_variance_lemma(
    x: Assignment, trials: int, rng: RngStream
) -> tuple[float, Fraction]:
    """Monte Carlo estimate of Pr(potential changes in one strict round).

    Returns (p_change, floor); the contract is ``p_change >= floor`` up to
    binomial sampling error.  Requires a non-equilibrium state: from an
    equilibrium the strict rule never moves, so the probability is zero and
    the bound does not apply.
    """
    if is_nash(x):
        raise ValueError("state is already an equilibrium; nothing can change")
    if trials < 10_000:
        raise ValueError(f"need at least 10000 trials, got {trials}")
    nxt = sample_next_states(x, _STRICT, rng, trials)
    n_phi0 = potential(x).n_phi
    changed = _batch_n_phi(nxt, x.n) != n_phi0
    return float(np.mean(changed)), variance_floor(x.n)


def _compositions5(n: int) -> Iterator[tuple[int, int, int, int, int]]:
    for a in range(n + 1):
        for b in range(n - a + 1):
            for c in range(n - a - b + 1):
                for d in range(n - a - b - c + 1):
                    yield a, b, c, d, n - a - b - c - d


def check_five_level_identity(n: int) -> bool:
    """Verify the exact potential-drop identity on five consecutive levels.

    For every split (n0..n4) of the n resources over loads z..z+4 the
    quantity n^2*phi - n^2*u equals a fixed 16-term polynomial in the
    level counts with positive coefficients (hence is non-negative).  Both
    sides are evaluated in exact integer arithmetic; both base loads
    z in {0, 1} are tested to confirm shift invariance.  Cost grows as
    C(n+4, 4); intended for n <= 8.
    """
    for n0, n1, n2, n3, n4 in _compositions5(n):
        rhs = (
            4 * n0 * n1 * n2
            + 3 * n0 * n0 * n3
            + 4 * n0 * n1 * n3
            + 4 * n0 * n2 * n3
            + 4 * n1 * n2 * n3
            + 3 * n0 * n3 * n3
            + 8 * n0 * n0 * n4
            + 12 * n0 * n1 * n4
            + 3 * n1 * n1 * n4
            + 8 * n0 * n2 * n4
            + 4 * n1 * n2 * n4
            + 12 * n0 * n3 * n4
            + 4 * n1 * n3 * n4
            + 4 * n2 * n3 * n4
            + 8 * n0 * n4 * n4
            + 3 * n1 * n4 * n4
        )
        for z in (0, 1):
            x = Assignment(
                [z] * n0 + [z + 1] * n1 + [z + 2] * n2 + [z + 3] * n3 + [z + 4] * n4
            )
            report = drift_report(x)
            # n^2 * phi == n * n_phi; n^2 * u == n * u1 + u2
            lhs = n * potential(x).n_phi - (n * report.u1 + report.u2)
            if lhs != rhs:
                return False
    return True


def exact_expected_next_potential(
    x: Assignment,
    variant: ProtocolVariant = _STRICT,
    max_outcomes: int = DEFAULT_ENUMERATION_BUDGET,
) -> Fraction:
    """Exact expected potential after one round, via the enumeration oracle."""
    dist = exact_step_distribution(x, variant, max_outcomes)
    total = Fraction(0)
    for outcome, prob in dist.items():
        total += prob * potential(Assignment(outcome)).exact
    return total


def exact_change_probability(
    x: Assignment,
    variant: ProtocolVariant = _STRICT,
    max_outcomes: int = DEFAULT_ENUMERATION_BUDGET,
) -> Fraction:
    """Exact probability that one round changes the potential."""
    dist = exact_step_distribution(x, variant, max_outcomes)
    n_phi0 = potential(x).n_phi
    total = Fraction(0)
    for outcome, prob in dist.items():
        if potential(Assignment(outcome)).n_phi != n_phi0:
            total += prob
    return total


def sqrt_drift_bound_holds_exact(
    x: Assignment, max_outcomes: int = DEFAULT_ENUMERATION_BUDGET
) -> bool:
    """Exact check of E[next phi] <= n + 2*sqrt(n*phi) for one state.

    Avoids irrational arithmetic by squaring: with E the exact expectation
    and P = n*phi, the bound holds iff E <= n or (E - n)^2 <= 4*P.
    """
    expectation = exact_expected_next_potential(x, _STRICT, max_outcomes)
    n = x.n
    if expectation <= n:
        return True
    return (expectation - n) ** 2 <= 4 * potential(x).n_phi
