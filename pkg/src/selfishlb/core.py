"""Load vectors, the balance potential, and equilibrium predicates.

The state of the migration process is an integer load vector.  Everything
here is exact integer/rational arithmetic, so potential comparisons made
by the analysis and oracle modules are never subject to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator

# Supported size envelope: individual loads and the total task count are
# capped at 2**50 so simulation code can keep states in int64 arrays with
# room to spare for column sums.  Potential values use Python's
# arbitrary-width integers and cannot overflow within the envelope.
MAX_LOAD = 1 << 50
MAX_TASKS = 1 << 50


class LoadLimitError(ValueError):
    """An assignment exceeds the supported size envelope."""


class Assignment:
    """An allocation of ``m`` anonymous tasks to ``n`` resources.

    ``loads[i]`` is the number of tasks currently on resource ``i``.
    Instances are immutable value objects (hashable, compared by loads).
    """

    __slots__ = ("loads", "n", "m")

    def __init__(self, loads: Iterable[int]):
        values = tuple(int(v) for v in loads)
        if not values:
            raise ValueError("an assignment needs at least one resource")
        total = 0
        for v in values:
            if v < 0:
                raise ValueError(f"loads must be non-negative, got {v}")
            if v > MAX_LOAD:
                raise LoadLimitError(f"load {v} exceeds the supported maximum 2**50")
            total += v
        if total > MAX_TASKS:
            raise LoadLimitError(f"{total} tasks exceed the supported maximum 2**50")
        self.loads: tuple[int, ...] = values
        self.n: int = len(values)
        self.m: int = total

    def gap(self) -> int:
        """Difference between the largest and smallest load."""
        return max(self.loads) - min(self.loads)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Assignment) and self.loads == other.loads

    def __hash__(self) -> int:
        return hash(self.loads)

    def __repr__(self) -> str:
        return f"Assignment({list(self.loads)!r})"


@dataclass(frozen=True)
class PotentialValue:
    """Exact potential of an assignment.

    ``n_phi`` is the integer ``n * phi``; the potential itself is usually
    fractional, but multiplying by the resource count clears the single
    denominator, so all comparisons can be done on integers.
    """

    n_phi: int
    n: int

    @property
    def exact(self) -> Fraction:
        return Fraction(self.n_phi, self.n)

    def __float__(self) -> float:
        return self.n_phi / self.n


def potential(x: Assignment) -> PotentialValue:
    """Sum of squared deviations of the loads from their mean, exactly.

    Computed in integer form: n * phi == n * sum(x_i^2) - m^2.
    """
    sq = 0
    for v in x.loads:
        sq += v * v
    return PotentialValue(x.n * sq - x.m * x.m, x.n)


def is_nash(x: Assignment) -> bool:
    """True when no pair of loads differs by more than one task."""
    return x.gap() <= 1


def is_eps_nash(x: Assignment, eps: float) -> bool:
    """True when the load spread is at most ``eps`` times the mean load.

    The comparison ``gap <= eps * m / n`` is evaluated in exact rational
    arithmetic so boundary cases do not depend on float rounding.
    """
    if not 0 < eps <= 1:
        raise ValueError(f"eps must be in (0, 1], got {eps}")
    return x.gap() * x.n <= Fraction(eps) * x.m


def phi_bounds(m: int, n: int) -> tuple[Fraction, Fraction]:
    """Smallest and largest possible potential for given task/resource counts.

    The minimum ``r * (1 - r/n)`` (with ``r = m mod n``) is attained exactly
    by the balanced assignments; ``m**2`` is an upper bound for every
    assignment (not necessarily attained).
    """
    if m < 0:
        raise ValueError(f"task count must be non-negative, got {m}")
    if n < 1:
        raise ValueError(f"resource count must be positive, got {n}")
    r = m % n
    return Fraction(r * (n - r), n), Fraction(m * m)


def enumerate_assignments(m: int, n: int) -> Iterator[Assignment]:
    """Yield every load vector with ``m`` tasks on ``n`` resources."""

    def rec(remaining: int, slots: int) -> Iterator[tuple[int, ...]]:
        if slots == 1:
            yield (remaining,)
            return
        for v in range(remaining + 1):
            for rest in rec(remaining - v, slots - 1):
                yield (v, *rest)

    for tup in rec(m, n):
        yield Assignment(tup)
