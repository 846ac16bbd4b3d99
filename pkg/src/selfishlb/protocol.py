"""One-round transition model for both migration protocol variants.

A round is simultaneous: every task decides using the round-start loads
only.  Tasks sharing a source resource behave i.i.d., so a whole round
reduces to one multinomial draw per source row in count space; the cost of
a round is O(n^2) regardless of how many tasks there are.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

import numpy as np

from .core import Assignment

# Largest n**m for which per-task enumeration is attempted (covers m <= 8
# with n <= 4 comfortably).
DEFAULT_ENUMERATION_BUDGET = 1 << 18

# Above this bound the exact kernel numerators no longer fit int64 and are
# held as Python integers instead (n * m is the relevant magnitude).
_INT64_SAFE = 1 << 62


class EnumerationBudgetError(RuntimeError):
    """Exact enumeration was refused because the outcome space is too large."""


class ProtocolVariant(enum.Enum):
    """The two migration rules.

    Under ``NEUTRAL_ALLOWED`` a task may migrate whenever the probed target
    is strictly less loaded than its source.  ``NEUTRAL_DISALLOWED``
    additionally forbids moves onto a target whose load is exactly one
    lower (moves that would leave the task's own cost unchanged).
    In both cases an eligible move from load ``a`` to load ``b`` is taken
    with probability ``1 - b/a``.
    """

    NEUTRAL_ALLOWED = "neutral"
    NEUTRAL_DISALLOWED = "strict"

    @property
    def margin(self) -> int:
        """Migration i -> j is attempted only when ``x_i > x_j + margin``."""
        return 0 if self is ProtocolVariant.NEUTRAL_ALLOWED else 1


class RngStream:
    """Deterministic random stream keyed by (master_seed, trial_id, round_index).

    Built on a counter-based generator: the key fixes the (seed, trial)
    stream family and the top counter word selects the round, so each round
    starts at a position independent of how much randomness earlier rounds
    consumed.  Identical keys reproduce identical draws on every platform,
    which is what makes trial-level parallelism safe.
    """

    __slots__ = (
        "master_seed",
        "trial_id",
        "round_index",
        "_bit_generator",
        "_state_template",
        "generator",
    )

    def __init__(self, master_seed: int, trial_id: int = 0, round_index: int = 0):
        for name, value in (
            ("master_seed", master_seed),
            ("trial_id", trial_id),
            ("round_index", round_index),
        ):
            if not 0 <= value < 1 << 64:
                raise ValueError(f"{name} must fit in 64 bits, got {value}")
        self.master_seed = master_seed
        self.trial_id = trial_id
        self.round_index = round_index
        key = np.array([master_seed, trial_id], dtype=np.uint64)
        self._bit_generator = np.random.Philox(key=key, counter=round_index << 192)
        self._state_template = None
        self.generator = np.random.Generator(self._bit_generator)

    def seek_round(self, round_index: int) -> "RngStream":
        """Jump to the start of another round's stream.

        Equivalent to constructing ``RngStream(master_seed, trial_id,
        round_index)`` afresh, but without object churn in hot loops.
        """
        if not 0 <= round_index < 1 << 64:
            raise ValueError(f"round_index must fit in 64 bits, got {round_index}")
        template = self._state_template
        if template is None:
            template = self._state_template = self._bit_generator.state
        counter = template["state"]["counter"]
        counter[:] = 0
        counter[3] = round_index
        template["buffer_pos"] = 4  # discard blocks buffered at the old position
        template["has_uint32"] = 0
        template["uinteger"] = 0
        self._bit_generator.state = template
        self.round_index = round_index
        return self

    def __repr__(self) -> str:
        return (
            f"RngStream(master_seed={self.master_seed}, "
            f"trial_id={self.trial_id}, round_index={self.round_index})"
        )


@dataclass
class TransitionKernel:
    """Per-task destination probabilities for one round from ``source``.

    ``p[i, j]`` is the probability that one given task on resource ``i``
    finishes the round on resource ``j``.  The same matrix is also stored
    exactly: for ``x_i > 0``, ``p[i, j] == numerators[i, j] / (n * x_i)``.
    Rows with ``x_i == 0`` carry no tasks and are the identity by
    convention (their numerator row is all zero, so they contribute
    nothing to load flow).
    """

    variant: ProtocolVariant
    source: Assignment
    p: np.ndarray
    numerators: np.ndarray

    def expected_next_loads(self) -> list[Fraction]:
        """Exact expected load of every resource after one round.

        ``x_i * p[i, j] == numerators[i, j] / n`` (including zero rows), so
        the expectation is a column sum divided by ``n``.
        """
        n = self.source.n
        totals = self.numerators.sum(axis=0)
        return [Fraction(int(t), n) for t in totals]


@dataclass
class MigrationMatrix:
    """Task movements in one round: ``counts[i, j]`` tasks went i -> j.

    Diagonal entries count tasks that stayed; row i sums to the source
    load of resource i and column sums give the next state.
    """

    counts: np.ndarray

    def next_loads(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def validate(self, source: Assignment) -> None:
        rows = self.counts.sum(axis=1)
        if list(rows) != list(source.loads):
            raise ValueError("migration rows do not add up to the source loads")
        if (self.counts < 0).any():
            raise ValueError("negative migration count")


class _StepWorkspace:
    """Reusable buffers for repeated rounds at fixed n.

    The simulation loop runs millions of O(n^2) rounds; reusing these
    arrays keeps the per-round cost at numpy-kernel level instead of
    allocation level.  The arrays returned by :func:`_kernel_arrays` alias
    this workspace and are only valid until the next round.
    """

    __slots__ = ("n", "diff", "cond", "p", "frow", "nzrow", "recip", "rowsum", "active", "idx")

    def __init__(self, n: int):
        self.n = n
        self.diff = np.empty((n, n), dtype=np.int64)
        self.cond = np.empty((n, n), dtype=bool)
        self.p = np.empty((n, n), dtype=np.float64)
        self.frow = np.empty(n, dtype=np.float64)
        self.nzrow = np.empty(n, dtype=bool)
        self.recip = np.empty(n, dtype=np.float64)
        self.rowsum = np.empty(n, dtype=np.float64)
        self.active = np.empty(n, dtype=bool)
        self.idx = np.arange(n)


def _kernel_arrays(
    loads: np.ndarray, n: int, margin: int, ws: _StepWorkspace | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Float transition matrix and off-diagonal eligibility mask."""
    if ws is None:
        ws = _StepWorkspace(n)
    np.subtract(loads[:, None], loads[None, :], out=ws.diff)
    np.greater(ws.diff, margin, out=ws.cond)
    np.copyto(ws.frow, loads, casting="unsafe")
    ws.frow *= n
    np.greater(ws.frow, 0.0, out=ws.nzrow)
    ws.recip.fill(0.0)
    np.divide(1.0, ws.frow, out=ws.recip, where=ws.nzrow)
    np.copyto(ws.p, ws.diff, casting="unsafe")
    ws.p *= ws.recip[:, None]
    ws.p *= ws.cond  # zero out ineligible targets (and whole zero-load rows)
    ws.p.sum(axis=1, out=ws.rowsum)
    np.subtract(1.0, ws.rowsum, out=ws.rowsum)
    ws.p[ws.idx, ws.idx] = ws.rowsum  # diagonal absorbs the residual
    return ws.p, ws.cond


def kernel(x: Assignment, variant: ProtocolVariant) -> TransitionKernel:
    """Build the one-round transition kernel for state ``x``."""
    n = x.n
    loads = np.asarray(x.loads, dtype=np.int64)
    p, cond = _kernel_arrays(loads, n, variant.margin)
    if n * max(x.m, 1) < _INT64_SAFE:
        num = np.where(cond, loads[:, None] - loads[None, :], 0)
        idx = np.arange(n)
        num[idx, idx] = n * loads - num.sum(axis=1)
    else:
        rows = []
        for i, xi in enumerate(x.loads):
            row = [
                xi - xj if xi > xj + variant.margin else 0 for xj in x.loads
            ]
            row[i] = n * xi - sum(row)
            rows.append(row)
        num = np.array(rows, dtype=object)
    return TransitionKernel(variant, x, p, num)


# with at most this many tasks per resource on average, a round is sampled
# task by task (O(m) work) instead of row by row (O(n^2) work); both routes
# draw from exactly the same per-task law
_PER_TASK_MEAN_LOAD = 4


def _per_task_destinations(
    generator: np.random.Generator,
    loads: np.ndarray,
    n: int,
    margin: int,
    ws: _StepWorkspace,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample every task's probe and acceptance directly; returns (src, final).

    Each task probes a uniform resource and accepts an eligible move with
    probability 1 - target/source; the comparison is done as
    u * source < source - target, which avoids any division.
    """
    src = np.repeat(ws.idx, loads)
    dest = generator.integers(0, n, size=src.shape[0])
    accept = generator.random(src.shape[0])
    ls = loads[src]
    ld = loads[dest]
    move = ls > ld + margin
    move &= accept * ls < ls - ld
    return src, np.where(move, dest, src)


def _draw_row_moves(
    generator: np.random.Generator,
    loads: np.ndarray,
    p: np.ndarray,
    cond: np.ndarray,
    ws: _StepWorkspace,
) -> np.ndarray | None:
    """Row-wise multinomial draws for one round; None when nothing can move.

    Rows without an eligible target are deterministic (all tasks stay), so
    when few rows can move only those rows are drawn; when most rows can
    move the whole matrix goes through one broadcast draw (the inactive
    rows come back as their deterministic diagonal).  Both branches are a
    pure function of the state, so trajectories stay reproducible.
    """
    np.any(cond, axis=1, out=ws.active)
    movable = int(ws.active.sum())
    if movable == 0:
        return None
    if 2 * movable >= ws.n:
        return generator.multinomial(loads, p)
    counts = np.zeros((ws.n, ws.n), dtype=np.int64)
    counts[ws.idx, ws.idx] = loads
    counts[ws.active] = generator.multinomial(loads[ws.active], p[ws.active])
    return counts


def _advance_loads(
    generator: np.random.Generator,
    loads: np.ndarray,
    n: int,
    margin: int,
    ws: _StepWorkspace | None = None,
    total: int | None = None,
) -> np.ndarray:
    """One synchronous round on a raw int64 load vector (hot-loop body)."""
    if ws is None:
        ws = _StepWorkspace(n)
    if total is None:
        total = int(loads.sum())
    if total <= _PER_TASK_MEAN_LOAD * n:
        _, final = _per_task_destinations(generator, loads, n, margin, ws)
        return np.bincount(final, minlength=n)
    p, cond = _kernel_arrays(loads, n, margin, ws)
    moves = _draw_row_moves(generator, loads, p, cond, ws)
    if moves is None:
        return loads
    return moves.sum(axis=0)


def step(x: Assignment, variant: ProtocolVariant, rng: RngStream) -> tuple[Assignment, MigrationMatrix]:
    """Advance one round; returns the new state and the realized moves.

    Each source row's moves follow one exact multinomial draw over its
    per-task destination probabilities; rows are mutually independent.
    Rows with no eligible target (including empty resources) keep their
    tasks in place.
    """
    n = x.n
    loads = np.asarray(x.loads, dtype=np.int64)
    ws = _StepWorkspace(n)
    if x.m <= _PER_TASK_MEAN_LOAD * n:
        src, final = _per_task_destinations(rng.generator, loads, n, variant.margin, ws)
        moves = np.bincount(src * n + final, minlength=n * n).reshape(n, n)
    else:
        p, cond = _kernel_arrays(loads, n, variant.margin, ws)
        moves = _draw_row_moves(rng.generator, loads, p, cond, ws)
        if moves is None:
            moves = np.zeros((n, n), dtype=np.int64)
            moves[ws.idx, ws.idx] = loads
    nxt = Assignment(int(v) for v in moves.sum(axis=0))
    return nxt, MigrationMatrix(moves)


def sample_next_states(
    x: Assignment, variant: ProtocolVariant, rng: RngStream, size: int
) -> np.ndarray:
    """Draw ``size`` independent one-round outcomes from ``x`` at once.

    Returns an int64 array of shape (size, n).  Used by the Monte Carlo
    checkers; the per-row draws go through the same multinomial sampler as
    :func:`step`.
    """
    n = x.n
    loads = np.asarray(x.loads, dtype=np.int64)
    p, cond = _kernel_arrays(loads, n, variant.margin)
    active = cond.any(axis=1)
    if not active.any():
        return np.tile(loads, (size, 1))
    base = np.where(active, 0, loads)
    k = int(active.sum())
    draws = rng.generator.multinomial(loads[active], p[active], size=(size, k))
    return base + draws.sum(axis=1)


def exact_step_distribution(
    x: Assignment,
    variant: ProtocolVariant,
    max_outcomes: int = DEFAULT_ENUMERATION_BUDGET,
) -> dict[tuple[int, ...], Fraction]:
    """Exact one-round distribution over next states, by per-task enumeration.

    Every task independently either stays or moves to an eligible target j
    with probability (x_i - x_j) / (n * x_i); enumerating all joint
    destination choices and accumulating yields the exact rational law of
    the next load vector.  Intended as the ground-truth oracle for tiny
    states; refuses when the branch count (at most n**m, but smaller when
    some tasks have no eligible target) exceeds ``max_outcomes``.
    """
    n = x.n
    margin = variant.margin
    frozen = [0] * n  # tasks with no eligible target stay deterministically
    movable: list[tuple[list[tuple[int, Fraction]], int]] = []
    for i, xi in enumerate(x.loads):
        if xi == 0:
            continue
        options: list[tuple[int, Fraction]] = []
        stay = Fraction(1)
        for j, xj in enumerate(x.loads):
            if xi > xj + margin:
                q = Fraction(xi - xj, n * xi)
                options.append((j, q))
                stay -= q
        if options:
            options.append((i, stay))
            movable.append((options, xi))
        else:
            frozen[i] = xi

    movable_tasks = sum(count for _, count in movable)
    if movable_tasks > 64:  # at least 2**64 branches, over any sane budget
        branches = None
    else:
        branches = 1
        for options, count in movable:
            branches *= len(options) ** count
    if branches is None or branches > max_outcomes:
        raise EnumerationBudgetError(
            f"per-task enumeration needs {branches or 'more than 2**64'} "
            f"branches, budget is {max_outcomes}"
        )

    per_task: list[list[tuple[int, Fraction]]] = []
    for options, count in movable:
        per_task.extend([options] * count)
    dist: dict[tuple[int, ...], Fraction] = {}
    for combo in product(*per_task):
        tally = frozen.copy()
        prob = Fraction(1)
        for dest, q in combo:
            tally[dest] += 1
            prob *= q
        key = tuple(tally)
        dist[key] = dist.get(key, Fraction(0)) + prob
    assert sum(dist.values()) == 1
    return dist
