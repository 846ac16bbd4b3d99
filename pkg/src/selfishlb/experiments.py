"""Seeded experiment harness, result serialization, and the command line.

Trials are independent units of work: each one draws from streams keyed by
(master_seed, trial_id, round), so results are identical whether trials run
sequentially or on a process pool, and reruns are byte-reproducible.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from .core import Assignment, LoadLimitError, potential
from .oracle import build_chain, chain_to_json
from .protocol import (
    EnumerationBudgetError,
    ProtocolVariant,
    RngStream,
    _advance_loads,
    _StepWorkspace,
)

DEFAULT_MAX_ROUNDS = 10**6

TRIALS_CSV_HEADER = ("trial_id", "t_nash", "t_eps_nash", "rounds_executed", "censored")
TRACE_CSV_HEADER = ("trial_id", "round", "n_phi", "max_load", "min_load")


def all_on_one(m: int, n: int) -> Assignment:
    """Every task on the first resource."""
    return Assignment([m] + [0] * (n - 1))


def two_zero_ones(n: int) -> Assignment:
    """One doubled resource, one empty, the rest with a single task (m == n)."""
    if n < 2:
        raise ValueError(f"need at least two resources, got {n}")
    return Assignment([2, 0] + [1] * (n - 2))


@dataclass(frozen=True)
class RecordFlags:
    """Which optional measurements a run stores.

    ``nash_time`` is always effectively on (it is the stopping rule) and is
    kept only so configs echo faithfully; ``eps_nash_time`` additionally
    needs ``epsilon`` to be set.
    """

    potential_trace: bool = False
    eps_nash_time: bool = True
    nash_time: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of one seeded experiment.

    ``init`` is "all-on-one", "two-zero-ones" (requires m == n), or an
    explicit load tuple.  A trial runs until the state is an equilibrium or
    ``max_rounds`` rounds have executed, whichever comes first.
    """

    protocol: ProtocolVariant
    n: int
    m: int
    init: str | tuple[int, ...]
    trials: int
    master_seed: int
    max_rounds: int = DEFAULT_MAX_ROUNDS
    epsilon: float | None = None
    record: RecordFlags = field(default_factory=RecordFlags)

    def validate(self) -> None:
        if self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        if self.m < 0:
            raise ValueError(f"m must be non-negative, got {self.m}")
        if self.trials < 1:
            raise ValueError(f"trials must be positive, got {self.trials}")
        if self.max_rounds < 1:
            raise ValueError(f"max_rounds must be positive, got {self.max_rounds}")
        if not 0 <= self.master_seed < 1 << 64:
            raise ValueError(f"master_seed must fit in 64 bits, got {self.master_seed}")
        if self.epsilon is not None and not 0 < self.epsilon <= 1:
            raise ValueError(f"epsilon must be in (0, 1], got {self.epsilon}")
        self.initial_assignment()

    def initial_assignment(self) -> Assignment:
        if self.init == "all-on-one":
            x = all_on_one(self.m, self.n)
        elif self.init == "two-zero-ones":
            if self.m != self.n:
                raise ValueError("two-zero-ones requires m == n")
            x = two_zero_ones(self.n)
        elif isinstance(self.init, tuple):
            x = Assignment(self.init)
            if x.n != self.n:
                raise ValueError(f"custom init has {x.n} loads, expected n={self.n}")
        else:
            raise ValueError(f"unknown init {self.init!r}")
        if x.m != self.m:
            raise ValueError(f"init holds {x.m} tasks, expected m={self.m}")
        return x


def config_to_json_dict(cfg: ExperimentConfig) -> dict:
    return {
        "protocol": cfg.protocol.value,
        "n": cfg.n,
        "m": cfg.m,
        "init": list(cfg.init) if isinstance(cfg.init, tuple) else cfg.init,
        "trials": cfg.trials,
        "master_seed": cfg.master_seed,
        "max_rounds": cfg.max_rounds,
        "epsilon": cfg.epsilon,
        "record": {
            "potential_trace": cfg.record.potential_trace,
            "eps_nash_time": cfg.record.eps_nash_time,
            "nash_time": cfg.record.nash_time,
        },
    }


def config_from_json_dict(doc: dict) -> ExperimentConfig:
    record = doc.get("record", {})
    init = doc["init"]
    return ExperimentConfig(
        protocol=ProtocolVariant(doc["protocol"]),
        n=int(doc["n"]),
        m=int(doc["m"]),
        init=tuple(int(v) for v in init) if isinstance(init, list) else init,
        trials=int(doc["trials"]),
        master_seed=int(doc["master_seed"]),
        max_rounds=int(doc.get("max_rounds", DEFAULT_MAX_ROUNDS)),
        epsilon=None if doc.get("epsilon") is None else float(doc["epsilon"]),
        record=RecordFlags(
            potential_trace=bool(record.get("potential_trace", False)),
            eps_nash_time=bool(record.get("eps_nash_time", True)),
            nash_time=bool(record.get("nash_time", True)),
        ),
    )


@dataclass
class TrialRecord:
    """Per-trial measurements.

    ``t_nash`` is the first round at which the state is an equilibrium, or
    None when the trial was cut off (censored) at ``max_rounds`` first.
    ``phi_trace`` rows are (round, n_phi, max_load, min_load) for every
    visited round, with n_phi the exact integer n * potential.
    """

    trial_id: int
    t_nash: int | None
    t_eps_nash: int | None
    rounds_executed: int
    phi_trace: list[tuple[int, int, int, int]] | None = None

    @property
    def censored(self) -> bool:
        return self.t_nash is None


def _exact_n_phi(loads: np.ndarray, n: int) -> int:
    values = loads.tolist()
    total = sum(values)
    return n * sum(v * v for v in values) - total * total


def _run_trial(cfg: ExperimentConfig, trial_id: int) -> TrialRecord:
    x0 = cfg.initial_assignment()
    n = cfg.n
    margin = cfg.protocol.margin
    loads = np.asarray(x0.loads, dtype=np.int64)
    stream = RngStream(cfg.master_seed, trial_id, 0)
    generator = stream.generator

    eps_pair: tuple[int, int] | None = None
    if cfg.epsilon is not None and cfg.record.eps_nash_time:
        frac = Fraction(cfg.epsilon)
        # gap <= eps * m / n  <=>  gap * n * den <= num * m, all integers
        eps_pair = (n * frac.denominator, frac.numerator * cfg.m)

    trace: list[tuple[int, int, int, int]] | None = (
        [] if cfg.record.potential_trace else None
    )
    ws = _StepWorkspace(n)
    t = 0
    t_nash: int | None = None
    t_eps: int | None = None
    while True:
        mx = int(loads.max())
        mn = int(loads.min())
        gap = mx - mn
        if trace is not None:
            trace.append((t, _exact_n_phi(loads, n), mx, mn))
        if t_eps is None and eps_pair is not None and gap * eps_pair[0] <= eps_pair[1]:
            t_eps = t
        if gap <= 1:
            t_nash = t
            break
        if t >= cfg.max_rounds:
            break
        stream.seek_round(t)
        loads = _advance_loads(generator, loads, n, margin, ws, cfg.m)
        assert int(loads.sum()) == cfg.m  # task conservation, every round
        t += 1
    return TrialRecord(
        trial_id=trial_id,
        t_nash=t_nash,
        t_eps_nash=t_eps,
        rounds_executed=t,
        phi_trace=trace,
    )


def _trial_worker(args: tuple[ExperimentConfig, int]) -> TrialRecord:
    return _run_trial(*args)


@dataclass
class SummaryStats:
    """Aggregate statistics of the equilibrium hitting time.

    Location statistics are computed over uncensored trials only, with the
    censored count reported alongside.  ``phi_tail_fractions`` (present only
    when potential traces were recorded) gives, per round, the fraction of
    trials whose potential still exceeded 720 * n.
    """

    trials: int
    censored_count: int
    mean: float | None
    median: float | None
    p10: float | None
    p90: float | None
    std_err: float | None
    phi_tail_fractions: dict[int, float] | None = None

    def to_json_dict(self) -> dict:
        doc = {
            "trials": self.trials,
            "censored_count": self.censored_count,
            "mean": self.mean,
            "median": self.median,
            "p10": self.p10,
            "p90": self.p90,
            "std_err": self.std_err,
        }
        if self.phi_tail_fractions is not None:
            doc["phi_tail_fractions"] = {
                str(k): v for k, v in self.phi_tail_fractions.items()
            }
        return doc


def phi_tail_fractions(
    records: Sequence[TrialRecord], n: int, threshold_n_phi: int | None = None
) -> dict[int, float]:
    """Per-round fraction of traced trials with potential above a threshold.

    The default threshold is 720 * n (i.e. n_phi above 720 * n**2).  Trials
    whose trace ended earlier (the run froze at an equilibrium) contribute
    their final value.
    """
    traced = [r for r in records if r.phi_trace]
    if not traced:
        return {}
    if threshold_n_phi is None:
        threshold_n_phi = 720 * n * n
    horizon = max(len(r.phi_trace) for r in traced)
    out: dict[int, float] = {}
    for t in range(horizon):
        hits = 0
        for r in traced:
            trace = r.phi_trace
            value = trace[t][1] if t < len(trace) else trace[-1][1]
            if value > threshold_n_phi:
                hits += 1
        out[t] = hits / len(traced)
    return out


def summarize(records: Sequence[TrialRecord], n: int | None = None) -> SummaryStats:
    uncensored = [r.t_nash for r in records if r.t_nash is not None]
    censored = len(records) - len(uncensored)
    if uncensored:
        values = np.asarray(uncensored, dtype=np.float64)
        mean = float(values.mean())
        p10, median, p90 = (float(v) for v in np.percentile(values, [10, 50, 90]))
        std_err = (
            float(values.std(ddof=1) / math.sqrt(len(values)))
            if len(values) > 1
            else 0.0
        )
    else:
        mean = median = p10 = p90 = std_err = None
    tails = phi_tail_fractions(records, n) if n is not None else {}
    return SummaryStats(
        trials=len(records),
        censored_count=censored,
        mean=mean,
        median=median,
        p10=p10,
        p90=p90,
        std_err=std_err,
        phi_tail_fractions=tails or None,
    )


def run_experiment(
    cfg: ExperimentConfig, workers: int = 1
) -> tuple[list[TrialRecord], SummaryStats]:
    """Execute all trials of one config; deterministic in (config, seed).

    With ``workers > 1`` trials are distributed over a process pool; the
    per-trial streams make the result identical to the sequential run.
    """
    cfg.validate()
    if workers <= 1:
        records = [_run_trial(cfg, t) for t in range(cfg.trials)]
    else:
        jobs = [(cfg, t) for t in range(cfg.trials)]
        chunk = max(1, cfg.trials // (workers * 8))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_trial_worker, jobs, chunksize=chunk))
    records.sort(key=lambda r: r.trial_id)
    return records, summarize(records, cfg.n)


def tau_for_initial_potential(phi0: float | int | Fraction) -> int:
    """Round index ceil(lg lg phi0) at which the potential tail is checked."""
    value = float(phi0)
    if value <= 2.0:
        return 0
    return max(0, math.ceil(math.log2(math.log2(value))))


def tail_fraction_at_tau(
    records: Sequence[TrialRecord], n: int, phi0: float | int | Fraction
) -> float:
    """Fraction of trials whose potential exceeds 720 * n at round tau.

    ``tau = ceil(lg lg phi0)``.  Requires potential traces; traces that end
    before tau contribute their final (frozen) value, which is only correct
    for the strict rule, where equilibria are absorbing.
    """
    tau = tau_for_initial_potential(phi0)
    threshold = 720 * n * n  # n_phi scale
    hits = 0
    for r in records:
        if not r.phi_trace:
            raise ValueError(f"trial {r.trial_id} has no potential trace")
        trace = r.phi_trace
        value = trace[tau][1] if tau < len(trace) else trace[-1][1]
        if value > threshold:
            hits += 1
    return hits / len(records)


def scaling_curve(
    protocol: ProtocolVariant,
    n: int,
    m_list: Sequence[int],
    eps: float,
    trials: int,
    seed: int,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    workers: int = 1,
) -> list[dict]:
    """Mean time to reach the eps-balanced band, as the task count grows.

    One row per m, always starting from all tasks on one resource.  The
    same seed is reused across the m values (common random numbers), which
    sharpens comparisons between consecutive points.
    """
    rows = []
    for m in m_list:
        cfg = ExperimentConfig(
            protocol=protocol,
            n=n,
            m=m,
            init="all-on-one",
            trials=trials,
            master_seed=seed,
            max_rounds=max_rounds,
            epsilon=eps,
        )
        records, _ = run_experiment(cfg, workers=workers)
        reached = [r.t_eps_nash for r in records if r.t_eps_nash is not None]
        values = np.asarray(reached, dtype=np.float64)
        mean = float(values.mean()) if reached else None
        std_err = (
            float(values.std(ddof=1) / math.sqrt(len(values)))
            if len(reached) > 1
            else 0.0
        )
        rows.append(
            {
                "m": m,
                "mean_t_eps_nash": mean,
                "std_err": std_err,
                "missing": trials - len(reached),
            }
        )
    return rows


def neutral_slowness_curve(
    n_list: Sequence[int],
    trials: int,
    seed: int,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    workers: int = 1,
) -> list[dict]:
    """Median convergence time of the neutral rule at m == n, per n.

    Starts from all tasks on one resource.  Medians are over uncensored
    trials; the censored count is reported rather than imputed.
    """
    rows = []
    for n in n_list:
        cfg = ExperimentConfig(
            protocol=ProtocolVariant.NEUTRAL_ALLOWED,
            n=n,
            m=n,
            init="all-on-one",
            trials=trials,
            master_seed=seed,
            max_rounds=max_rounds,
        )
        records, summary = run_experiment(cfg, workers=workers)
        rows.append(
            {
                "n": n,
                "median_t_nash": summary.median,
                "censored": summary.censored_count,
            }
        )
    return rows


# ---------------------------------------------------------------------------
# serialization


def write_trials_csv(records: Iterable[TrialRecord], fp: TextIO) -> None:
    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(TRIALS_CSV_HEADER)
    for r in records:
        writer.writerow(
            [
                r.trial_id,
                "" if r.t_nash is None else r.t_nash,
                "" if r.t_eps_nash is None else r.t_eps_nash,
                r.rounds_executed,
                int(r.censored),
            ]
        )


def trials_csv_bytes(records: Iterable[TrialRecord]) -> bytes:
    buf = io.StringIO()
    write_trials_csv(records, buf)
    return buf.getvalue().encode("utf-8")


def read_trials_csv(fp: TextIO) -> list[TrialRecord]:
    reader = csv.reader(fp)
    header = next(reader)
    if tuple(header) != TRIALS_CSV_HEADER:
        raise ValueError(f"unexpected trial CSV header {header}")
    records = []
    for row in reader:
        records.append(
            TrialRecord(
                trial_id=int(row[0]),
                t_nash=None if row[1] == "" else int(row[1]),
                t_eps_nash=None if row[2] == "" else int(row[2]),
                rounds_executed=int(row[3]),
            )
        )
    return records


def write_trace_csv(records: Iterable[TrialRecord], fp: TextIO) -> None:
    # n_phi goes out as a decimal string; it can exceed float precision
    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(TRACE_CSV_HEADER)
    for r in records:
        for t, n_phi, mx, mn in r.phi_trace or ():
            writer.writerow([r.trial_id, t, n_phi, mx, mn])


def records_json_list(records: Iterable[TrialRecord]) -> list[dict]:
    out = []
    for r in records:
        doc: dict = {
            "trial_id": r.trial_id,
            "t_nash": r.t_nash,
            "t_eps_nash": r.t_eps_nash,
            "rounds_executed": r.rounds_executed,
            "censored": r.censored,
        }
        if r.phi_trace is not None:
            doc["phi_trace"] = [
                {"round": t, "n_phi": str(n_phi), "max_load": mx, "min_load": mn}
                for t, n_phi, mx, mn in r.phi_trace
            ]
        out.append(doc)
    return out


def summary_json_dict(cfg: ExperimentConfig, summary: SummaryStats) -> dict:
    return {"config": config_to_json_dict(cfg), "summary": summary.to_json_dict()}


# ---------------------------------------------------------------------------
# command line


def _parse_init(text: str) -> str | tuple[int, ...]:
    if text in ("all-on-one", "two-zero-ones"):
        return text
    if text.startswith("custom="):
        return tuple(int(v) for v in text[len("custom="):].split(","))
    raise argparse.ArgumentTypeError(
        f"init must be all-on-one, two-zero-ones or custom=<comma list>, got {text!r}"
    )


def _parse_int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",")]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="selfishlb",
        description="Simulate and analyze randomized selfish load-balancing protocols.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run seeded trials and write per-trial records")
    sim.add_argument("--config", type=Path, help="JSON config file; flags override it")
    sim.add_argument("--protocol", choices=["neutral", "strict"])
    sim.add_argument("--n", type=int, help="number of resources")
    sim.add_argument("--m", type=int, help="number of tasks")
    sim.add_argument("--init", type=_parse_init,
                     help="all-on-one | two-zero-ones | custom=<comma list>")
    sim.add_argument("--trials", type=int)
    sim.add_argument("--seed", type=int, help="64-bit master seed")
    sim.add_argument("--max-rounds", type=int)
    sim.add_argument("--epsilon", type=float)
    sim.add_argument("--record-phi", action="store_true", default=None,
                     help="record the exact potential every round")
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--out", type=Path, help="output path (stdout when omitted)")
    sim.add_argument("--format", choices=["csv", "json"], default="csv")
    sim.set_defaults(handler=_cmd_simulate)

    ver = sub.add_parser("verify-lemmas", help="machine-check the drift and variance bounds")
    ver.add_argument("--n-max", type=int, default=8,
                     help="largest n for the five-level identity sweep")
    ver.add_argument("--random-states", type=int, default=2000)
    ver.add_argument("--seed", type=int, default=20260810)
    ver.set_defaults(handler=_cmd_verify_lemmas)

    orc = sub.add_parser("oracle", help="dump the exact lumped chain and hitting times")
    orc.add_argument("--m", type=int, required=True)
    orc.add_argument("--n", type=int, required=True)
    orc.add_argument("--protocol", choices=["neutral", "strict"], default="strict")
    orc.add_argument("--out", type=Path)
    orc.set_defaults(handler=_cmd_oracle)

    sca = sub.add_parser("scaling", help="mean time to the eps-balanced band vs task count")
    sca.add_argument("--protocol", choices=["neutral", "strict"], default="strict")
    sca.add_argument("--n", type=int, required=True)
    sca.add_argument("--m-list", type=_parse_int_list, required=True)
    sca.add_argument("--epsilon", type=float, default=0.1)
    sca.add_argument("--trials", type=int, default=200)
    sca.add_argument("--seed", type=int, default=1)
    sca.add_argument("--max-rounds", type=int, default=DEFAULT_MAX_ROUNDS)
    sca.add_argument("--workers", type=int, default=1)
    sca.add_argument("--out", type=Path)
    sca.set_defaults(handler=_cmd_scaling)

    slo = sub.add_parser("neutral-slowness",
                         help="median convergence time of the neutral rule at m == n")
    slo.add_argument("--n-list", type=_parse_int_list, required=True)
    slo.add_argument("--trials", type=int, default=500)
    slo.add_argument("--seed", type=int, default=1)
    slo.add_argument("--max-rounds", type=int, default=DEFAULT_MAX_ROUNDS)
    slo.add_argument("--workers", type=int, default=1)
    slo.add_argument("--out", type=Path)
    slo.set_defaults(handler=_cmd_neutral_slowness)

    return parser


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    doc: dict = {}
    if args.config is not None:
        doc = json.loads(Path(args.config).read_text())
    overrides = {
        "protocol": args.protocol,
        "n": args.n,
        "m": args.m,
        "init": args.init,
        "trials": args.trials,
        "master_seed": args.seed,
        "max_rounds": args.max_rounds,
        "epsilon": args.epsilon,
    }
    for key, value in overrides.items():
        if value is not None:
            doc[key] = value.value if isinstance(value, ProtocolVariant) else value
    if args.record_phi is not None:
        doc.setdefault("record", {})["potential_trace"] = True
    if isinstance(doc.get("init"), tuple):
        doc["init"] = list(doc["init"])
    missing = [k for k in ("protocol", "n", "m", "init", "trials", "master_seed") if k not in doc]
    if missing:
        raise ValueError(f"missing config values: {', '.join(missing)}")
    cfg = config_from_json_dict(doc)
    cfg.validate()
    return cfg


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    records, summary = run_experiment(cfg, workers=args.workers)
    if args.format == "json":
        doc = summary_json_dict(cfg, summary)
        doc["records"] = records_json_list(records)
        text = json.dumps(doc, indent=2)
        if args.out is None:
            print(text)
        else:
            Path(args.out).write_text(text + "\n")
    else:
        if args.out is None:
            write_trials_csv(records, sys.stdout)
        else:
            out = Path(args.out)
            with open(out, "w", newline="") as fp:
                write_trials_csv(records, fp)
            if cfg.record.potential_trace:
                with open(f"{out}.trace.csv", "w", newline="") as fp:
                    write_trace_csv(records, fp)
            with open(f"{out}.summary.json", "w") as fp:
                json.dump(summary_json_dict(cfg, summary), fp, indent=2)
                fp.write("\n")
    return 0


def _cmd_verify_lemmas(args: argparse.Namespace) -> int:
    # deferred import: analysis pulls no extra weight at plain-simulate time
    from . import analysis
    from .core import enumerate_assignments, is_nash

    failures = 0

    def report(name: str, ok: bool, detail: str) -> None:
        nonlocal failures
        print(f"{'ok  ' if ok else 'FAIL'} {name}: {detail}")
        if not ok:
            failures += 1

    ok = all(analysis.check_five_level_identity(n) for n in range(1, args.n_max + 1))
    report("five-level-identity", ok, f"all level splits for n <= {args.n_max}")

    worst = Fraction(0)
    ok = True
    for n in range(1, 5):
        for m in range(0, 9):
            for x in enumerate_assignments(m, n):
                slack = analysis.drift_report(x).slack
                if slack < 0:
                    ok = False
                worst = min(worst, slack)
    report("drift-slack-exhaustive", ok, f"m <= 8, n <= 4, min slack {worst}")

    rng = np.random.default_rng(args.seed)
    ok = True
    for _ in range(args.random_states):
        n = int(rng.integers(1, 26))
        x = Assignment(rng.integers(0, 101, size=n).tolist())
        if analysis.drift_report(x).slack < 0:
            ok = False
    report("drift-slack-random", ok, f"{args.random_states} random states, n <= 25")

    ok = True
    for n in range(2, 4):
        for m in range(2, 7):
            for x in enumerate_assignments(m, n):
                if is_nash(x):
                    continue
                if analysis.exact_change_probability(x) < analysis.variance_floor(n):
                    ok = False
    report("change-probability-floor", ok, "exact, all non-equilibrium m <= 6, n <= 3")

    ok = True
    for n in range(1, 4):
        for m in range(0, 7):
            for x in enumerate_assignments(m, n):
                if not analysis.sqrt_drift_bound_holds_exact(x):
                    ok = False
    report("sqrt-drift-bound", ok, "exact, all m <= 6, n <= 3")

    from .protocol import kernel

    ok = True
    for _ in range(200):
        n = int(rng.integers(1, 17))
        x = Assignment(rng.integers(0, 10**6, size=n).tolist())
        neutral = kernel(x, ProtocolVariant.NEUTRAL_ALLOWED).expected_next_loads()
        if any(v != Fraction(x.m, x.n) for v in neutral):
            ok = False
        strict = kernel(x, ProtocolVariant.NEUTRAL_DISALLOWED).expected_next_loads()
        targets = analysis.drift_report(x).d
        if any(v != Fraction(x.m, x.n) + d for v, d in zip(strict, targets)):
            ok = False
    report("expected-load-identities", ok, "exact, 200 random states, n <= 16")

    return 0 if failures == 0 else 1


def _cmd_oracle(args: argparse.Namespace) -> int:
    chain = build_chain(args.m, args.n, ProtocolVariant(args.protocol))
    text = chain_to_json(chain)
    if args.out is None:
        print(text)
    else:
        Path(args.out).write_text(text + "\n")
    return 0


def _write_rows_csv(rows: list[dict], header: Sequence[str], out: Path | None) -> None:
    fp = sys.stdout if out is None else open(out, "w", newline="")
    try:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([row[k] for k in header])
    finally:
        if out is not None:
            fp.close()


def _cmd_scaling(args: argparse.Namespace) -> int:
    rows = scaling_curve(
        ProtocolVariant(args.protocol),
        args.n,
        args.m_list,
        args.epsilon,
        args.trials,
        args.seed,
        max_rounds=args.max_rounds,
        workers=args.workers,
    )
    _write_rows_csv(rows, ("m", "mean_t_eps_nash", "std_err", "missing"), args.out)
    return 0


def _cmd_neutral_slowness(args: argparse.Namespace) -> int:
    rows = neutral_slowness_curve(
        args.n_list,
        args.trials,
        args.seed,
        max_rounds=args.max_rounds,
        workers=args.workers,
    )
    _write_rows_csv(rows, ("n", "median_t_nash", "censored"), args.out)
    return 0


def cli_main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse handles --help and usage errors
        return 0 if exc.code in (None, 0) else int(exc.code)
    try:
        return args.handler(args)
    except (LoadLimitError, EnumerationBudgetError) as exc:
        print(f"selfishlb: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"selfishlb: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))
