"""Randomized selfish load balancing: simulator, analysis, and oracle."""

from .core import (
    Assignment,
    LoadLimitError,
    PotentialValue,
    enumerate_assignments,
    is_eps_nash,
    is_nash,
    phi_bounds,
    potential,
)
from .protocol import (
    EnumerationBudgetError,
    MigrationMatrix,
    ProtocolVariant,
    RngStream,
    TransitionKernel,
    exact_step_distribution,
    kernel,
    sample_next_states,
    step,
)
from .analysis import (
    DriftReport,
    check_five_level_identity,
    check_supermartingale,
    check_variance_lemma,
    drift_report,
    exact_change_probability,
    exact_expected_next_potential,
    expected_next_potential_bound,
    variance_floor,
    variance_upper_bounds,
)
from .oracle import (
    LumpedChain,
    build_chain,
    chain_to_json,
    enumerate_sorted_states,
    expected_hitting_time,
    hitting_times,
    two_zero_ones_hitting_time,
    verify_lumpability,
)
from .experiments import (
    ExperimentConfig,
    RecordFlags,
    SummaryStats,
    TrialRecord,
    all_on_one,
    cli_main,
    neutral_slowness_curve,
    run_experiment,
    scaling_curve,
    summarize,
    tail_fraction_at_tau,
    tau_for_initial_potential,
    two_zero_ones,
)

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "DriftReport",
    "EnumerationBudgetError",
    "ExperimentConfig",
    "LoadLimitError",
    "LumpedChain",
    "MigrationMatrix",
    "PotentialValue",
    "ProtocolVariant",
    "RecordFlags",
    "RngStream",
    "SummaryStats",
    "TransitionKernel",
    "TrialRecord",
    "all_on_one",
    "build_chain",
    "chain_to_json",
    "check_five_level_identity",
    "check_supermartingale",
    "check_variance_lemma",
    "cli_main",
    "drift_report",
    "enumerate_assignments",
    "enumerate_sorted_states",
    "exact_change_probability",
    "exact_expected_next_potential",
    "exact_step_distribution",
    "expected_hitting_time",
    "expected_next_potential_bound",
    "hitting_times",
    "is_eps_nash",
    "is_nash",
    "kernel",
    "neutral_slowness_curve",
    "phi_bounds",
    "potential",
    "run_experiment",
    "sample_next_states",
    "scaling_curve",
    "step",
    "summarize",
    "tail_fraction_at_tau",
    "tau_for_initial_potential",
    "two_zero_ones",
    "two_zero_ones_hitting_time",
    "variance_floor",
    "variance_upper_bounds",
    "verify_lumpability",
]
