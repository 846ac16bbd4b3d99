import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from selfishlb.analysis import (
    check_five_level_identity,
    check_supermartingale,
    check_variance_lemma,
    drift_report,
    exact_change_probability,
    exact_expected_next_potential,
    expected_next_potential_bound,
    sqrt_drift_bound_holds_exact,
    variance_floor,
    variance_upper_bounds,
)
from selfishlb.core import Assignment, enumerate_assignments, is_nash, potential
from selfishlb.protocol import ProtocolVariant, RngStream, kernel

STRICT = ProtocolVariant.NEUTRAL_DISALLOWED


def test_drift_report_two_zero():
    r = drift_report(Assignment([2, 0]))
    assert (r.u1, r.u2) == (4, 0)
    assert r.u == 2
    assert r.phi == 2
    assert r.slack == 0  # the bound is tight here


def test_drift_report_two_one_zero():
    r = drift_report(Assignment([2, 1, 0]))
    assert (r.u1, r.u2) == (4, 2)
    assert r.u == Fraction(14, 9)
    assert r.phi == 2
    assert r.slack == Fraction(4, 9)
    assert r.d == (Fraction(1, 3), Fraction(0), Fraction(-1, 3))


def test_drift_report_equilibrium():
    r = drift_report(Assignment([3, 2, 3]))
    assert r.u1 == 0  # no pair differs by more than one
    assert r.slack == r.phi - Fraction(r.u2, 9)


def test_variance_upper_bounds_examples():
    assert variance_upper_bounds(Assignment([2, 0])) == (Fraction(1), Fraction(1))
    assert variance_upper_bounds(Assignment([1, 1, 1])) == (Fraction(0),) * 3
    assert variance_upper_bounds(Assignment([2, 1, 0])) == (
        Fraction(2, 3),
        Fraction(0),
        Fraction(2, 3),
    )


def test_expected_next_potential_bound_examples():
    assert expected_next_potential_bound(Assignment([3, 3])) == 2.0
    # potential 100 with n = 4: bound 4 + 2*2*10 = 44
    x = Assignment([10, 10, 0, 0])  # mean 5, deviations (5,5,5,5) -> phi = 100
    assert expected_next_potential_bound(x) == 44.0
    assert expected_next_potential_bound(Assignment([7])) == 1.0


def test_exact_expected_next_potential_examples():
    assert exact_expected_next_potential(Assignment([2, 0])) == 1
    assert exact_expected_next_potential(Assignment([3, 0])) == Fraction(3, 2)
    # both are below their drift bounds
    assert drift_report(Assignment([2, 0])).u == 2
    assert drift_report(Assignment([3, 0])).u == 3


def test_exact_change_probability_examples():
    assert exact_change_probability(Assignment([2, 0])) == Fraction(1, 2)
    assert exact_change_probability(Assignment([3, 0])) == Fraction(3, 4)
    # (2,0,1,...,1) at n=8: only the two doubled tasks can move, each with
    # probability 1/8; both moving just swaps two resources and leaves the
    # potential unchanged, so only the exactly-one-moves event counts
    x = Assignment([2, 0] + [1] * 6)
    assert exact_change_probability(x) == 2 * Fraction(1, 8) * Fraction(7, 8)
    assert exact_change_probability(x) >= variance_floor(8)


def test_check_supermartingale_monte_carlo():
    mean, std_err, bound = check_supermartingale(Assignment([2, 0]), 20_000, RngStream(11))
    assert bound == 2
    assert mean == pytest.approx(1.0, abs=0.05)
    assert mean <= float(bound) + 3 * std_err


def test_check_supermartingale_fixed_point():
    x = Assignment([2, 1, 1])
    mean, std_err, _ = check_supermartingale(x, 1000, RngStream(12))
    assert std_err < 1e-15  # the state never moves
    assert mean == pytest.approx(float(potential(x).exact), rel=1e-12)


def test_check_supermartingale_validates_trials():
    with pytest.raises(ValueError):
        check_supermartingale(Assignment([2, 0]), 10, RngStream(1))


def test_check_variance_lemma():
    p_change, floor = check_variance_lemma(Assignment([2, 0]), 20_000, RngStream(13))
    assert floor == Fraction(1, 10)
    assert p_change == pytest.approx(0.5, abs=0.02)
    assert p_change >= float(floor)


def test_check_variance_lemma_rejects_equilibrium():
    with pytest.raises(ValueError):
        check_variance_lemma(Assignment([1, 1]), 20_000, RngStream(1))


def test_variance_floor_value():
    assert variance_floor(2) == Fraction(1, 10)
    assert variance_floor(8) == Fraction(2, 320)


def test_five_level_identity_small_n():
    assert all(check_five_level_identity(n) for n in range(1, 7))


def test_five_level_identity_hand_cases():
    # (2, 0): five-level split (1,0,1,0,0); both sides vanish
    r = drift_report(Assignment([2, 0]))
    assert 2 * potential(Assignment([2, 0])).n_phi - (2 * r.u1 + r.u2) == 0
    # (2, 1, 0): split (1,1,1,0,0); n^2(phi-u) = 4*n0*n1*n2 = 4
    r = drift_report(Assignment([2, 1, 0]))
    assert 3 * potential(Assignment([2, 1, 0])).n_phi - (3 * r.u1 + r.u2) == 4


def test_slack_nonnegative_exhaustive_small():
    for n in range(1, 4):
        for m in range(0, 7):
            for x in enumerate_assignments(m, n):
                assert drift_report(x).slack >= 0


@given(st.lists(st.integers(min_value=0, max_value=100), min_size=1, max_size=10))
@settings(max_examples=300)
def test_slack_nonnegative_property(loads):
    assert drift_report(Assignment(loads)).slack >= 0


def test_sqrt_drift_bound_exact_small():
    for n in range(1, 4):
        for m in range(0, 6):
            for x in enumerate_assignments(m, n):
                assert sqrt_drift_bound_holds_exact(x)


def test_strict_expected_loads_match_drift():
    # kernel-based expectation equals mean load plus the per-resource drift
    import numpy as np

    rng = np.random.default_rng(17)
    for _ in range(100):
        n = int(rng.integers(1, 13))
        x = Assignment(rng.integers(0, 200, size=n).tolist())
        expect = kernel(x, STRICT).expected_next_loads()
        report = drift_report(x)
        mean = Fraction(x.m, x.n)
        assert all(e == mean + d for e, d in zip(expect, report.d))
