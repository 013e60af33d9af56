import math

import numpy as np
import pytest

from qsl.circuit import PhaseOracle, oracle_gate, run_array
from qsl.errors import DegenerateError, ValidationError
from qsl.tree import (
    DiffusionSchedule,
    amplification_circuit,
    amplification_plan,
    analytic_bounds,
    beta_recurrence,
    build_D,
    oracle_call_count,
    query_budget,
    schedule_from_epsilon,
    search_distribution,
    simulated_beta,
    single_point,
    verify_symmetry,
)

SCHEDULES = [(2, 2), (2, 4), (3, 3), (4, 3), (2, 2, 2), (1, 2, 3)]


def test_schedule_blocks_are_one_based_contiguous():
    s = DiffusionSchedule((2, 3, 1))
    assert s.n == 6 and s.m == 3
    assert s.block(1) == (0, 1) and s.block(2) == (2, 3, 4) and s.block(3) == (5,)
    with pytest.raises(ValidationError):
        s.block(0)
    assert DiffusionSchedule.parse("4,3").k == (4, 3)


def test_known_amplitudes():
    assert beta_recurrence(DiffusionSchedule((2, 2))).beta[2] == pytest.approx(0.875, abs=1e-15)
    assert beta_recurrence(DiffusionSchedule((4, 3))).beta[1] == pytest.approx(0.6875, abs=1e-15)


@pytest.mark.parametrize("k", SCHEDULES)
def test_recurrence_matches_simulation_for_every_target(k, rng):
    s = DiffusionSchedule(k)
    trace = beta_recurrence(s)
    for target in rng.choice(1 << s.n, size=5, replace=False):
        for j in range(s.m + 1):
            assert simulated_beta(s, j, int(target)) == pytest.approx(trace.beta[j], abs=1e-12)


@pytest.mark.parametrize("k", SCHEDULES)
def test_tree_symmetry(k):
    s = DiffusionSchedule(k)
    for target in (0, (1 << s.n) - 1):
        o = PhaseOracle(s.n, frozenset({target}))
        for j in range(s.m + 1):
            assert verify_symmetry(s, j, o)


def test_tree_oracle_calls_and_width():
    s = DiffusionSchedule((2, 2, 2))
    d = build_D(3, s, PhaseOracle(6, frozenset({1})))
    assert d.oracle_calls == 2 ** 3 - 1
    assert d.n_qubits == 6


def test_amplification_matches_closed_form():
    s = DiffusionSchedule((3, 3))
    marked = 0b101100
    plan = amplification_plan(beta_recurrence(s))
    circ = amplification_circuit(s, oracle_gate(range(6), {marked}), plan.iterations)
    psi = np.zeros(64, dtype=complex)
    psi[0] = 1
    p = abs(run_array(circ, psi, 6)[marked]) ** 2
    assert p == pytest.approx(math.sin((2 * plan.iterations + 1) * plan.theta) ** 2, abs=1e-12)
    assert circ.oracle_calls == oracle_call_count(s.m, plan.iterations)


def test_single_point_finds_the_element():
    res = single_point(PhaseOracle.from_bitstrings(["01001101"]), DiffusionSchedule((8,)))
    assert res.element == "01001101"
    assert res.plan.iterations == 4
    assert res.oracle_calls == 13
    assert res.success_prob > 0.98


def test_single_point_rejects_multiple_marks():
    with pytest.raises(ValidationError):
        single_point(PhaseOracle(4, frozenset({1, 2})), DiffusionSchedule((4,)))


def test_search_distribution_is_normalized():
    probs, calls, other = search_distribution(DiffusionSchedule((2, 2)), frozenset({3, 9}))
    assert probs.sum() == pytest.approx(1)
    assert calls > 0 and other > 0


@pytest.mark.parametrize("eps,n,want", [(0.5, 6, (2, 4)), (0.5, 12, (2, 4, 6)),
                                         (0.25, 9, (3, 6)), (0.5, 2, (2,))])
def test_schedule_from_epsilon(eps, n, want):
    assert schedule_from_epsilon(eps, n).k == want


@pytest.mark.parametrize("xv", [1, 2, 3])
@pytest.mark.parametrize("m", [1, 2, 3])
def test_lower_bound_chain(xv, m):
    s = DiffusionSchedule(tuple((xv + 1) * j for j in range(1, m + 1)))
    b = analytic_bounds(s)
    assert b["beta_m"] >= b["beta_lower"] - 1e-15
    assert b["delta_m"] >= (2 - 2.0 ** -m) * b["product_m"] - 1e-15
    assert all(g >= d - 1e-12 for g, d in zip(b["gamma"], b["delta"]))
    assert b["pentagonal"] <= b["product_m"] + 1e-15


def test_plan_examples():
    plan = amplification_plan(beta_recurrence(DiffusionSchedule((2, 2))))
    assert plan.iterations == 0 and plan.predicted_success == pytest.approx(0.765625, abs=1e-15)
    plan = amplification_plan(beta_recurrence(DiffusionSchedule((8,))))
    assert plan.iterations == 4 and plan.predicted_success == pytest.approx(0.9862, abs=5e-5)
    assert analytic_bounds(DiffusionSchedule((2, 4)))["beta_lower"] == pytest.approx(0.21875)


def test_analytic_bounds_rejects_other_shapes():
    with pytest.raises(ValidationError):
        analytic_bounds(DiffusionSchedule((2, 3)))


def test_query_budget_beats_grover_for_large_blocks():
    budget = query_budget(DiffusionSchedule((2, 4, 6)))
    assert budget["oracle_calls"] < 2 * budget["grover_reference"]


def test_degenerate_plan():
    from qsl.tree import BetaTrace
    with pytest.raises(DegenerateError):
        amplification_plan(BetaTrace((1.0, 0.0), DiffusionSchedule((1,))))
