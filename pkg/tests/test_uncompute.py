import numpy as np
import pytest

from conftest import random_circuit, random_rewrite_case, random_state
from qsl.circuit import Circuit, PhaseOracle, ccx, cx, h, run_array, x, z
from qsl.errors import DecompositionError, RewriteError, ValidationError
from qsl.tree import DiffusionSchedule
from qsl.uncompute import (
    CNF,
    GenericOracleSchedule,
    build_V,
    decompose,
    depends,
    gate_count_stats,
    ksat_bounds,
    ksat_oracle,
    lower_oracle,
    random_cnf,
    rewrite_partial_uncompute,
    trivial_decomposition,
    wm_pattern,
    wm_schedule,
)


def test_dependence_is_transitive():
    c = Circuit(4, (cx(0, 1), h(2), cx(1, 3), x(2)))
    rep = depends(c)
    assert rep.per_gate[2] == frozenset({0, 1, 3})
    assert rep.per_gate[3] == frozenset({2})
    assert rep.per_qubit == (2, 2, 2, 1)
    assert rep.d_bar({0}) == 2 and rep.depending_on({2}) == (1, 3)


def test_dependence_is_monotone(rng):
    c = random_circuit(rng, 6, 30)
    full = depends(c)
    for cut in range(0, 30, 5):
        prefix = depends(Circuit(6, c.gates[:cut]))
        assert all(a <= b for a, b in zip(prefix.per_gate, full.per_gate))
    for s in ({0}, {0, 1}, {0, 1, 2}):
        assert full.d_bar(s) <= full.d_bar(s | {3})


def test_wm_pattern_shape():
    d = wm_pattern((2, 2))
    assert d == [frozenset({0, 1}), frozenset({2, 3}), frozenset({0, 1}), frozenset({0, 1})]
    s = wm_schedule(3, DiffusionSchedule((1, 1, 1)))
    assert s.ell == 13


def test_decompose_split_validation():
    c = Circuit(3, (ccx(0, 1, 2), z(2), ccx(0, 1, 2)))
    dec = decompose(c, (1, 1), 2)
    assert dec.D_u == 1 and dec.D_p == 1 and dec.n_ancilla == 1
    assert dec.as_phase_oracle().marked == frozenset({3})
    with pytest.raises(DecompositionError):
        decompose(c, (1, 2), 2)
    with pytest.raises(DecompositionError):
        decompose(Circuit(3, (ccx(0, 1, 2), z(2), cx(0, 2))), (1, 1), 2)


def test_lower_oracle_realizes_marked_set():
    o = PhaseOracle(4, frozenset({0, 5, 15}))
    dec = lower_oracle(o)
    assert dec.as_phase_oracle().marked == o.marked


@pytest.mark.parametrize("seed", range(10))
def test_rewrite_is_sound(seed):
    rng = np.random.default_rng(seed)
    sched, dec = random_rewrite_case(rng)
    v = build_V(sched, dec)
    vt = rewrite_partial_uncompute(sched, dec)
    psi = random_state(rng, dec.n_qubits, batch=3)
    a, b = run_array(v, psi, dec.n_qubits), run_array(vt, psi, dec.n_qubits)
    assert np.allclose(np.abs(np.sum(a.conj() * b, axis=0)), 1, atol=1e-9)
    stats = gate_count_stats(sched, dec, vt)
    assert stats["measured_total"] == 2 * dec.D_u + sched.ell * dec.D_p + 2 * sum(stats["d_bar"])


def test_rewrite_saves_gates_on_benchmark_oracle():
    dec = lower_oracle(PhaseOracle(4, frozenset({5})))
    stats = gate_count_stats(wm_schedule(2, DiffusionSchedule((2, 2))), dec)
    assert stats["measured_total"] == stats["total"] == 50
    assert stats["naive_total"] == 60
    assert stats["per_query_avg"] <= stats["weighted_bound"] + 1e-12


def test_rewrite_rejects_mixer_outside_its_set():
    dec = trivial_decomposition(PhaseOracle(3, frozenset({1})))
    bad = GenericOracleSchedule((frozenset({0}),), (Circuit(3, (h(1),)),))
    with pytest.raises(RewriteError):
        rewrite_partial_uncompute(bad, dec)


def test_rewrite_rejects_ancilla_sets():
    dec = lower_oracle(PhaseOracle(3, frozenset({1})))
    bad = GenericOracleSchedule((frozenset({3}),), (Circuit(dec.n_qubits, (h(3),)),))
    with pytest.raises(RewriteError):
        rewrite_partial_uncompute(bad, dec)


def test_cnf_semantics_and_dimacs():
    cnf = CNF.from_dimacs("c demo\np cnf 3 2\n1 -2 0\n2 3 0\n")
    assert cnf.n_vars == 3 and cnf.clauses == ((1, -2), (2, 3))
    # x1 x2 x3 = 1 1 0 satisfies both clauses
    assert cnf.satisfied(0b110)
    assert not cnf.satisfied(0b010)
    with pytest.raises(ValidationError):
        CNF(2, ((3,),))


def test_ksat_oracle_matches_truth_table(rng):
    for _ in range(10):
        cnf = random_cnf(5, 4, 3, rng)
        dec = ksat_oracle(cnf)
        want = {a for a in range(32) if cnf.satisfied(a)}
        assert set(dec.as_phase_oracle().marked) == want
        b = ksat_bounds(cnf)
        assert dec.D_u <= b["D_u_bound"]
        assert all(d <= bound for d, bound in zip(dec.dependency().per_qubit, b["per_variable_bound"]))


def test_literal_bank_x_gates():
    # bank 1 holds negated literals on qubits n .. n+L-1: a positive literal needs an X
    def bank1_x(cnf):
        lits = sum(len(c) for c in cnf.clauses)
        bank = range(cnf.n_vars, cnf.n_vars + lits)
        return sum(g.kind == "X" and g.qubits[0] in bank for g in ksat_oracle(cnf).compute)

    assert bank1_x(CNF(3, ((-1, -2), (-3,)))) == 0
    assert bank1_x(CNF(3, ((1, 2), (3,)))) == 3
    assert bank1_x(CNF(3, ((1, -2), (3,)))) == 2
