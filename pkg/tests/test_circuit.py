import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_circuit, random_gate, random_state
from qsl.circuit import (
    MAX_QUBITS,
    Circuit,
    Gate,
    PhaseOracle,
    StateVector,
    basis_state,
    ccx,
    classical_eval,
    cx,
    diffusor,
    from_bits,
    gate_counts,
    h,
    lower_mcz,
    mcz,
    measure_distribution,
    oracle_gate,
    phase_oracle_apply,
    run_array,
    simulate,
    swap,
    to_bits,
    u3,
    uniform_state,
    unitary,
    x,
)
from qsl.errors import CapacityError, ValidationError


def test_bit_order_is_big_endian():
    assert to_bits(5, 4) == "0101"
    assert from_bits("0101") == 5
    psi = run_array((x(0),), basis_state(3, 0).amplitudes, 3)
    assert abs(psi[0b100]) == pytest.approx(1)


@pytest.mark.parametrize("kind", ["X", "Z", "H", "T", "Tdag", "U3", "CX", "CZ", "SWAP", "CCX", "CCZ"])
def test_norm_preserved_over_random_states(kind, rng):
    n = 4
    psi = random_state(rng, n, batch=200)
    for _ in range(5):
        out = run_array((random_gate(rng, n, [kind]),), psi, n)
        assert np.allclose(np.linalg.norm(out, axis=0), 1, atol=1e-12)


def test_gate_matrices_are_unitary(rng):
    for _ in range(30):
        g = random_gate(rng, 5)
        m = g.matrix()
        assert np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=1e-12)
        assert g.is_inverse_of(g.inverse())


def test_inverse_circuit_undoes_it(rng):
    c = random_circuit(rng, 5, 40)
    psi = random_state(rng, 5)
    back = run_array(c.inverse(), run_array(c, psi, 5), 5)
    assert np.allclose(back, psi, atol=1e-12)


def test_batched_run_matches_unitary(rng):
    c = random_circuit(rng, 4, 25)
    u = unitary(c)
    assert np.allclose(run_array(c, np.eye(16, dtype=complex), 4), u)


@pytest.mark.parametrize("q", [0, 1, 2])
def test_swap_and_cx_semantics(q):
    n = 3
    other = (q + 1) % n
    psi = basis_state(n, 1 << (n - 1 - q)).amplitudes
    out = run_array((cx(q, other),), psi, n)
    want = (1 << (n - 1 - q)) | (1 << (n - 1 - other))
    assert abs(out[want]) == pytest.approx(1)
    out = run_array((swap(q, other),), psi, n)
    assert abs(out[1 << (n - 1 - other)]) == pytest.approx(1)


def test_oracle_is_an_involution_and_flips_marked(rng):
    n = 5
    marked = {3, 17, 30}
    o = oracle_gate(range(n), marked)
    psi = random_state(rng, n)
    out = run_array((o,), psi, n)
    sign = np.array([-1 if i in marked else 1 for i in range(1 << n)])
    assert np.allclose(out, sign * psi)
    assert np.allclose(run_array((o, o), psi, n), psi)
    po = PhaseOracle(n, frozenset(marked))
    assert np.allclose(phase_oracle_apply(StateVector(n, psi), po).amplitudes, out)


def test_oracle_on_operand_subset():
    # marked pattern refers to the operand order, not the register order
    g = oracle_gate((2, 0), {0b10})
    amp = run_array((g,), np.eye(8, dtype=complex), 3)
    # qubit 2 = 1, qubit 0 = 0 -> indices 001 and 011
    assert np.allclose(np.diag(amp), [1, -1, 1, -1, 1, 1, 1, 1])


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
def test_diffusor_is_exact_reflection(k):
    u = unitary(lower_mcz(diffusor(k)))
    uni = np.full((1 << k, 1 << k), 1 / (1 << k))
    assert np.allclose(u, 2 * uni - np.eye(1 << k), atol=1e-12)


def test_diffusor_fixes_uniform_and_is_involution():
    for k in (2, 3, 4):
        u = unitary(lower_mcz(diffusor(k)))
        s = uniform_state(k).amplitudes
        assert np.allclose(u @ s, s)
        assert np.allclose(u @ u, np.eye(1 << k))


@pytest.mark.parametrize("k", [4, 5, 6])
def test_mcz_lowering(k):
    assert np.allclose(unitary(lower_mcz(Circuit(k, (mcz(*range(k)),)))),
                       unitary(Circuit(k, (mcz(*range(k)),))), atol=1e-12)


def test_classical_eval_tracks_phase():
    c = Circuit(3, (x(0), ccx(0, 1, 2), oracle_gate((0, 1), {0b10})))
    out, ph = classical_eval(c, 0b000)
    assert out == 0b100 and ph == -1
    with pytest.raises(ValidationError):
        classical_eval(Circuit(1, (h(0),)), 0)


def test_phase_oracle_realization_check():
    c = Circuit(3, (ccx(0, 1, 2), Gate("Z", (2,)), ccx(0, 1, 2)))
    assert PhaseOracle(2, frozenset({3}), c).check_realization()
    assert not PhaseOracle(2, frozenset({2}), c).check_realization()


def test_measure_distribution_sums_to_one(rng):
    st_ = simulate(random_circuit(rng, 4, 20), basis_state(4, "0000"))
    p = measure_distribution(st_)
    assert p.sum() == pytest.approx(1)


def test_json_round_trip(rng):
    c = random_circuit(rng, 4, 15) + Circuit(4, (oracle_gate((1, 2), {1}),))
    again = Circuit.from_json(c.to_json())
    assert again == c
    assert json.loads(c.to_json())["n_qubits"] == 4


def test_gate_counts():
    c = Circuit(3, (cx(0, 1), swap(1, 2), h(0), ccx(0, 1, 2)))
    counts = gate_counts(c)
    assert counts["two_qubit"] == 2 and counts["cx_equivalent"] == 4
    assert counts["per_kind"]["CCX"] == 1


def test_validation_errors():
    with pytest.raises(ValidationError):
        Gate("CX", (0, 0))
    with pytest.raises(ValidationError):
        Gate("U3", (0,), (1.0,))
    with pytest.raises(ValidationError):
        Circuit(2, (cx(0, 2),))
    with pytest.raises(CapacityError):
        basis_state(MAX_QUBITS + 1, 0)
    with pytest.raises(ValidationError):
        PhaseOracle(2, frozenset({4}))


@settings(max_examples=40, deadline=None)
@given(theta=st.floats(-math.pi, math.pi), phi=st.floats(-math.pi, math.pi),
       lam=st.floats(-math.pi, math.pi))
def test_u3_inverse(theta, phi, lam):
    g = u3(0, theta, phi, lam)
    assert np.allclose(g.matrix() @ g.inverse().matrix(), np.eye(2), atol=1e-12)
