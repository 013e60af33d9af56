import numpy as np
import pytest

from qsl.circuit import Circuit, Gate, ccx, ccz, cx, cz, h, swap, t, tdag, u3, x, z

ONE_QUBIT = ("X", "Z", "H", "T", "Tdag", "U3")
TWO_QUBIT = ("CX", "CZ", "SWAP")
THREE_QUBIT = ("CCX", "CCZ")

# acceptance results gathered during the run, printed in the terminal summary
ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_gate(rng, n, kinds=None, qubits=None):
    pool = list(qubits if qubits is not None else range(n))
    kinds = kinds or [k for k in ONE_QUBIT + TWO_QUBIT + THREE_QUBIT
                      if {"CX": 2, "CZ": 2, "SWAP": 2, "CCX": 3, "CCZ": 3}.get(k, 1) <= len(pool)]
    kind = kinds[int(rng.integers(len(kinds)))]
    arity = {"CX": 2, "CZ": 2, "SWAP": 2, "CCX": 3, "CCZ": 3}.get(kind, 1)
    qs = [int(q) for q in rng.choice(pool, size=arity, replace=False)]
    angles = tuple(float(a) for a in rng.uniform(-np.pi, np.pi, 3)) if kind == "U3" else ()
    return Gate(kind, tuple(qs), angles)


def random_circuit(rng, n, length, kinds=None, qubits=None):
    return Circuit(n, tuple(random_gate(rng, n, kinds, qubits) for _ in range(length)))


def random_state(rng, n, batch=None):
    shape = (1 << n,) if batch is None else (1 << n, batch)
    psi = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    return psi / np.linalg.norm(psi, axis=0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])


def random_rewrite_case(rng, max_qubits=10):
    """Random decomposition (non-classical compute, diagonal phase) and mixer schedule."""
    from qsl.uncompute import GenericOracleSchedule, UncomputableDecomposition

    n_data = int(rng.integers(2, 6))
    n_anc = int(rng.integers(1, max_qubits - n_data + 1))
    n = n_data + n_anc
    compute = random_circuit(rng, n, int(rng.integers(3, 12)))
    phase = random_circuit(rng, n, int(rng.integers(1, 4)), kinds=["Z", "T", "Tdag", "CZ", "CCZ"])
    sets, mixers = [], []
    for _ in range(int(rng.integers(1, 6))):
        size = int(rng.integers(1, n_data + 1))
        s = sorted(int(q) for q in rng.choice(n_data, size=size, replace=False))
        kinds = ["X", "H", "T", "U3"] + (["CX", "CZ"] if size > 1 else [])
        sets.append(frozenset(s))
        mixers.append(random_circuit(rng, n, int(rng.integers(1, 5)), kinds=kinds, qubits=s))
    dec = UncomputableDecomposition(compute, phase, n_data, n_anc)
    return GenericOracleSchedule(tuple(sets), tuple(mixers)), dec
