"""Quantum search circuits with exact simulation and noisy benchmarking."""

from qsl.circuit import (
    Circuit,
    Gate,
    PhaseOracle,
    StateVector,
    apply_gate,
    basis_state,
    diffusor,
    gate_counts,
    measure_distribution,
    phase_oracle_apply,
    simulate,
    uniform_state,
)

__all__ = [
    "Circuit",
    "Gate",
    "PhaseOracle",
    "StateVector",
    "apply_gate",
    "basis_state",
    "diffusor",
    "gate_counts",
    "measure_distribution",
    "phase_oracle_apply",
    "simulate",
    "uniform_state",
]

__version__ = "0.1.0"
