"""Recursive tree-search circuits ``D_j`` and the amplified search built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from qsl.circuit import (
    Circuit,
    Gate,
    PhaseOracle,
    diffusor,
    h,
    mcz,
    oracle_gate,
    run_array,
    to_bits,
    x,
    z,
)
from qsl.errors import DegenerateError, ValidationError


@dataclass(frozen=True)
class DiffusionSchedule:
    """Block sizes ``k_1..k_m``; block j covers qubits ``k_1+..+k_{j-1}`` onward."""

    k: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(int(v) for v in self.k))
        if not self.k or any(v < 1 for v in self.k):
            raise ValidationError(f"schedule needs positive block sizes, got {self.k}")

    @classmethod
    def parse(cls, text: str) -> "DiffusionSchedule":
        return cls(tuple(int(v) for v in text.split(",") if v.strip()))

    @property
    def n(self) -> int:
        return sum(self.k)

    @property
    def m(self) -> int:
        return len(self.k)

    def block(self, j: int) -> tuple[int, ...]:
        """Qubits of block ``j`` (1-based)."""
        if not 1 <= j <= self.m:
            raise ValidationError(f"block {j} outside 1..{self.m}")
        start = sum(self.k[: j - 1])
        return tuple(range(start, start + self.k[j - 1]))


@dataclass(frozen=True)
class BetaTrace:
    beta: tuple[float, ...]
    schedule: DiffusionSchedule

    def to_dict(self) -> dict:
        return {"schedule": list(self.schedule.k), "beta": list(self.beta)}


@dataclass(frozen=True)
class AmplificationPlan:
    iterations: int
    theta: float
    predicted_success: float


@dataclass(frozen=True)
class SinglePointResult:
    element: str
    index: int
    success_prob: float
    oracle_calls: int
    plan: AmplificationPlan


def _oracle_gate(oracle: PhaseOracle | Gate, n: int) -> Gate:
    if isinstance(oracle, Gate):
        return oracle
    if oracle.n_qubits != n:
        raise ValidationError(f"oracle acts on {oracle.n_qubits} qubits, schedule on {n}")
    return oracle.gate()


def build_D(j: int, schedule: DiffusionSchedule, oracle: PhaseOracle | Gate) -> Circuit:
    """``D_0 = I``; ``D_{j+1} = D_j (G on block j+1) O D_j`` as an operator product.

    Chronologically that is: ``D_j``, oracle, block diffusor, ``D_j``.
    """
    if not 0 <= j <= schedule.m:
        raise ValidationError(f"level {j} outside 0..{schedule.m}")
    n = schedule.n
    o = _oracle_gate(oracle, n)
    gates: tuple[Gate, ...] = ()
    for level in range(1, j + 1):
        qs = schedule.block(level)
        g = diffusor(len(qs), qs, n).gates
        gates = gates + (o,) + g + gates
    return Circuit(n, gates)


def beta_recurrence(schedule: DiffusionSchedule) -> BetaTrace:
    beta = [1.0]
    s = 0
    for kj in schedule.k:
        s += kj
        beta.append(2.0 ** (-s / 2) * (1 - 2.0 / 2 ** kj)
                    + 2.0 ** (-kj / 2) * (2 - 2.0 / 2 ** kj) * beta[-1])
    return BetaTrace(tuple(beta), schedule)


def _tree_source(schedule: DiffusionSchedule, j: int, target: int) -> np.ndarray:
    """``|u>`` on the first j blocks tensored with the target bits on the rest."""
    n = schedule.n
    s = sum(schedule.k[:j])
    tail = target & ((1 << (n - s)) - 1)
    psi = np.zeros(1 << n, dtype=complex)
    psi[(np.arange(1 << s) << (n - s)) | tail] = 2.0 ** (-s / 2)
    return psi


def simulated_beta(schedule: DiffusionSchedule, j: int, target: int) -> float:
    """``<t| D_j (|u> on blocks 1..j, |t> on the rest)`` by exact simulation."""
    n = schedule.n
    oracle = oracle_gate(range(n), {target})
    out = run_array(build_D(j, schedule, oracle), _tree_source(schedule, j, target), n)
    amp = out[target]
    if abs(amp.imag) > 1e-9:
        raise ValidationError(f"amplitude {amp} is not real")
    return float(amp.real)


def verify_symmetry(schedule: DiffusionSchedule, j: int, oracle: PhaseOracle,
                    tol: float = 1e-9) -> bool:
    """Check ``D_j O D_j = O`` on every basis state."""
    n = schedule.n
    if n > 10:
        raise ValidationError("exhaustive symmetry check limited to 10 qubits")
    d = build_D(j, schedule, oracle)
    o = _oracle_gate(oracle, n)
    lhs = run_array(d.gates + (o,) + d.gates, np.eye(1 << n, dtype=complex), n)
    rhs = run_array((o,), np.eye(1 << n, dtype=complex), n)
    return bool(np.max(np.abs(lhs - rhs)) < tol)


def amplification_plan(trace: BetaTrace) -> AmplificationPlan:
    b = trace.beta[-1]
    if b <= 0:
        raise DegenerateError("final amplitude is zero; nothing to amplify")
    theta = math.asin(min(b, 1.0))
    r = math.floor(math.pi / (4 * theta))
    return AmplificationPlan(r, theta, math.sin((2 * r + 1) * theta) ** 2)


def _minus_identity(q: int) -> tuple[Gate, ...]:
    # (ZX)^2 = -I
    return (z(q), x(q), z(q), x(q))


def _zero_reflection(n: int) -> tuple[Gate, ...]:
    """``2|0><0| - I`` on ``n`` qubits."""
    flips = tuple(x(q) for q in range(n))
    core = (mcz(*range(n)),) if n > 1 else (z(0),)
    return flips + core + flips + _minus_identity(0)


def amplification_circuit(schedule: DiffusionSchedule, oracle: PhaseOracle | Gate,
                          iterations: int) -> Circuit:
    """Hadamards, ``D_m``, then ``iterations`` rounds of ``-A S_0 A^dag S_f``."""
    n = schedule.n
    o = _oracle_gate(oracle, n)
    a = tuple(h(q) for q in range(n)) + build_D(schedule.m, schedule, o).gates
    a_inv = Circuit(n, a).inverse().gates
    step = (o,) + a_inv + _zero_reflection(n) + a
    return Circuit(n, a + step * iterations)


def oracle_call_count(m: int, r: int) -> int:
    return (2 * r + 1) * (2 ** m - 1) + r


@lru_cache(maxsize=256)
def _search_distribution(k: tuple[int, ...], marked: frozenset[int]) -> tuple[np.ndarray, int, int]:
    schedule = DiffusionSchedule(k)
    n = schedule.n
    plan = amplification_plan(beta_recurrence(schedule))
    circ = amplification_circuit(schedule, oracle_gate(range(n), marked), plan.iterations)
    psi = np.zeros(1 << n, dtype=complex)
    psi[0] = 1
    probs = np.abs(run_array(circ, psi, n)) ** 2
    probs.setflags(write=False)
    return probs, circ.oracle_calls, len(circ) - circ.oracle_calls


def search_distribution(schedule: DiffusionSchedule, marked: frozenset[int]
                        ) -> tuple[np.ndarray, int, int]:
    """Output distribution of the amplified tree search for any marked set.

    The iteration count is planned as if exactly one element were marked.
    Returns ``(probabilities, oracle_calls, other_gates)``.
    """
    return _search_distribution(schedule.k, frozenset(marked))


def single_point(oracle: PhaseOracle, schedule: DiffusionSchedule) -> SinglePointResult:
    if len(oracle.marked) != 1:
        raise ValidationError(f"single-point search needs exactly one marked element, "
                              f"got {len(oracle.marked)}")
    if oracle.n_qubits != schedule.n:
        raise ValidationError("oracle and schedule sizes differ")
    plan = amplification_plan(beta_recurrence(schedule))
    probs, calls, _ = search_distribution(schedule, oracle.marked)
    best = int(np.argmax(probs))
    return SinglePointResult(to_bits(best, schedule.n), best, float(probs[best]), calls, plan)


def schedule_from_epsilon(epsilon: float, n: int) -> DiffusionSchedule:
    """Blocks ``k_j = (x+1) j`` with ``x = max(1, ceil(log2(1/eps)))``.

    Blocks are taken while they fit; the last block absorbs any remainder.
    """
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    xv = max(1, math.ceil(math.log2(1 / epsilon)))
    if n < xv + 1:
        raise ValidationError(f"n={n} is too small for block size {xv + 1}")
    blocks: list[int] = []
    j = 1
    while sum(blocks) + (xv + 1) * j <= n:
        blocks.append((xv + 1) * j)
        j += 1
    blocks[-1] += n - sum(blocks)
    return DiffusionSchedule(tuple(blocks))


def analytic_bounds(schedule: DiffusionSchedule) -> dict:
    """Lower-bound chain for schedules of the exact form ``k_j = (x+1) j``."""
    k1 = schedule.k[0]
    xv = k1 - 1
    if xv < 1 or any(kj != k1 * j for j, kj in enumerate(schedule.k, 1)):
        raise ValidationError(f"schedule {schedule.k} is not of the form (x+1)*j with x >= 1")
    m, n = schedule.m, schedule.n
    q = 2.0 ** -xv
    delta = [1.0]
    for j in range(1, m + 1):
        delta.append((1 - 2.0 ** (-xv * j)) * (2.0 ** -j + delta[-1]))
    beta = beta_recurrence(schedule).beta
    gamma = [b * 2.0 ** (k1 * j * (j + 1) / 4) * 2.0 ** -j for j, b in enumerate(beta)]
    pentagonal = 1 - q - q * q
    return {
        "x": xv,
        "q": q,
        "delta": delta,
        "delta_m": delta[-1],
        "gamma": gamma,
        "product_m": float(np.prod([1 - q ** i for i in range(1, m + 1)])),
        "pentagonal": pentagonal,
        "beta_lower": (2 - 2.0 ** -m) * pentagonal * 2.0 ** m * 2.0 ** (-n / 2),
        "beta_m": beta[-1],
    }


def query_budget(schedule: DiffusionSchedule) -> dict:
    """Oracle calls of the amplified search versus the asymptotic budget."""
    plan = amplification_plan(beta_recurrence(schedule))
    calls = oracle_call_count(schedule.m, plan.iterations)
    return {"iterations": plan.iterations, "oracle_calls": calls,
            "grover_reference": math.pi / 4 * 2 ** (schedule.n / 2)}


def parse_marked(bits: str | Sequence[str]) -> PhaseOracle:
    items = [bits] if isinstance(bits, str) else list(bits)
    return PhaseOracle.from_bitstrings(items)
