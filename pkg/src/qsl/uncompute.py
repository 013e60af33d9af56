"""Dependency analysis and the partial-uncompute rewrite of oracle-heavy circuits.

An oracle with an uncomputable decomposition ``O = O_u^dag O_p O_u`` is a
phase flip ``O_p`` wrapped by an ancilla computation and its inverse.
Between two oracle calls separated by a mixer acting on data qubits ``s``
only the compute gates that depend on ``s`` must be undone and redone;
everything else stays computed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from qsl.circuit import (
    Circuit,
    Gate,
    PhaseOracle,
    ccx,
    classical_eval,
    cx,
    diffusor,
    run_array,
    x,
    z,
)
from qsl.errors import DecompositionError, RewriteError, ValidationError
from qsl.tree import DiffusionSchedule

# -- dependence -------------------------------------------------------------


@dataclass(frozen=True)
class DependencyReport:
    n_qubits: int
    per_gate: tuple[frozenset[int], ...]

    @property
    def per_qubit(self) -> tuple[int, ...]:
        """``D_i``: number of gates depending on qubit i."""
        counts = [0] * self.n_qubits
        for dep in self.per_gate:
            for q in dep:
                counts[q] += 1
        return tuple(counts)

    def d_bar(self, s: Iterable[int]) -> int:
        """Number of gates depending on any qubit of ``s``."""
        s = frozenset(s)
        return sum(1 for dep in self.per_gate if dep & s)

    def depending_on(self, s: Iterable[int]) -> tuple[int, ...]:
        s = frozenset(s)
        return tuple(i for i, dep in enumerate(self.per_gate) if dep & s)


def depends(circuit: Circuit) -> DependencyReport:
    # reach[q]: union of dependence sets of earlier gates acting on q
    reach: list[frozenset[int]] = [frozenset()] * circuit.n_qubits
    per_gate = []
    for g in circuit:
        dep = frozenset(g.qubits).union(*(reach[q] for q in g.qubits))
        for q in g.qubits:
            reach[q] = reach[q] | dep
        per_gate.append(dep)
    return DependencyReport(circuit.n_qubits, tuple(per_gate))


# -- decompositions -------------------------------------------------------


@dataclass(frozen=True)
class UncomputableDecomposition:
    """``O = compute^dag . phase . compute`` on data qubits followed by ancillas."""

    compute: Circuit
    phase: Circuit
    n_data: int
    n_ancilla: int

    def __post_init__(self):
        total = self.n_data + self.n_ancilla
        if self.compute.n_qubits > total or self.phase.n_qubits > total:
            raise ValidationError("decomposition parts exceed the declared register")
        object.__setattr__(self, "compute", self.compute.widen(total))
        object.__setattr__(self, "phase", self.phase.widen(total))

    @property
    def n_qubits(self) -> int:
        return self.n_data + self.n_ancilla

    @property
    def D_u(self) -> int:
        return len(self.compute)

    @property
    def D_p(self) -> int:
        return len(self.phase)

    def oracle_circuit(self) -> Circuit:
        return self.compute + self.phase + self.compute.inverse()

    def dependency(self) -> DependencyReport:
        return depends(self.compute)

    def flip_table(self) -> dict[int, int]:
        """Phase sign for every data assignment, by bit-level evaluation.

        Requires a classical compute part; checks that ancillas return clean.
        """
        circ = self.oracle_circuit()
        a = self.n_ancilla
        table = {}
        for xv in range(1 << self.n_data):
            out, ph = classical_eval(circ, xv << a, self.n_qubits)
            if out != xv << a:
                raise DecompositionError(f"input {xv} not restored by the uncompute part")
            ph = complex(ph)
            if abs(ph.imag) > 1e-9 or abs(abs(ph.real) - 1) > 1e-9:
                raise DecompositionError(f"non-real phase {ph} on input {xv}")
            table[xv] = -1 if ph.real < 0 else 1
        return table

    def as_phase_oracle(self) -> PhaseOracle:
        marked = frozenset(k for k, v in self.flip_table().items() if v < 0)
        return PhaseOracle(self.n_data, marked, self.oracle_circuit())


def decompose(oracle_circuit: Circuit, split: tuple[int, int], n_data: int | None = None
              ) -> UncomputableDecomposition:
    """Split ``oracle_circuit`` into compute / phase / uncompute at ``split``."""
    c_len, p_len = split
    gates = oracle_circuit.gates
    if c_len < 0 or p_len < 0 or 2 * c_len + p_len != len(gates):
        raise DecompositionError(
            f"split {split} does not cover {len(gates)} gates as prefix/middle/suffix")
    prefix, middle, suffix = gates[:c_len], gates[c_len:c_len + p_len], gates[c_len + p_len:]
    for i, (g, s) in enumerate(zip(reversed(prefix), suffix)):
        if not s.is_inverse_of(g):
            raise DecompositionError(f"uncompute gate {i} ({s.kind}{s.qubits}) does not "
                                     f"invert compute gate {g.kind}{g.qubits}")
    n = oracle_circuit.n_qubits
    nd = n if n_data is None else n_data
    return UncomputableDecomposition(Circuit(n, prefix), Circuit(n, middle), nd, n - nd)


def check_decomposition(dec: UncomputableDecomposition, reference: Circuit,
                        rng: np.random.Generator | None = None, tol: float = 1e-9) -> bool:
    """Compare ``compute^dag phase compute`` against ``reference`` by simulation."""
    n = dec.n_qubits
    circ = dec.oracle_circuit()
    if n <= 10:
        basis = np.eye(1 << n, dtype=complex)
    else:
        rng = rng or np.random.default_rng(0)
        basis = rng.normal(size=(1 << n, 100)) + 1j * rng.normal(size=(1 << n, 100))
        basis /= np.linalg.norm(basis, axis=0)
    a = run_array(circ, basis, n)
    b = run_array(reference.widen(n), basis, n)
    return bool(np.max(np.abs(a - b)) < tol)


def trivial_decomposition(oracle: PhaseOracle) -> UncomputableDecomposition:
    n = oracle.n_qubits
    return UncomputableDecomposition(Circuit(n), Circuit(n, (oracle.gate(),)), n, 0)


def lower_oracle(oracle: PhaseOracle) -> UncomputableDecomposition:
    """Multi-controlled realization of a marked-set oracle with AND-tree ancillas.

    Each marked element gets its own tree of ``n-1`` CCX gates (data dressed
    with X where the element has a 0 bit), and the phase part is one Z per
    tree root.
    """
    n = oracle.n_qubits
    if n < 2:
        return trivial_decomposition(oracle)
    compute: list[Gate] = []
    roots = []
    nxt = n
    for m in sorted(oracle.marked):
        dress = [x(q) for q in range(n) if not (m >> (n - 1 - q)) & 1]
        tree, root, nxt = _and_tree(list(range(n)), nxt)
        compute += dress + tree + dress
        roots.append(root)
    total = nxt
    return UncomputableDecomposition(
        Circuit(total, tuple(compute)), Circuit(total, tuple(z(r) for r in roots)), n, total - n)


def _and_tree(leaves: list[int], next_free: int) -> tuple[list[Gate], int, int]:
    """Balanced CCX tree; pairs adjacent leaves level by level, odd leaf carried."""
    gates = []
    level = list(leaves)
    while len(level) > 1:
        nxt_level = []
        for i in range(0, len(level) - 1, 2):
            gates.append(ccx(level[i], level[i + 1], next_free))
            nxt_level.append(next_free)
            next_free += 1
        if len(level) % 2:
            nxt_level.append(level[-1])
        level = nxt_level
    return gates, level[0], next_free


# -- generic oracle circuits ---------------------------------------------


@dataclass(frozen=True)
class GenericOracleSchedule:
    """``ell`` factors ``U_j . O``; mixer ``j`` acts only on data qubits ``d[j]``.

    Factors are stored 0-based; factor 0 is applied first.
    """

    d: tuple[frozenset[int], ...]
    mixers: tuple[Circuit, ...]

    def __post_init__(self):
        object.__setattr__(self, "d", tuple(frozenset(s) for s in self.d))
        object.__setattr__(self, "mixers", tuple(self.mixers))
        if len(self.d) != len(self.mixers):
            raise ValidationError("one mixer per factor required")

    @property
    def ell(self) -> int:
        return len(self.d)

    @classmethod
    def with_diffusors(cls, d: Sequence[Iterable[int]]) -> "GenericOracleSchedule":
        sets = [frozenset(s) for s in d]
        mixers = [diffusor(len(s), sorted(s)) for s in sets]
        return cls(tuple(sets), tuple(mixers))


def wm_pattern(k: Sequence[int]) -> list[frozenset[int]]:
    """Qubit sets ``d_m(1..ell_m)`` of the recursive ``W_m`` circuit (0-based qubits)."""
    d: list[frozenset[int]] = []
    start = 0
    for kj in k:
        block = frozenset(range(start, start + kj))
        d = d + [block] + d[::-1] + d
        start += kj
    return d


def wm_schedule(m: int, k: DiffusionSchedule) -> GenericOracleSchedule:
    if m != k.m:
        raise ValidationError(f"level {m} differs from schedule length {k.m}")
    sched = GenericOracleSchedule.with_diffusors(wm_pattern(k.k))
    assert sched.ell == (3 ** m - 1) // 2
    return sched


def _oracle_gates(oracle: PhaseOracle | UncomputableDecomposition | Circuit) -> tuple[int, tuple[Gate, ...]]:
    if isinstance(oracle, UncomputableDecomposition):
        c = oracle.oracle_circuit()
        return c.n_qubits, c.gates
    if isinstance(oracle, Circuit):
        return oracle.n_qubits, oracle.gates
    if oracle.realization is not None:
        return oracle.realization.n_qubits, oracle.realization.gates
    return oracle.n_qubits, (oracle.gate(),)


def build_V(schedule: GenericOracleSchedule,
            oracle: PhaseOracle | UncomputableDecomposition | Circuit) -> Circuit:
    """Chronologically: oracle, mixer 1, oracle, mixer 2, ..."""
    n, o = _oracle_gates(oracle)
    gates: list[Gate] = []
    for mixer in schedule.mixers:
        if mixer.n_qubits > n:
            raise ValidationError("mixer wider than the oracle register")
        gates += o
        gates += mixer.gates
    return Circuit(n, tuple(gates))


def _check_mixers(schedule: GenericOracleSchedule, dec: UncomputableDecomposition) -> None:
    for j, (s, mixer) in enumerate(zip(schedule.d, schedule.mixers)):
        if any(q >= dec.n_data for q in s):
            raise RewriteError(f"factor {j}: set {sorted(s)} reaches ancilla qubits")
        touched = {q for g in mixer for q in g.qubits}
        if not touched <= s:
            raise RewriteError(f"factor {j}: mixer acts on {sorted(touched - s)} outside {sorted(s)}")


def _check_commutation(dep: DependencyReport, compute: Circuit, s: frozenset[int]) -> None:
    """Gates outside O_s must be disjoint from every earlier gate of O_s and from s."""
    seen: set[int] = set()
    for g, dg in zip(compute, dep.per_gate):
        if dg & s:
            seen.update(g.qubits)
        elif seen.intersection(g.qubits) or s.intersection(g.qubits):
            raise RewriteError(f"gate {g.kind}{g.qubits} cannot be commuted out of O_s")


def rewrite_partial_uncompute(schedule: GenericOracleSchedule,
                              decomposition: UncomputableDecomposition) -> Circuit:
    """Equivalent of ``build_V`` that recomputes only what each mixer disturbs.

    Chronologically: ``O_u``; per factor ``O_p, O_s^dag, U_j, O_s``; ``O_u^dag``,
    where ``O_s`` holds, in order, the compute gates depending on ``s = d(j)``.
    """
    dec = decomposition
    _check_mixers(schedule, dec)
    dep = dec.dependency()
    n = dec.n_qubits
    gates: list[Gate] = list(dec.compute.gates)
    for s, mixer in zip(schedule.d, schedule.mixers):
        _check_commutation(dep, dec.compute, s)
        o_s = Circuit(n, tuple(dec.compute.gates[i] for i in dep.depending_on(s)))
        gates += dec.phase.gates
        gates += o_s.inverse().gates
        gates += mixer.gates
        gates += o_s.gates
    gates += dec.compute.inverse().gates
    return Circuit(n, tuple(gates))


def gate_count_stats(schedule: GenericOracleSchedule, decomposition: UncomputableDecomposition,
                     rewritten: Circuit | None = None) -> dict:
    dec = decomposition
    dep = dec.dependency()
    ell = schedule.ell
    dbar = [dep.d_bar(s) for s in schedule.d]
    per_qubit = dep.per_qubit[: dec.n_data]
    formula_total = 2 * dec.D_u + ell * dec.D_p + 2 * sum(dbar)
    if rewritten is None:
        rewritten = rewrite_partial_uncompute(schedule, dec)
    measured = len(rewritten) - sum(len(mx) for mx in schedule.mixers)
    if measured != formula_total:
        raise RewriteError(f"rewritten circuit has {measured} oracle gates, formula {formula_total}")
    weighted = sum(sum(per_qubit[i] for i in s) for s in schedule.d)
    mean_d = sum(per_qubit) / dec.n_data if dec.n_data else 0.0
    out = {
        "D_u": dec.D_u,
        "D_p": dec.D_p,
        "ell": ell,
        "d_bar": dbar,
        "D_i": list(per_qubit),
        "total": formula_total,
        "measured_total": measured,
        "naive_total": ell * (2 * dec.D_u + dec.D_p),
    }
    if ell:
        out["per_query_avg"] = dec.D_p + 2 * dec.D_u / ell + 2 * sum(dbar) / ell
        out["weighted_bound"] = dec.D_p + 2 * (dec.D_u + weighted) / ell
        out["average_bound"] = (dec.D_p + 2 * dec.D_u / ell
                                + 2 * mean_d * sum(len(s) for s in schedule.d) / ell)
    return out


# -- k-SAT -----------------------------------------------------------------


@dataclass(frozen=True)
class CNF:
    n_vars: int
    clauses: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "clauses", tuple(tuple(int(l) for l in c) for c in self.clauses))
        for c in self.clauses:
            if not c:
                raise ValidationError("empty clause makes the instance structurally unsatisfiable")
            if any(l == 0 or abs(l) > self.n_vars for l in c):
                raise ValidationError(f"literal out of range in clause {c}")

    @property
    def width(self) -> int:
        return max((len(c) for c in self.clauses), default=0)

    def satisfied(self, assignment: int) -> bool:
        """Variable v (1-based) is bit ``n-v`` of ``assignment``, i.e. qubit v-1."""
        n = self.n_vars
        val = lambda v: (assignment >> (n - v)) & 1
        return all(any(val(abs(l)) == (l > 0) for l in c) for c in self.clauses)

    @classmethod
    def from_dimacs(cls, text: str) -> "CNF":
        n_vars, clauses, cur = None, [], []
        for line in text.splitlines():
            line = line.strip()
            if not line or line[0] in "c%":
                continue
            if line.startswith("p"):
                parts = line.split()
                if len(parts) < 4 or parts[1] != "cnf":
                    raise ValidationError(f"bad problem line {line!r}")
                n_vars = int(parts[2])
                continue
            for tok in line.split():
                lit = int(tok)
                if lit == 0:
                    clauses.append(tuple(cur))
                    cur = []
                else:
                    cur.append(lit)
        if cur:
            clauses.append(tuple(cur))
        if n_vars is None:
            n_vars = max((abs(l) for c in clauses for l in c), default=0)
        return cls(n_vars, tuple(clauses))


def ksat_oracle(cnf: CNF) -> UncomputableDecomposition:
    """Four ancilla banks: negated literals, clause AND trees, clauses, global AND tree."""
    n, c = cnf.n_vars, len(cnf.clauses)
    if n < 1 or c < 1:
        raise ValidationError("need at least one variable and one clause")
    gates: list[Gate] = []
    nxt = n
    # bank 1: one ancilla per literal holding its negation
    neg_groups = []
    for clause in cnf.clauses:
        group = []
        for lit in clause:
            gates.append(cx(abs(lit) - 1, nxt))
            if lit > 0:
                gates.append(x(nxt))
            group.append(nxt)
            nxt += 1
        neg_groups.append(group)
    # bank 2: conjunction of negations per clause
    tops = []
    for group in neg_groups:
        tree, top, nxt = _and_tree(group, nxt)
        gates += tree
        tops.append(top)
    # bank 3: clause value = NOT(all literals false)
    clause_bits = []
    for top in tops:
        gates += [cx(top, nxt), x(nxt)]
        clause_bits.append(nxt)
        nxt += 1
    # bank 4: conjunction of clauses
    tree, root, nxt = _and_tree(clause_bits, nxt)
    gates += tree
    return UncomputableDecomposition(Circuit(nxt, tuple(gates)), Circuit(nxt, (z(root),)), n, nxt - n)


def ksat_bounds(cnf: CNF) -> dict:
    k, c = cnf.width, len(cnf.clauses)
    occ = [sum(1 for cl in cnf.clauses if v in {abs(l) for l in cl}) for v in range(1, cnf.n_vars + 1)]
    lg = lambda v: math.ceil(math.log2(v)) if v > 1 else 0
    return {
        "D_u_bound": 3 * k * c + 2 * c - 1,
        "per_variable_bound": [cv * (4 + lg(k) + lg(c)) for cv in occ],
        "occurrences": occ,
    }


def random_cnf(n: int, c: int, k: int, rng: np.random.Generator) -> CNF:
    clauses = []
    for _ in range(c):
        width = int(rng.integers(1, k + 1))
        vs = rng.choice(n, size=min(width, n), replace=False) + 1
        signs = rng.choice([-1, 1], size=len(vs))
        clauses.append(tuple(int(v * s) for v, s in zip(vs, signs)))
    return CNF(n, tuple(clauses))
