"""Coupling-graph aware decompositions and a small static-layout transpiler."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from qsl.circuit import (
    Circuit,
    Gate,
    cx,
    cz,
    gate_counts,
    h,
    lower_mcz,
    run_array,
    swap,
    t,
    tdag,
    u3,
    x,
    z,
)
from qsl.errors import RoutingError, ValidationError


@dataclass(frozen=True)
class CouplingGraph:
    n_physical: int
    edges: frozenset[frozenset[int]]

    def __post_init__(self):
        edges = frozenset(frozenset(int(q) for q in e) for e in self.edges)
        for e in edges:
            if len(e) != 2:
                raise ValidationError(f"bad edge {sorted(e)} (self-loop or malformed)")
            if any(q < 0 or q >= self.n_physical for q in e):
                raise ValidationError(f"edge {sorted(e)} outside 0..{self.n_physical - 1}")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def from_pairs(cls, n: int, pairs: Iterable[Sequence[int]]) -> "CouplingGraph":
        return cls(n, frozenset(frozenset(p) for p in pairs))

    @classmethod
    def from_json(cls, text: str) -> "CouplingGraph":
        d = json.loads(text)
        return cls.from_pairs(int(d["n"]), d["edges"])

    def to_json(self) -> str:
        return json.dumps({"n": self.n_physical, "edges": sorted(sorted(e) for e in self.edges)})

    def adjacent(self, a: int, b: int) -> bool:
        return frozenset((a, b)) in self.edges

    def neighbors(self, q: int) -> list[int]:
        return sorted(next(iter(e - {q})) for e in self.edges if q in e)

    def degree(self, q: int) -> int:
        return len(self.neighbors(q))

    def shortest_path(self, a: int, b: int) -> list[int]:
        """BFS visiting neighbours in ascending order, so ties go to lower indices."""
        prev = {a: None}
        queue = deque([a])
        while queue:
            u = queue.popleft()
            if u == b:
                break
            for v in self.neighbors(u):
                if v not in prev:
                    prev[v] = u
                    queue.append(v)
        if b not in prev:
            raise RoutingError(f"no path between physical qubits {a} and {b}")
        path = [b]
        while path[-1] != a:
            path.append(prev[path[-1]])
        return path[::-1]

    def distance(self, a: int, b: int) -> int:
        return len(self.shortest_path(a, b)) - 1


def vigo_graph() -> CouplingGraph:
    """Five qubits: 0-1, 1-2, 1-3, 3-4 (a T shape with a tail)."""
    return CouplingGraph.from_pairs(5, [(0, 1), (1, 2), (1, 3), (3, 4)])


def line_graph(n: int) -> CouplingGraph:
    return CouplingGraph.from_pairs(n, [(i, i + 1) for i in range(n - 1)])


def named_graph(name: str) -> CouplingGraph:
    if name == "vigo":
        return vigo_graph()
    if name.startswith("line"):
        return line_graph(int(name[4:] or 5))
    raise ValidationError(f"unknown graph {name!r}")


# -- fixed decompositions -----------------------------------------------

_R1 = (math.pi / 4, 0.0, 0.0)
_R2 = (-math.pi / 4, 0.0, 0.0)


def margolus(c1: int, c2: int, tq: int, n_qubits: int | None = None) -> Circuit:
    """Three-CX Toffoli that also puts -1 on ``|c1=1, c2=0, t=1>``."""
    n = n_qubits or max(c1, c2, tq) + 1
    return Circuit(n, (u3(tq, *_R1), cx(c2, tq), u3(tq, *_R1), cx(c1, tq),
                       u3(tq, *_R2), cx(c2, tq), u3(tq, *_R2)))


def ccz_line(a: int, b: int, c: int, n_qubits: int | None = None) -> Circuit:
    """Exact CCZ on a path ``a - b - c`` using 8 CX and only nearest-neighbour pairs."""
    n = n_qubits or max(a, b, c) + 1
    return Circuit(n, (
        tdag(a), tdag(b), tdag(c),
        cx(a, b), cx(b, c), cx(a, b), tdag(c),
        cx(b, c), cx(a, b), z(c), z(b), t(c), t(b),
        cx(b, c), cx(a, b), z(c), t(c),
        cx(b, c),
    ))


def ccz_textbook(a: int, b: int, c: int, n_qubits: int | None = None) -> Circuit:
    """Six-CX CCZ needing all three pairs connected (``c`` carries the T ladder)."""
    n = n_qubits or max(a, b, c) + 1
    return Circuit(n, (
        cx(b, c), tdag(c), cx(a, c), t(c), cx(b, c), tdag(c), cx(a, c),
        t(b), t(c), cx(a, b), t(a), tdag(b), cx(a, b),
    ))


def toffoli_textbook(c1: int, c2: int, tq: int, n_qubits: int | None = None) -> Circuit:
    core = ccz_textbook(c1, c2, tq, n_qubits)
    return Circuit(core.n_qubits, (h(tq),) + core.gates + (h(tq),))


def ccz_line_naive(a: int, b: int, c: int, n_qubits: int | None = None) -> Circuit:
    """Textbook CCZ on a path with the middle qubit as T-ladder target.

    The two ``a``-``c`` CX gates are reached by swapping ``a`` into the middle.
    """
    n = n_qubits or max(a, b, c) + 1
    return Circuit(n, (
        cx(c, b), tdag(b), cx(a, b), t(b), cx(c, b), tdag(b), cx(a, b),
        t(c), t(b),
        swap(a, b), cx(b, c), t(b), tdag(c), cx(b, c), swap(a, b),
    ))


def _diffusor_dressing(qs: Sequence[int]) -> tuple[Gate, ...]:
    return tuple(h(q) for q in qs) + tuple(x(q) for q in qs)


def diffusor_adjacent(a: int, b: int, n_qubits: int | None = None) -> Circuit:
    """``-G_2`` on neighbouring qubits with a single CZ."""
    n = n_qubits or max(a, b) + 1
    pre = _diffusor_dressing((a, b))
    return Circuit(n, pre + (cz(a, b),) + pre[::-1])


def diffusor_separated(a: int, c: int, b: int, n_qubits: int | None = None) -> Circuit:
    """``-G_2`` on ``a, c`` through a clean middle qubit ``b`` (3 two-qubit gates)."""
    n = n_qubits or max(a, b, c) + 1
    pre = _diffusor_dressing((a, c))
    return Circuit(n, pre + (cx(a, b), cz(b, c), cx(a, b)) + pre[::-1])


def diffusor_separated_naive(a: int, c: int, b: int, n_qubits: int | None = None) -> Circuit:
    n = n_qubits or max(a, b, c) + 1
    pre = _diffusor_dressing((a, c))
    return Circuit(n, pre + (swap(a, b), cz(b, c), swap(a, b)) + pre[::-1])


# -- peephole ------------------------------------------------------------

_SYMMETRIC = {"CZ", "SWAP", "CCZ", "MCZ", "ORACLE"}


def _same_support(g1: Gate, g2: Gate) -> bool:
    if g1.kind in _SYMMETRIC and g1.kind == g2.kind and g1.kind != "ORACLE":
        return set(g1.qubits) == set(g2.qubits)
    if g1.kind == "CCX" and g2.kind == "CCX":
        return set(g1.qubits[:2]) == set(g2.qubits[:2]) and g1.qubits[2] == g2.qubits[2]
    return False


def _cancels(g1: Gate, g2: Gate) -> bool:
    if _same_support(g1, g2):
        return True
    return g1.is_inverse_of(g2)


def peephole(circuit: Circuit) -> Circuit:
    """Remove adjacent inverse pairs until none remain."""
    out: list[Gate | None] = []
    last: dict[int, list[int]] = {}
    for g in circuit:
        tops = {last[q][-1] if last.get(q) else None for q in g.qubits}
        if len(tops) == 1:
            i = tops.pop()
            if i is not None and set(out[i].qubits) == set(g.qubits) and _cancels(out[i], g):
                for q in g.qubits:
                    last[q].pop()
                out[i] = None
                continue
        out.append(g)
        for q in g.qubits:
            last.setdefault(q, []).append(len(out) - 1)
    return Circuit(circuit.n_qubits, tuple(g for g in out if g is not None))


# -- Margolus policy and ancilla tracking --------------------------------

def margolus_plan(circuit: Circuit) -> dict[int, str]:
    """CCX indices that may be realized as Margolus gates, with the reason.

    ``paired``: a later CCX on the same qubits with only diagonal gates on
    those qubits in between, so the two extra phases cancel.  ``terminal``:
    every later gate touching the qubits (and whatever permutations spread
    the phase to) is classical, so the phase is invisible to measurement.
    """
    gates = circuit.gates
    plan: dict[int, str] = {}
    for i, g in enumerate(gates):
        if g.kind != "CCX" or i in plan:
            continue
        qs = set(g.qubits)
        for j in range(i + 1, len(gates)):
            gj = gates[j]
            if not qs.intersection(gj.qubits):
                continue
            if gj.kind == "CCX" and _same_support(g, gj):
                plan[i] = plan[j] = "paired"
            if not gj.is_diagonal:
                break
        if i in plan:
            continue
        spread = set(g.qubits)
        ok = True
        for gj in gates[i + 1:]:
            if not spread.intersection(gj.qubits) or gj.is_diagonal:
                continue
            if gj.is_permutation:
                spread.update(gj.qubits)
            else:
                ok = False
                break
        if ok:
            plan[i] = "terminal"
    return plan


def clean_before(circuit: Circuit, ancillas: Iterable[int]) -> list[frozenset[int]]:
    """For each gate index, the ancillas known to be ``|0>`` just before it."""
    clean = set(ancillas)
    version: dict[int, int] = {}
    computed: dict[int, tuple] = {}
    out = []
    for g in circuit:
        out.append(frozenset(clean))
        controls = g.qubits[:-1] if g.kind in {"CX", "CCX"} else ()
        written = [q for q in g.qubits if q not in controls] if not g.is_diagonal else []
        for q in written:
            if g.kind == "CCX" and q == g.qubits[2]:
                sig = (frozenset(controls), tuple(version.get(c, 0) for c in sorted(controls)))
                if q in clean:
                    clean.discard(q)
                    computed[q] = sig
                    continue
                if computed.get(q) == sig:
                    clean.add(q)
                    del computed[q]
                    continue
            clean.discard(q)
            computed.pop(q, None)
        for q in written:
            version[q] = version.get(q, 0) + 1
    return out


# -- transpiler -----------------------------------------------------------

@dataclass(frozen=True)
class PlacedCircuit:
    circuit: Circuit
    layout: tuple[int, ...]
    mapping_history: tuple[tuple[int, tuple[int, ...]], ...]
    cnot_count: int
    swap_count: int
    exact: bool
    report: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "circuit": self.circuit.to_dict(),
            "layout": list(self.layout),
            "mapping_history": [[i, list(m)] for i, m in self.mapping_history],
            "cnot_count": self.cnot_count,
            "swap_count": self.swap_count,
            "exact": self.exact,
            "report": self.report,
        }


def complete_layout(layout: Sequence[int], n_logical: int, n_physical: int) -> tuple[int, ...]:
    lay = [int(p) for p in layout]
    if len(set(lay)) != len(lay):
        raise RoutingError(f"layout {lay} is not injective")
    if len(lay) > n_logical:
        raise RoutingError("layout longer than the logical register")
    free = [p for p in range(n_physical) if p not in lay]
    lay += free[: n_logical - len(lay)]
    if len(lay) < n_logical:
        raise RoutingError("not enough physical qubits")
    if any(p < 0 or p >= n_physical for p in lay):
        raise RoutingError("layout references a missing physical qubit")
    return tuple(lay)


class _Emitter:
    def __init__(self, graph: CouplingGraph, layout: tuple[int, ...]):
        self.graph = graph
        self.layout = layout
        self.gates: list[Gate] = []
        self.swaps = 0
        self.bridges = 0
        self.history: list[tuple[int, tuple[int, ...]]] = [(0, layout)]

    def one(self, g: Gate) -> None:
        self.gates.append(g)

    def two(self, kind: str, p: int, q: int, clean_phys: frozenset[int], index: int) -> None:
        mk = cx if kind == "CX" else cz
        if self.graph.adjacent(p, q):
            self.gates.append(mk(p, q))
            return
        path = self.graph.shortest_path(p, q)
        if len(path) == 3 and path[1] in clean_phys:
            m = path[1]
            self.gates += [cx(p, m), mk(m, q), cx(p, m)]
            self.bridges += 1
            return
        # move p along the path until it neighbours q, act, then move it back
        hops = [swap(path[i], path[i + 1]) for i in range(len(path) - 2)]
        self.swaps += 2 * len(hops)
        moved = path[-2]
        perm = list(self.layout)
        for s in hops:
            a, b = s.qubits
            perm = [b if v == a else a if v == b else v for v in perm]
        self.history.append((index, tuple(perm)))
        self.history.append((index, self.layout))
        self.gates += hops + [mk(moved, q)] + hops[::-1]

    def ccz(self, a: int, b: int, c: int, clean_phys, index: int) -> None:
        g = self.graph
        for p, m, q in ((a, b, c), (b, a, c), (a, c, b)):
            if g.adjacent(p, m) and g.adjacent(m, q):
                self.gates += ccz_line(p, m, q).gates
                return
        for gate in ccz_textbook(a, b, c).gates:
            self._lowered(gate, clean_phys, index)

    def _lowered(self, gate: Gate, clean_phys, index: int) -> None:
        if gate.arity == 1:
            self.one(gate)
        else:
            self.two(gate.kind, *gate.qubits, clean_phys, index)


def lower_native(circuit: Circuit) -> Circuit:
    """CZ -> H CX H and SWAP -> three CX; everything else untouched."""
    out: list[Gate] = []
    for g in circuit:
        if g.kind == "CZ":
            a, b = g.qubits
            out += [h(b), cx(a, b), h(b)]
        elif g.kind == "SWAP":
            a, b = g.qubits
            out += [cx(a, b), cx(b, a), cx(a, b)]
        else:
            out.append(g)
    return Circuit(circuit.n_qubits, tuple(out))


def transpile(circuit: Circuit, graph: CouplingGraph, layout: Sequence[int], *,
              ancillas: Iterable[int] = (), use_margolus: bool = True) -> PlacedCircuit:
    """Place ``circuit`` on ``graph`` with a static layout.

    ``ancillas`` are logical qubits promised to start in ``|0>``; while they
    are provably clean they may bridge CX/CZ gates between their neighbours.
    """
    if any(g.kind == "ORACLE" for g in circuit):
        raise ValidationError("abstract oracle gates must be lowered before transpiling")
    if any(g.kind == "MCZ" and g.arity > 3 for g in circuit):
        circuit = lower_mcz(circuit)
    circuit = peephole(lower_mcz(circuit))
    lay = complete_layout(layout, circuit.n_qubits, graph.n_physical)
    unused = frozenset(range(graph.n_physical)) - set(lay)
    plan = margolus_plan(circuit) if use_margolus else {}
    clean = clean_before(circuit, ancillas)
    em = _Emitter(graph, lay)
    for i, g in enumerate(circuit):
        phys = tuple(lay[q] for q in g.qubits)
        clean_phys = unused | {lay[q] for q in clean[i]}
        kind = g.kind
        if g.arity == 1:
            em.one(g.remap(lay))
        elif kind in {"CX", "CZ"}:
            em.two(kind, *phys, clean_phys, i)
        elif kind == "SWAP":
            if graph.adjacent(*phys):
                em.one(swap(*phys))
            else:
                a, b = phys
                for p, q in ((a, b), (b, a), (a, b)):
                    em.two("CX", p, q, clean_phys, i)
        elif kind in {"CCZ", "MCZ"}:
            em.ccz(*phys, clean_phys, i)
        elif kind == "CCX" and i in plan or kind == "Margolus":
            for gate in margolus(*phys).gates:
                em._lowered(gate, clean_phys, i)
        elif kind == "CCX":
            c1, c2, tq = phys
            em.one(h(tq))
            em.ccz(c1, c2, tq, clean_phys, i)
            em.one(h(tq))
        else:  # pragma: no cover
            raise ValidationError(f"cannot place {kind}")
    placed = peephole(lower_native(Circuit(graph.n_physical, tuple(em.gates))))
    for g in placed:
        if g.arity == 2 and not graph.adjacent(*g.qubits):
            raise RoutingError(f"internal error: {g.kind}{g.qubits} off the coupling graph")
    counts = gate_counts(placed)
    exact = not any(v == "terminal" for v in plan.values())
    report = {
        "cnot_count": counts["per_kind"].get("CX", 0),
        "swaps_inserted": em.swaps,
        "bridged_gates": em.bridges,
        "margolus": {str(k): v for k, v in sorted(plan.items())},
        "gate_counts": counts,
    }
    return PlacedCircuit(placed, lay, tuple(em.history), report["cnot_count"], em.swaps,
                         exact, report)


def embed_state(psi: np.ndarray, layout: Sequence[int], n_physical: int) -> np.ndarray:
    """Place a logical state on physical qubits; unused physical qubits are ``|0>``."""
    n_log = len(layout)
    idx = np.arange(1 << n_log)
    phys = np.zeros_like(idx)
    for lq, pq in enumerate(layout):
        phys |= ((idx >> (n_log - 1 - lq)) & 1) << (n_physical - 1 - pq)
    out = np.zeros((1 << n_physical,) + psi.shape[1:], dtype=complex)
    out[phys] = psi
    return out


def verify_placement(source: Circuit, placed: PlacedCircuit, ancillas: Iterable[int] = (),
                     n_states: int = 8, rng: np.random.Generator | None = None) -> float:
    """Worst deviation between source and placed circuit on random inputs.

    Ancillas start in ``|0>``.  Exact placements are compared by fidelity up
    to global phase, others by output probabilities.
    """
    rng = rng or np.random.default_rng(0)
    n = source.n_qubits
    anc = set(ancillas)
    psi = rng.normal(size=(1 << n, n_states)) + 1j * rng.normal(size=(1 << n, n_states))
    idx = np.arange(1 << n)
    for a in anc:
        psi[((idx >> (n - 1 - a)) & 1) == 1] = 0
    psi /= np.linalg.norm(psi, axis=0)
    want = embed_state(run_array(lower_mcz(source), psi, n), placed.layout,
                       placed.circuit.n_qubits)
    got = run_array(placed.circuit, embed_state(psi, placed.layout, placed.circuit.n_qubits),
                    placed.circuit.n_qubits)
    if placed.exact:
        fid = np.abs(np.sum(np.conj(want) * got, axis=0))
        return float(np.max(np.abs(1 - fid)))
    return float(np.max(np.abs(np.abs(want) ** 2 - np.abs(got) ** 2)))
