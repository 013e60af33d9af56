"""Gate IR with exact statevector simulation of search operators.

Qubit 0 is the most significant bit of a basis index, so the basis state
``|q0 q1 ... q_{n-1}>`` has index ``int("q0q1...", 2)``.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import numpy as np

from qsl.errors import CapacityError, ValidationError

MAX_QUBITS = 22
GATE_TOL = 1e-12

_ARITY = {
    "X": 1, "Z": 1, "H": 1, "T": 1, "Tdag": 1, "U2": 1, "U3": 1,
    "CX": 2, "CZ": 2, "SWAP": 2,
    "CCX": 3, "CCZ": 3, "Margolus": 3,
}
_N_ANGLES = {"U2": 2, "U3": 3}
# variable-arity kinds: multi-controlled Z and the abstract marked-set oracle
_VARIADIC = {"MCZ", "ORACLE"}
KINDS = frozenset(_ARITY) | _VARIADIC

_PERMUTATION = {"X", "CX", "CCX", "SWAP"}
_DIAGONAL = {"Z", "T", "Tdag", "CZ", "CCZ", "MCZ", "ORACLE"}
_SELF_INVERSE = {"X", "Z", "H", "CX", "CZ", "SWAP", "CCX", "CCZ", "MCZ", "ORACLE", "Margolus"}


def to_bits(x: int, n: int) -> str:
    return format(x, f"0{n}b") if n else ""


def from_bits(s: str) -> int:
    s = s.strip()
    if s and set(s) - {"0", "1"}:
        raise ValidationError(f"not a bitstring: {s!r}")
    return int(s, 2) if s else 0


def _check_cap(n: int) -> None:
    if n > MAX_QUBITS:
        raise CapacityError(f"{n} qubits exceeds the statevector cap of {MAX_QUBITS}")


@dataclass(frozen=True)
class Gate:
    """A single gate: kind, ordered operands (controls first) and angles.

    ``ORACLE`` gates carry ``marked``, the set of operand bit patterns whose
    phase is flipped (pattern bit order follows ``qubits``).
    """

    kind: str
    qubits: tuple[int, ...]
    angles: tuple[float, ...] = ()
    marked: frozenset[int] | None = None

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
        if self.kind not in KINDS:
            raise ValidationError(f"unknown gate kind {self.kind!r}")
        k = len(self.qubits)
        if self.kind in _ARITY and k != _ARITY[self.kind]:
            raise ValidationError(f"{self.kind} takes {_ARITY[self.kind]} qubits, got {k}")
        if self.kind in _VARIADIC and k < 1:
            raise ValidationError(f"{self.kind} needs at least one qubit")
        if len(set(self.qubits)) != k:
            raise ValidationError(f"repeated operand in {self.kind}{self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise ValidationError("negative qubit index")
        if len(self.angles) != _N_ANGLES.get(self.kind, 0):
            raise ValidationError(f"{self.kind} takes {_N_ANGLES.get(self.kind, 0)} angles")
        if self.kind == "ORACLE":
            marked = frozenset(int(m) for m in (self.marked or ()))
            if any(m < 0 or m >= 1 << k for m in marked):
                raise ValidationError("ORACLE marked pattern out of range")
            object.__setattr__(self, "marked", marked)
        elif self.marked is not None:
            raise ValidationError("only ORACLE gates carry a marked set")

    @property
    def arity(self) -> int:
        return len(self.qubits)

    @property
    def is_permutation(self) -> bool:
        return self.kind in _PERMUTATION

    @property
    def is_diagonal(self) -> bool:
        if self.kind == "U3":
            return self.angles[0] == 0.0
        return self.kind in _DIAGONAL

    @property
    def is_classical(self) -> bool:
        """Maps basis states to basis states (up to phase)."""
        return self.is_permutation or self.is_diagonal or self.kind == "Margolus"

    def inverse(self) -> "Gate":
        if self.kind in _SELF_INVERSE:
            return self
        if self.kind == "T":
            return Gate("Tdag", self.qubits)
        if self.kind == "Tdag":
            return Gate("T", self.qubits)
        if self.kind == "U2":
            phi, lam = self.angles
            return Gate("U3", self.qubits, (-math.pi / 2, -lam, -phi))
        theta, phi, lam = self.angles
        return Gate("U3", self.qubits, (-theta, -lam, -phi))

    def remap(self, mapping: Sequence[int]) -> "Gate":
        return Gate(self.kind, tuple(mapping[q] for q in self.qubits), self.angles, self.marked)

    def matrix(self) -> np.ndarray:
        """Unitary on the operands, operand 0 most significant."""
        return _local_matrix(self)

    def is_inverse_of(self, other: "Gate", tol: float = 1e-12) -> bool:
        if self.qubits != other.qubits:
            return False
        if self == other.inverse():
            return True
        if self.arity == 1 and self.kind in {"U2", "U3", "T", "Tdag", "H", "X", "Z"}:
            prod = self.matrix() @ other.matrix()
            return abs(abs(np.trace(prod)) - 2.0) < tol and abs(prod[0, 1]) < tol
        return False

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "qubits": list(self.qubits), "angles": list(self.angles)}
        if self.marked is not None:
            d["marked"] = sorted(self.marked)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Gate":
        marked = d.get("marked")
        return cls(d["kind"], tuple(d["qubits"]), tuple(d.get("angles", ())),
                   frozenset(marked) if marked is not None else None)


# -- gate factories -------------------------------------------------------

def x(q): return Gate("X", (q,))
def z(q): return Gate("Z", (q,))
def h(q): return Gate("H", (q,))
def t(q): return Gate("T", (q,))
def tdag(q): return Gate("Tdag", (q,))
def u2(q, phi, lam): return Gate("U2", (q,), (phi, lam))
def u3(q, theta, phi, lam): return Gate("U3", (q,), (theta, phi, lam))
def cx(c, tq): return Gate("CX", (c, tq))
def cz(a, b): return Gate("CZ", (a, b))
def swap(a, b): return Gate("SWAP", (a, b))
def ccx(c1, c2, tq): return Gate("CCX", (c1, c2, tq))
def ccz(a, b, c): return Gate("CCZ", (a, b, c))
def mcz(*qs): return Gate("MCZ", tuple(qs))


def oracle_gate(qubits: Sequence[int], marked: Iterable[int]) -> Gate:
    return Gate("ORACLE", tuple(qubits), (), frozenset(marked))


def _u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([
        [c, -np.exp(1j * lam) * s],
        [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c],
    ], dtype=complex)


_SQ2 = 1 / math.sqrt(2)
_FIXED_1Q = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "T": np.diag([1, np.exp(1j * math.pi / 4)]),
    "Tdag": np.diag([1, np.exp(-1j * math.pi / 4)]),
}


@lru_cache(maxsize=4096)
def _local_matrix(g: Gate) -> np.ndarray:
    k = g.arity
    if g.kind in _FIXED_1Q:
        m = _FIXED_1Q[g.kind]
    elif g.kind == "U3":
        m = _u3_matrix(*g.angles)
    elif g.kind == "U2":
        m = _u3_matrix(math.pi / 2, *g.angles)
    elif g.is_diagonal or g.is_permutation or g.kind == "Margolus":
        if k > 12:
            raise CapacityError("dense matrix for a gate on more than 12 qubits")
        m = np.zeros((1 << k, 1 << k), dtype=complex)
        for col in range(1 << k):
            row, ph = _classical_local(g, col)
            m[row, col] = ph
    else:  # pragma: no cover
        raise ValidationError(f"no matrix for {g.kind}")
    m = np.array(m, dtype=complex)
    m.setflags(write=False)
    return m


def _classical_local(g: Gate, v: int) -> tuple[int, complex]:
    """Action of a classical gate on an operand pattern ``v`` (operand 0 = MSB)."""
    k = g.arity
    bit = [(v >> (k - 1 - i)) & 1 for i in range(k)]
    kind = g.kind
    if kind == "X":
        return v ^ 1, 1
    if kind == "CX":
        return v ^ bit[0], 1
    if kind == "CCX":
        return v ^ (bit[0] & bit[1]), 1
    if kind == "SWAP":
        return (bit[1] << 1) | bit[0], 1
    if kind == "Margolus":
        # CCX followed by a -1 on |c1=1, c2=0, t=1>
        w = v ^ (bit[0] & bit[1])
        return w, (-1 if w == 0b101 else 1)
    if kind in {"Z", "CZ", "CCZ", "MCZ"}:
        return v, (-1 if all(bit) else 1)
    if kind == "T":
        return v, (np.exp(1j * math.pi / 4) if v else 1)
    if kind == "Tdag":
        return v, (np.exp(-1j * math.pi / 4) if v else 1)
    if kind == "ORACLE":
        return v, (-1 if v in g.marked else 1)
    if kind == "U3" and g.angles[0] == 0.0:
        return v, (np.exp(1j * (g.angles[1] + g.angles[2])) if v else 1)
    raise ValidationError(f"{kind} is not a classical gate")


@dataclass(frozen=True)
class Circuit:
    """Chronologically ordered gates on ``n_qubits`` qubits."""

    n_qubits: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.n_qubits < 0:
            raise ValidationError("negative qubit count")
        for g in self.gates:
            if not isinstance(g, Gate):
                raise ValidationError(f"not a gate: {g!r}")
            if max(g.qubits) >= self.n_qubits:
                raise ValidationError(f"{g.kind}{g.qubits} out of range for {self.n_qubits} qubits")

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self) -> Iterator[Gate]:
        return iter(self.gates)

    def __add__(self, other: "Circuit") -> "Circuit":
        n = max(self.n_qubits, other.n_qubits)
        return Circuit(n, self.gates + other.gates)

    def inverse(self) -> "Circuit":
        return Circuit(self.n_qubits, tuple(g.inverse() for g in reversed(self.gates)))

    def widen(self, n: int) -> "Circuit":
        if n < self.n_qubits:
            raise ValidationError("cannot shrink a circuit")
        return Circuit(n, self.gates)

    def remap(self, mapping: Sequence[int], n_qubits: int | None = None) -> "Circuit":
        n = n_qubits if n_qubits is not None else max(mapping, default=-1) + 1
        return Circuit(n, tuple(g.remap(mapping) for g in self.gates))

    @property
    def oracle_calls(self) -> int:
        return sum(g.kind == "ORACLE" for g in self.gates)

    def to_dict(self) -> dict:
        return {"n_qubits": self.n_qubits, "gates": [g.to_dict() for g in self.gates]}

    @classmethod
    def from_dict(cls, d: dict) -> "Circuit":
        return cls(int(d["n_qubits"]), tuple(Gate.from_dict(g) for g in d["gates"]))

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text: str) -> "Circuit":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        _check_cap(self.n_qubits)
        amp = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amp.size != 1 << self.n_qubits:
            raise ValidationError(f"need {1 << self.n_qubits} amplitudes, got {amp.size}")
        norm = float(np.vdot(amp, amp).real)
        if abs(norm - 1.0) > 1e-9:
            raise ValidationError(f"state norm {norm} is not 1")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    def fidelity(self, other: "StateVector") -> float:
        """|<self|other>|, insensitive to global phase."""
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)))


def uniform_state(n: int) -> StateVector:
    if n < 1:
        raise ValidationError("n must be at least 1")
    _check_cap(n)
    return StateVector(n, np.full(1 << n, 2.0 ** (-n / 2), dtype=complex))


def basis_state(n: int, index: int | str) -> StateVector:
    _check_cap(n)
    if isinstance(index, str):
        index = from_bits(index)
    if not 0 <= index < 1 << n:
        raise ValidationError("basis index out of range")
    amp = np.zeros(1 << n, dtype=complex)
    amp[index] = 1.0
    return StateVector(n, amp)


# -- simulation kernels ---------------------------------------------------

def _bit_columns(n: int, qubits: Sequence[int]) -> np.ndarray:
    """Operand pattern (operand 0 = MSB) for every basis index."""
    idx = np.arange(1 << n, dtype=np.int64)
    pat = np.zeros(1 << n, dtype=np.int64)
    for q in qubits:
        pat = (pat << 1) | ((idx >> (n - 1 - q)) & 1)
    return pat


@lru_cache(maxsize=512)
def _diag_vector(g: Gate, n: int) -> np.ndarray:
    pat = _bit_columns(n, g.qubits)
    if g.kind == "ORACLE":
        vec = np.where(np.isin(pat, list(g.marked)), -1.0, 1.0).astype(complex)
    else:
        local = np.array([_classical_local(g, v)[1] for v in range(1 << g.arity)], dtype=complex)
        vec = local[pat]
    vec.setflags(write=False)
    return vec


@lru_cache(maxsize=512)
def _perm_index(g: Gate, n: int) -> np.ndarray:
    idx = np.arange(1 << n, dtype=np.int64)
    sh = [n - 1 - q for q in g.qubits]
    if g.kind == "X":
        out = idx ^ (1 << sh[0])
    elif g.kind == "CX":
        out = idx ^ (((idx >> sh[0]) & 1) << sh[1])
    elif g.kind == "CCX":
        out = idx ^ ((((idx >> sh[0]) & (idx >> sh[1])) & 1) << sh[2])
    else:  # SWAP
        diff = ((idx >> sh[0]) ^ (idx >> sh[1])) & 1
        out = idx ^ ((diff << sh[0]) | (diff << sh[1]))
    out.setflags(write=False)
    return out


def _apply_array(psi: np.ndarray, g: Gate, n: int) -> np.ndarray:
    """Apply ``g`` to an array of shape (2**n,) or (2**n, batch)."""
    if g.is_diagonal:
        vec = _diag_vector(g, n)
        return psi * (vec if psi.ndim == 1 else vec[:, None])
    if g.is_permutation:
        # every permutation kind here is an involution
        return psi[_perm_index(g, n)]
    k = g.arity
    batch = psi.shape[1:]
    tensor = psi.reshape((2,) * n + batch)
    u = g.matrix().reshape((2,) * (2 * k))
    out = np.tensordot(u, tensor, axes=(list(range(k, 2 * k)), list(g.qubits)))
    out = np.moveaxis(out, list(range(k)), list(g.qubits))
    return out.reshape(psi.shape)


def _check_gate(g: Gate, n: int) -> None:
    if not isinstance(g, Gate):
        raise ValidationError(f"not a gate: {g!r}")
    if max(g.qubits) >= n:
        raise ValidationError(f"{g.kind}{g.qubits} out of range for {n} qubits")


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    _check_gate(gate, state.n_qubits)
    return StateVector(state.n_qubits, _apply_array(state.amplitudes, gate, state.n_qubits))


def run_array(circuit: Circuit | Iterable[Gate], psi: np.ndarray, n: int) -> np.ndarray:
    """Apply gates to a raw amplitude array (optionally batched along axis 1)."""
    _check_cap(n)
    out = np.asarray(psi, dtype=complex)
    for g in circuit:
        _check_gate(g, n)
        out = _apply_array(out, g, n)
    return out


def simulate(circuit: Circuit, initial: StateVector) -> StateVector:
    if circuit.n_qubits != initial.n_qubits:
        raise ValidationError(
            f"circuit has {circuit.n_qubits} qubits, state has {initial.n_qubits}")
    return StateVector(initial.n_qubits, run_array(circuit, initial.amplitudes, initial.n_qubits))


def unitary(circuit: Circuit) -> np.ndarray:
    """Dense unitary, column j = image of basis state j."""
    n = circuit.n_qubits
    if n > 12:
        raise CapacityError("dense unitary limited to 12 qubits")
    return run_array(circuit, np.eye(1 << n, dtype=complex), n)


def measure_distribution(state: StateVector) -> np.ndarray:
    return np.abs(state.amplitudes) ** 2


def classical_eval(circuit: Circuit | Iterable[Gate], bits: int, n: int | None = None
                   ) -> tuple[int, complex]:
    """Evaluate a classical circuit on one basis state without an amplitude array.

    Returns the output basis index and the accumulated phase.  Raises
    ``ValidationError`` on gates that create superpositions.
    """
    if n is None:
        n = circuit.n_qubits
    phase: complex = 1
    for g in circuit:
        sh = [n - 1 - q for q in g.qubits]
        if g.kind == "X":
            bits ^= 1 << sh[0]
        elif g.kind == "CX":
            if (bits >> sh[0]) & 1:
                bits ^= 1 << sh[1]
        elif g.kind == "CCX":
            if (bits >> sh[0]) & (bits >> sh[1]) & 1:
                bits ^= 1 << sh[2]
        else:
            pat = 0
            for s in sh:
                pat = (pat << 1) | ((bits >> s) & 1)
            new, ph = _classical_local(g, pat)
            phase *= ph
            for i, s in enumerate(sh):
                b = (new >> (len(sh) - 1 - i)) & 1
                bits = (bits & ~(1 << s)) | (b << s)
    return bits, phase


# -- oracles and diffusors ------------------------------------------------

@dataclass(frozen=True)
class PhaseOracle:
    """Marked set over ``n_qubits`` plus an optional gate-level realization.

    A realization acts on ``n_qubits + a`` qubits with the ancillas last and
    must map ``|x>|0^a>`` to ``(-1)^[x in S] |x>|0^a>``.
    """

    n_qubits: int
    marked: frozenset[int]
    realization: Circuit | None = None

    def __post_init__(self):
        marked = frozenset(from_bits(m) if isinstance(m, str) else int(m) for m in self.marked)
        if any(m < 0 or m >= 1 << self.n_qubits for m in marked):
            raise ValidationError("marked element out of range")
        object.__setattr__(self, "marked", marked)
        if self.realization is not None and self.realization.n_qubits < self.n_qubits:
            raise ValidationError("realization narrower than the oracle")

    @classmethod
    def from_bitstrings(cls, bitstrings: Iterable[str], n: int | None = None) -> "PhaseOracle":
        items = [b.strip() for b in bitstrings if b.strip()]
        if n is None:
            if not items:
                raise ValidationError("cannot infer n from an empty marked set")
            n = len(items[0])
        if any(len(b) != n for b in items):
            raise ValidationError("bitstrings of mixed length")
        return cls(n, frozenset(from_bits(b) for b in items))

    def __contains__(self, x: int | str) -> bool:
        return (from_bits(x) if isinstance(x, str) else x) in self.marked

    @property
    def n_ancilla(self) -> int:
        return 0 if self.realization is None else self.realization.n_qubits - self.n_qubits

    def gate(self, qubits: Sequence[int] | None = None) -> Gate:
        return oracle_gate(range(self.n_qubits) if qubits is None else qubits, self.marked)

    def check_realization(self, tol: float = 1e-9) -> bool:
        """Verify the realization on every data basis state with clean ancillas."""
        if self.realization is None:
            return True
        n, a = self.n_qubits, self.n_ancilla
        circ = self.realization
        try:
            for xv in range(1 << n):
                out, ph = classical_eval(circ, xv << a, n + a)
                want = -1 if xv in self.marked else 1
                if out != xv << a or abs(ph - want) > tol:
                    return False
            return True
        except ValidationError:
            pass
        _check_cap(n + a)
        cols = np.zeros((1 << (n + a), 1 << n), dtype=complex)
        cols[np.arange(1 << n) << a, np.arange(1 << n)] = 1
        out = run_array(circ, cols, n + a)
        expect = cols * np.array([-1 if xv in self.marked else 1 for xv in range(1 << n)])
        return bool(np.max(np.abs(out - expect)) < tol)


def phase_oracle_apply(state: StateVector, oracle: PhaseOracle) -> StateVector:
    if state.n_qubits != oracle.n_qubits:
        raise ValidationError("oracle and state sizes differ")
    amp = state.amplitudes.copy()
    if oracle.marked:
        amp[list(oracle.marked)] *= -1
    return StateVector(state.n_qubits, amp)


def diffusor(k: int, qubits: Sequence[int] | None = None, n_qubits: int | None = None) -> Circuit:
    """Exact ``G_k = 2|u><u| - I`` on ``qubits`` (default ``0..k-1``).

    ``G_1`` is a bare X.  For larger k the reflection ``I - 2|u><u|`` is
    built as H X (multi-controlled Z) X H, and the ``-1`` global phase is
    supplied by ``(ZX)^2 = -I`` on the first qubit.
    """
    if k < 1:
        raise ValidationError("diffusor needs k >= 1")
    qs = tuple(range(k)) if qubits is None else tuple(qubits)
    if len(qs) != k:
        raise ValidationError("qubit list length differs from k")
    n = max(qs) + 1 if n_qubits is None else n_qubits
    if k == 1:
        return Circuit(n, (x(qs[0]),))
    core = {2: cz, 3: ccz}.get(k, mcz)(*qs)
    gates = [h(q) for q in qs] + [x(q) for q in qs] + [core] + [x(q) for q in qs] + [h(q) for q in qs]
    gates += [z(qs[0]), x(qs[0]), z(qs[0]), x(qs[0])]
    return Circuit(n, tuple(gates))


def lower_mcz(circuit: Circuit) -> Circuit:
    """Expand MCZ gates on four or more qubits into CX ladders and phase rotations.

    Uses ``x_1 ... x_k = 2^{1-k} sum_{S} (-1)^{|S|-1} parity_S(x)`` so every
    phase is a diag(1, e^{i lam}) rotation on a parity accumulated by CX.
    """
    out: list[Gate] = []
    for g in circuit:
        if g.kind != "MCZ" or g.arity <= 3:
            if g.kind == "MCZ":
                out.append({1: z, 2: cz, 3: ccz}[g.arity](*g.qubits))
            else:
                out.append(g)
            continue
        qs, k = g.qubits, g.arity
        for mask in range(1, 1 << k):
            members = [qs[i] for i in range(k) if (mask >> i) & 1]
            lam = math.pi * (-1) ** (len(members) - 1) / 2 ** (k - 1)
            tgt, rest = members[-1], members[:-1]
            ladder = [cx(c, tgt) for c in rest]
            out += ladder + [u3(tgt, 0.0, 0.0, lam)] + ladder[::-1]
    return Circuit(circuit.n_qubits, tuple(out))


def gate_counts(circuit: Circuit | Iterable[Gate]) -> dict:
    """Tallies; ``cx_equivalent`` counts a SWAP as three two-qubit gates."""
    per_kind = Counter(g.kind for g in circuit)
    two = sum(c for kind, c in per_kind.items() if _ARITY.get(kind) == 2)
    return {
        "total": sum(per_kind.values()),
        "two_qubit": two,
        "cx_equivalent": two + 2 * per_kind.get("SWAP", 0),
        "per_kind": dict(per_kind),
    }
