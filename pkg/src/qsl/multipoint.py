"""Affine hashing over GF(2), kernel parametrizations and multi-target search."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from qsl import gf2
from qsl.circuit import Circuit, Gate, PhaseOracle, cx, oracle_gate, x
from qsl.errors import CapacityError, ValidationError
from qsl.tree import schedule_from_epsilon, search_distribution


@dataclass(frozen=True)
class AffineMap:
    """``h(x) = A x + b`` with ``A`` of shape ``(k, n)``."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = gf2.as_gf2(self.A)
        b = gf2.as_gf2(self.b).reshape(-1)
        if a.ndim != 2 or b.shape != (a.shape[0],):
            raise ValidationError("A must be k x n and b a k-vector")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "b", b)

    @property
    def k(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def __call__(self, xv: int) -> int:
        return gf2.vec_to_int(gf2.matmul(self.A, gf2.int_to_vec(xv, self.n)) ^ self.b)


@dataclass(frozen=True)
class AffineParam:
    """Injective ``g(i) = C i + p`` from ``d`` bits into ``n`` bits."""

    C: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        c = gf2.as_gf2(self.C)
        p = gf2.as_gf2(self.p).reshape(-1)
        if c.ndim != 2 or p.shape != (c.shape[0],):
            raise ValidationError("C must be n x d and p an n-vector")
        c.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "C", c)
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return self.C.shape[0]

    @property
    def d(self) -> int:
        return self.C.shape[1]

    def __call__(self, i: int) -> int:
        return gf2.vec_to_int(gf2.matmul(self.C, gf2.int_to_vec(i, self.d)) ^ self.p)

    def image(self) -> list[int]:
        pts = gf2.matmul(gf2.all_vectors(self.d), self.C.T) ^ self.p
        return [gf2.vec_to_int(v) for v in pts]

    def column_weights(self) -> list[int]:
        return [int(v) for v in self.C.sum(axis=0)]


def sample_hash(n: int, k: int, rng: np.random.Generator) -> AffineMap:
    if n < 1 or k < 1:
        raise ValidationError("n and k must be positive")
    return AffineMap(rng.integers(0, 2, size=(k, n), dtype=np.uint8),
                     rng.integers(0, 2, size=k, dtype=np.uint8))


def _all_products(n: int, k: int) -> np.ndarray:
    """``Ax`` as a k-bit integer for every matrix (rows) and every x (columns)."""
    mats = gf2.all_vectors(k * n).reshape(-1, k, n).astype(np.int64)
    xs = gf2.all_vectors(n).astype(np.int64)
    prod = np.einsum("akn,xn->axk", mats, xs) % 2
    weights = 1 << np.arange(k - 1, -1, -1)
    return prod @ weights


def pairwise_independence_check(n: int, k: int) -> dict:
    """Exhaustive count of single and joint hits over the whole family."""
    if n * k > 16:
        raise CapacityError("family too large to enumerate (n*k > 16)")
    ax = _all_products(n, k)
    nx, ny = 1 << n, 1 << k
    single = np.zeros((nx, ny), dtype=np.int64)
    joint = np.zeros((nx, nx, ny, ny), dtype=np.int64)
    xs = np.arange(nx)
    for b in range(ny):
        y = ax ^ b
        for a_row in y:
            single[xs, a_row] += 1
            joint[xs[:, None], xs[None, :], a_row[:, None], a_row[None, :]] += 1
    family = (1 << (k * n)) * ny
    off = ~np.eye(nx, dtype=bool)
    joint_off = joint[off]
    return {
        "family_size": family,
        "single_counts": sorted(set(single.ravel().tolist())),
        "joint_counts": sorted(set(joint_off.ravel().tolist())),
        "single_uniform": bool(np.all(single * ny == family)),
        "joint_uniform": bool(np.all(joint_off * ny * ny == family)),
    }


def kernel_param(h: AffineMap) -> AffineParam | None:
    """Parametrize ``{x : h(x) = 0}``; ``None`` when it is empty.

    The kernel basis is rotated so the first independent rows of the basis
    matrix become the identity, which caps every column weight at ``n-d+1``.
    """
    p = gf2.solve(h.A, h.b)
    if p is None:
        return None
    c0 = gf2.kernel_basis(h.A)
    d = c0.shape[1]
    if d:
        rows = gf2.independent_rows(c0)
        c0 = gf2.matmul(c0, gf2.inverse(c0[rows]))
    return AffineParam(c0, p)


def build_Dg(g: AffineParam) -> Circuit:
    """``|i>|0^n> -> |i>|g(i)>`` on ``d + n`` qubits (input register first)."""
    d, n = g.d, g.n
    gates: list[Gate] = [cx(i, d + j) for j in range(n) for i in range(d) if g.C[j, i]]
    gates += [x(d + j) for j in range(n) if g.p[j]]
    return Circuit(d + n, tuple(gates))


def restricted_oracle(oracle: PhaseOracle, g: AffineParam) -> PhaseOracle:
    """``O_g = D_g^-1 (I (x) O) D_g`` with marked set ``g^-1(S)``."""
    if g.n != oracle.n_qubits:
        raise ValidationError("parametrization and oracle sizes differ")
    d = g.d
    dg = build_Dg(g)
    body = oracle_gate(range(d, d + g.n), oracle.marked)
    realization = Circuit(d + g.n, dg.gates + (body,) + dg.inverse().gates)
    marked = frozenset(i for i, v in enumerate(g.image()) if v in oracle.marked)
    return PhaseOracle(d, marked, realization)


@dataclass(frozen=True)
class SearchOutcome:
    element: int | None
    queries: int
    gates: int

    @property
    def found(self) -> bool:
        return self.element is not None


def _restricted_search(g: AffineParam, oracle: PhaseOracle, rng: np.random.Generator
                       ) -> SearchOutcome:
    d = g.d
    image = g.image()
    if d <= 2:
        # tiny kernels: query candidates one by one
        for q, v in enumerate(image, 1):
            if v in oracle.marked:
                return SearchOutcome(v, q, 0)
        return SearchOutcome(None, len(image), 0)
    marked = frozenset(i for i, v in enumerate(image) if v in oracle.marked)
    schedule = schedule_from_epsilon(0.5, d)
    probs, calls, other = search_distribution(schedule, marked)
    i = int(rng.choice(1 << d, p=probs / probs.sum()))
    loader = len(build_Dg(g))
    gates = other + 2 * loader * calls + loader
    candidate = image[i]
    # one extra query verifies the measured candidate
    return SearchOutcome(candidate if candidate in oracle.marked else None, calls + 1, gates)


def multipoint(oracle: PhaseOracle, n: int, k: int, rng: np.random.Generator) -> SearchOutcome:
    if oracle.n_qubits != n:
        raise ValidationError("oracle size differs from n")
    if k >= n - 2:
        xv = int(rng.integers(0, 1 << n))
        return SearchOutcome(xv if xv in oracle.marked else None, 1, 0)
    h = sample_hash(n, k, rng)
    g = kernel_param(h)
    if g is None or g.d >= n - k + 2:
        return SearchOutcome(None, 0, 0)
    return _restricted_search(g, oracle, rng)


def amplification_rounds(p: float) -> int:
    if not 0 < p < 1:
        raise ValidationError("p must lie in (0, 1)")
    return max(1, math.ceil(math.log(1 - p) / math.log(15 / 16)))


def multipoint_amplified(oracle: PhaseOracle, n: int, k: int, p: float,
                         rng: np.random.Generator) -> SearchOutcome:
    queries = gates = 0
    for _ in range(amplification_rounds(p)):
        res = multipoint(oracle, n, k, rng)
        queries += res.queries
        gates += res.gates
        if res.found:
            return SearchOutcome(res.element, queries, gates)
    return SearchOutcome(None, queries, gates)


def multipoint_unknown(oracle: PhaseOracle, n: int, p: float, rng: np.random.Generator
                       ) -> SearchOutcome:
    """Sweep guesses of k from large to small; an exhausted sweep returns not-found."""
    if not 2 * (1 - p) ** 2 < 1:
        raise ValidationError("need 2(1-p)^2 < 1")
    queries = gates = 0
    for i in range(n + 2, 1, -1):
        for j in range(n + 2, i - 1, -1):
            res = multipoint_amplified(oracle, n, j, p, rng)
            queries += res.queries
            gates += res.gates
            if res.found:
                return SearchOutcome(res.element, queries, gates)
    return SearchOutcome(None, queries, gates)


def k_for(K: int) -> int:
    """``k = 1 + ceil(log2 K)``."""
    if K < 1:
        raise ValidationError("K must be positive")
    return 1 + math.ceil(math.log2(K)) if K > 1 else 1


def kernel_dimension(A) -> int:
    a = gf2.as_gf2(A)
    return a.shape[1] - gf2.rank(a)


def dimension_tail(n: int, k: int, trials: int, rng: np.random.Generator) -> float:
    """Fraction of sampled maps with ``dim ker >= n-k+2``."""
    if not 1 <= k < n - 2:
        raise ValidationError("need 1 <= k < n-2")
    hits = sum(kernel_dimension(rng.integers(0, 2, size=(k, n))) >= n - k + 2
               for _ in range(trials))
    return hits / trials


def dimension_tail_exact(n: int, k: int) -> Fraction:
    """Exact tail over all matrices (``b`` does not affect ``dim ker A``)."""
    if k * n > 16:
        raise CapacityError("too many matrices to enumerate")
    mats = gf2.all_vectors(k * n).reshape(-1, k, n)
    hits = sum(kernel_dimension(m) >= n - k + 2 for m in mats)
    return Fraction(int(hits), len(mats))


def vv_check(n: int, S: Iterable[int], k: int | None = None) -> Fraction:
    """Exact probability that a random ``h`` isolates exactly one element of ``S``."""
    S = sorted(set(int(s) for s in S))
    K = len(S)
    k = k_for(K) if k is None else k
    if not (K >= 1 and 2 ** (k - 2) <= K <= 2 ** (k - 1)):
        raise ValidationError(f"|S|={K} violates 2^(k-2) <= |S| <= 2^(k-1) for k={k}")
    if k * n + k > 20:
        raise CapacityError("family too large to enumerate")
    ax = _all_products(n, k)[:, S]
    good = 0
    for b in range(1 << k):
        good += int(np.sum(np.sum((ax ^ b) == 0, axis=1) == 1))
    return Fraction(good, (1 << (k * n)) * (1 << k))
