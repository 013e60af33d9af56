"""Dense linear algebra over GF(2) on numpy uint8 arrays.

Vectors are bit arrays with index 0 the most significant bit, matching the
qubit order used by the simulator.
"""

from __future__ import annotations

import numpy as np

from qsl.errors import ValidationError


def as_gf2(m) -> np.ndarray:
    arr = np.asarray(m, dtype=np.uint8) & 1
    return arr


def int_to_vec(v: int, n: int) -> np.ndarray:
    return np.array([(v >> (n - 1 - i)) & 1 for i in range(n)], dtype=np.uint8)


def vec_to_int(vec) -> int:
    out = 0
    for b in np.asarray(vec).reshape(-1):
        out = (out << 1) | int(b & 1)
    return out


def all_vectors(n: int) -> np.ndarray:
    """All ``2^n`` bit vectors as rows, in increasing integer order."""
    idx = np.arange(1 << n, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.uint8)


def matmul(a, b) -> np.ndarray:
    return (as_gf2(a).astype(np.int64) @ as_gf2(b).astype(np.int64) % 2).astype(np.uint8)


def rref(m) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form and pivot columns."""
    r = as_gf2(m).copy()
    rows, cols = r.shape
    pivots: list[int] = []
    row = 0
    for col in range(cols):
        if row >= rows:
            break
        hits = np.nonzero(r[row:, col])[0]
        if hits.size == 0:
            continue
        p = row + hits[0]
        if p != row:
            r[[row, p]] = r[[p, row]]
        others = np.nonzero(r[:, col])[0]
        others = others[others != row]
        r[others] ^= r[row]
        pivots.append(col)
        row += 1
    return r, pivots


def rank(m) -> int:
    return len(rref(m)[1])


def kernel_basis(a) -> np.ndarray:
    """Columns form a basis of ``{x : A x = 0}``."""
    a = as_gf2(a)
    n = a.shape[1]
    r, piv = rref(a)
    free = [c for c in range(n) if c not in piv]
    basis = np.zeros((n, len(free)), dtype=np.uint8)
    for j, f in enumerate(free):
        basis[f, j] = 1
        for i, pc in enumerate(piv):
            basis[pc, j] = r[i, f]
    return basis


def solve(a, b) -> np.ndarray | None:
    """One solution of ``A x = b`` or ``None``."""
    a, b = as_gf2(a), as_gf2(b).reshape(-1)
    k, n = a.shape
    aug = np.concatenate([a, b[:, None]], axis=1)
    r, piv = rref(aug)
    if n in piv:
        return None
    x = np.zeros(n, dtype=np.uint8)
    for i, pc in enumerate(piv):
        x[pc] = r[i, n]
    return x


def inverse(m) -> np.ndarray:
    m = as_gf2(m)
    d = m.shape[0]
    if m.shape != (d, d):
        raise ValidationError("inverse of a non-square matrix")
    r, piv = rref(np.concatenate([m, np.eye(d, dtype=np.uint8)], axis=1))
    if d and (len(piv) < d or piv[d - 1] >= d):
        raise ValidationError("matrix is singular over GF(2)")
    return r[:, d:]


def independent_rows(m) -> list[int]:
    """Lexicographically first maximal set of linearly independent rows."""
    m = as_gf2(m)
    chosen: list[int] = []
    current = np.zeros((0, m.shape[1]), dtype=np.uint8)
    for i in range(m.shape[0]):
        trial = np.vstack([current, m[i:i + 1]])
        if rank(trial) > len(chosen):
            chosen.append(i)
            current = trial
    return chosen
