"""Hardware-style benchmarks: trajectory noise plus the statistics used to read the results."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import least_squares, nnls

from qsl.circuit import (
    Circuit,
    Gate,
    ccx,
    ccz,
    cz,
    h,
    lower_mcz,
    run_array,
    u3,
    x,
    z,
)
from qsl.errors import DegenerateError, FitError, ValidationError
from qsl.topology import PlacedCircuit, peephole, transpile, vigo_graph
from qsl.uncompute import GenericOracleSchedule, UncomputableDecomposition, rewrite_partial_uncompute

N_DATA = 4
ANCILLA = 4  # logical index of the single ancilla in the benchmark circuits

# -- benchmark circuits (4 data qubits + 1 ancilla) -----------------------


def _dress(marked: int, qubits: Sequence[int] = range(N_DATA)) -> list[Gate]:
    return [x(q) for q in qubits if not (marked >> (N_DATA - 1 - q)) & 1]


def _hadamards() -> list[Gate]:
    return [h(q) for q in range(N_DATA)]


def _g2(a: int, b: int) -> list[Gate]:
    # -G_2; the sign is a global phase
    return [h(a), h(b), x(a), x(b), cz(a, b), x(a), x(b), h(a), h(b)]


def _oracle(marked: int) -> list[Gate]:
    a = ANCILLA
    d = _dress(marked)
    return d + [ccx(0, 1, a), ccz(a, 2, 3), ccx(0, 1, a)] + d


def grover_iteration(marked: int) -> Circuit:
    a = ANCILLA
    flips = [x(q) for q in range(N_DATA)]
    diff = _hadamards() + flips + [ccx(0, 1, a), ccz(a, 2, 3), ccx(0, 1, a)] + flips + _hadamards()
    return Circuit(5, tuple(_hadamards() + _oracle(marked) + diff))


def two_qubit_diffusor_step(marked: int) -> Circuit:
    """Oracle whose ancilla is never uncomputed, then ``G_2`` on qubits 0, 1."""
    a = ANCILLA
    d = _dress(marked)
    gates = _hadamards() + d + [ccx(2, 3, a), ccz(a, 0, 1)] + d + _g2(0, 1)
    return Circuit(5, tuple(gates))


def three_qubit_diffusor_step(marked: int) -> Circuit:
    a = ANCILLA
    qs = (0, 1, 2)
    pre = [h(q) for q in qs] + [x(q) for q in qs]
    diff = pre + [ccx(0, 1, a), cz(a, 2), ccx(0, 1, a)] + pre[::-1]
    return Circuit(5, tuple(_hadamards() + _oracle(marked) + diff))


def benchmark_decomposition(marked: int) -> UncomputableDecomposition:
    """Oracle split with ``CCX(2,3 -> a)`` computed and ``CCZ(a,0,1)`` as phase."""
    compute = Circuit(5, tuple(_dress(marked) + [ccx(2, 3, ANCILLA)]))
    phase = Circuit(5, (ccz(ANCILLA, 0, 1),))
    return UncomputableDecomposition(compute, phase, N_DATA, 1)


def two_diffusor_prefix(marked: int) -> Circuit:
    """Oracle, ``G_2`` on (0,1), oracle, ``G_2`` on (2,3), rewritten by partial uncompute."""
    sets = (frozenset({0, 1}), frozenset({2, 3}))
    mixers = tuple(Circuit(5, tuple(_g2(*sorted(s)))) for s in sets)
    body = rewrite_partial_uncompute(GenericOracleSchedule(sets, mixers),
                                     benchmark_decomposition(marked))
    return peephole(Circuit(5, tuple(_hadamards())) + body)


@dataclass(frozen=True)
class Benchmark:
    name: str
    build: Callable[[int], Circuit]
    layout: tuple[int, ...]
    target: int


BENCHMARKS: dict[str, Benchmark] = {
    b.name: b for b in (
        Benchmark("diffusor2_step", two_qubit_diffusor_step, (3, 4, 0, 2), 12),
        Benchmark("diffusor3_step", three_qubit_diffusor_step, (0, 2, 3, 4), 24),
        Benchmark("diffusor2_prefix", two_diffusor_prefix, (3, 4, 0, 2), 26),
        Benchmark("grover_iteration", grover_iteration, (0, 2, 3, 4), 32),
    )
}


def place_benchmark(name: str, marked: int) -> PlacedCircuit:
    b = BENCHMARKS[name]
    return transpile(b.build(marked), vigo_graph(), b.layout, ancillas=(ANCILLA,))


# -- distributions -------------------------------------------------------


def _marginal(probs: np.ndarray, n: int, qubits: Sequence[int]) -> np.ndarray:
    t = probs.reshape((2,) * n)
    rest = tuple(q for q in range(n) if q not in qubits)
    t = t.sum(axis=rest) if rest else t
    order = sorted(qubits)
    t = np.transpose(t, [order.index(q) for q in qubits])
    return t.reshape(-1)


def output_distribution(circuit: Circuit, qubits: Sequence[int] | None = None) -> np.ndarray:
    """Measurement distribution of ``qubits`` (default: all) starting from ``|0...0>``."""
    n = circuit.n_qubits
    psi = np.zeros(1 << n, dtype=complex)
    psi[0] = 1
    probs = np.abs(run_array(lower_mcz(circuit), psi, n)) ** 2
    return _marginal(probs, n, list(range(n)) if qubits is None else list(qubits))


def reindex(dist: np.ndarray, marked: int) -> np.ndarray:
    """``out[o] = dist[o xor marked]``."""
    idx = np.arange(dist.size)
    return np.asarray(dist)[idx ^ marked]


def theoretical_distribution(circuit: Circuit, marked: int,
                             data_qubits: Sequence[int] = tuple(range(N_DATA))) -> np.ndarray:
    return reindex(output_distribution(circuit, data_qubits), marked)


# -- noise ---------------------------------------------------------------


@dataclass(frozen=True)
class NoiseModel:
    """Two-qubit gate fidelity ``f``, per-shot survival ``a`` and readout flips.

    ``readout`` is ``(p(read 1 | 0), p(read 0 | 1))`` applied to every qubit.
    """

    f: float = 1.0
    a: float = 1.0
    readout: tuple[float, float] | None = None

    def __post_init__(self):
        vals = [self.f, self.a] + list(self.readout or ())
        if any(not 0 <= v <= 1 for v in vals):
            raise ValidationError("noise parameters must lie in [0, 1]")

    @classmethod
    def parse(cls, text: str) -> "NoiseModel":
        kw: dict = {}
        for part in filter(None, (p.strip() for p in text.split(","))):
            key, _, val = part.partition("=")
            if key in ("f", "a"):
                kw[key] = float(val)
            elif key in ("r", "readout"):
                e = float(val)
                kw["readout"] = (e, e)
            else:
                raise ValidationError(f"unknown noise key {key!r}")
        return cls(**kw)


@dataclass(frozen=True)
class CountsHistogram:
    counts: np.ndarray
    shots: int
    oracle_id: int | None = None

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64).reshape(-1)
        if np.any(c < 0) or int(c.sum()) != self.shots:
            raise ValidationError("counts must be nonnegative and sum to shots")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def n(self) -> int:
        return int(self.counts.size).bit_length() - 1

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.shots


_PAULI = {
    1: (x,),
    2: (lambda q: u3(q, math.pi, math.pi / 2, math.pi / 2),),  # Y
    3: (z,),
}


def _pauli_gates(code: int, qubits: tuple[int, int]) -> list[Gate]:
    out = []
    for p, q in zip((code >> 2, code & 3), qubits):
        if p:
            out.append(_PAULI[p][0](q))
    return out


def run_noisy(circuit: Circuit, marked: int | None, shots: int, noise: NoiseModel,
              rng: np.random.Generator, measured: Sequence[int] | None = None) -> CountsHistogram:
    """Sample ``shots`` measurements of ``measured`` under Pauli-trajectory noise.

    After each two-qubit gate a uniformly random non-identity two-qubit Pauli
    hits its operands with probability ``1 - f``.  Each shot independently
    survives with probability ``a``; a failed shot returns a uniform outcome.
    Trajectories sharing an error pattern share one simulation.
    """
    circuit = lower_mcz(circuit)
    n = circuit.n_qubits
    meas = list(range(n)) if measured is None else list(measured)
    nm = len(meas)
    gates = circuit.gates
    two_pos = [i for i, g in enumerate(gates) if g.arity == 2]
    errs = rng.random((shots, len(two_pos))) < 1 - noise.f
    codes = rng.integers(1, 16, size=(shots, len(two_pos)))

    psi0 = np.zeros(1 << n, dtype=complex)
    psi0[0] = 1
    # noiseless prefix states, so a trajectory restarts at its first error
    prefix = {}
    psi = psi0
    for i, g in enumerate(gates):
        psi = run_array((g,), psi, n)
        prefix[i] = psi
    clean = _marginal(np.abs(psi) ** 2, n, meas)

    groups: dict[tuple, list[int]] = {}
    for s in range(shots):
        hit = np.nonzero(errs[s])[0]
        key = tuple((int(two_pos[j]), int(codes[s, j])) for j in hit)
        groups.setdefault(key, []).append(s)
    outcomes = np.empty(shots, dtype=np.int64)
    for key, members in sorted(groups.items()):
        if not key:
            probs = clean
        else:
            inserts = dict(key)
            start = key[0][0]
            psi = prefix[start]
            for i in range(start, len(gates)):
                if i > start:
                    psi = run_array((gates[i],), psi, n)
                if i in inserts:
                    psi = run_array(_pauli_gates(inserts[i], gates[i].qubits), psi, n)
            probs = _marginal(np.abs(psi) ** 2, n, meas)
        probs = probs / probs.sum()
        outcomes[members] = rng.choice(1 << nm, size=len(members), p=probs)

    lost = rng.random(shots) >= noise.a
    outcomes[lost] = rng.integers(0, 1 << nm, size=int(lost.sum()))
    if noise.readout is not None:
        p01, p10 = noise.readout
        bits = (outcomes[:, None] >> np.arange(nm - 1, -1, -1)) & 1
        u = rng.random(bits.shape)
        flip = np.where(bits == 0, u < p01, u < p10)
        bits ^= flip
        outcomes = bits @ (1 << np.arange(nm - 1, -1, -1))
    counts = np.bincount(outcomes, minlength=1 << nm)
    return CountsHistogram(counts, shots, marked)


def offset_aggregate(histograms: Sequence[CountsHistogram]) -> CountsHistogram:
    if not histograms:
        raise ValidationError("nothing to aggregate")
    size = histograms[0].counts.size
    total = np.zeros(size, dtype=np.int64)
    for hist in histograms:
        if hist.counts.size != size:
            raise ValidationError("histograms of different sizes")
        total += reindex(hist.counts, hist.oracle_id or 0)
    return CountsHistogram(total, int(sum(hh.shots for hh in histograms)))


def success_ratio_R(measured: CountsHistogram, theoretical: np.ndarray) -> float:
    if measured.shots <= 0:
        raise ValidationError("no shots")
    if theoretical[0] == 0:
        raise DegenerateError("theoretical offset-0 probability is zero")
    return float(measured.counts[0] / measured.shots / theoretical[0])


def fidelity_model(x_count: float, a: float, f: float) -> float:
    return 1 / 16 + 15 / 16 * a * f ** x_count


def wilson_interval(count: int, shots: int, z_score: float = 3.0) -> tuple[float, float]:
    if shots <= 0:
        raise ValidationError("no shots")
    p = count / shots
    den = 1 + z_score ** 2 / shots
    mid = (p + z_score ** 2 / (2 * shots)) / den
    half = z_score * math.sqrt(p * (1 - p) / shots + z_score ** 2 / (4 * shots ** 2)) / den
    return max(0.0, mid - half), min(1.0, mid + half)


# -- logistic fit --------------------------------------------------------


@dataclass(frozen=True)
class LogisticFit:
    c0: float
    c1: float
    s: float
    b: float
    residual_rms: float
    nfev: int

    @property
    def params(self) -> tuple[float, float, float, float]:
        return (self.c0, self.c1, self.s, self.b)

    def __call__(self, xv):
        return logistic(np.asarray(xv, dtype=float), *self.params)


def logistic(xv, c0, c1, s, b):
    return c0 + c1 / (1 + np.exp(s * xv - b))


def logistic_fit(points: Iterable[tuple[float, float]], sigma: Sequence[float] | None = None,
                 p0: Sequence[float] | None = None, max_nfev: int = 1000) -> LogisticFit:
    """Levenberg-Marquardt fit of ``c0 + c1 / (1 + exp(s x - b))``.

    Default start ``(0.06, 0.8, 0.3, 0.3 * median x)``; optional ``sigma``
    weights residuals by ``1 / sigma``.
    """
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 4:
        raise ValidationError("need at least four (x, R) points")
    xs, ys = pts[:, 0], pts[:, 1]
    if np.ptp(ys) == 0:
        raise DegenerateError("constant data: logistic parameters are not identifiable")
    w = np.ones_like(ys) if sigma is None else 1 / np.asarray(sigma, dtype=float)
    start = np.array(p0 if p0 is not None else (0.06, 0.8, 0.3, 0.3 * float(np.median(xs))))
    res = least_squares(lambda p: (logistic(xs, *p) - ys) * w, start, method="lm",
                        max_nfev=max_nfev)
    rms = float(np.sqrt(np.mean((logistic(xs, *res.x) - ys) ** 2)))
    if not res.success:
        raise FitError(f"logistic fit did not converge: {res.message}", residual=rms)
    return LogisticFit(*map(float, res.x), residual_rms=rms, nfev=int(res.nfev))


# -- readout correction -------------------------------------------------


@dataclass(frozen=True)
class CorrectionMatrix:
    """Column ``j``: measured distribution when pattern ``j`` is the true outcome."""

    M: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.M, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError("correction matrix must be square")
        if np.any(m < -1e-12) or np.max(np.abs(m.sum(axis=0) - 1)) > 1e-9:
            raise ValidationError("columns must be probability vectors")
        m.setflags(write=False)
        object.__setattr__(self, "M", m)


def correction_matrix(calibration: Sequence[CountsHistogram]) -> CorrectionMatrix:
    size = len(calibration)
    if any(hh.counts.size != size for hh in calibration):
        raise ValidationError("need one calibration histogram per pattern")
    return CorrectionMatrix(np.stack([hh.frequencies for hh in calibration], axis=1))


def bitflip_confusion(n: int, p01: float, p10: float | None = None) -> CorrectionMatrix:
    """Independent per-qubit confusion ``[[1-p01, p10], [p01, 1-p10]]``."""
    p10 = p01 if p10 is None else p10
    one = np.array([[1 - p01, p10], [p01, 1 - p10]])
    m = np.ones((1, 1))
    for _ in range(n):
        m = np.kron(m, one)
    return CorrectionMatrix(m)


def apply_correction(cm: CorrectionMatrix, measured: np.ndarray | CountsHistogram,
                     cond_limit: float = 1e8) -> np.ndarray:
    """Solve ``M p = measured`` with ``p >= 0``; clip and renormalize."""
    vec = measured.frequencies if isinstance(measured, CountsHistogram) else np.asarray(measured, float)
    vec = vec / vec.sum()
    cond = np.linalg.cond(cm.M)
    if not np.isfinite(cond) or cond > cond_limit:
        warnings.warn(f"correction matrix is ill-conditioned (cond={cond:.3g}); "
                      "using the pseudo-inverse", RuntimeWarning, stacklevel=2)
        p = np.linalg.pinv(cm.M) @ vec
    else:
        p, _ = nnls(cm.M, vec)
    p = np.clip(p, 0.0, 1.0)
    total = p.sum()
    if total == 0:
        raise DegenerateError("corrected distribution vanished")
    return p / total


# -- figure bundle ---------------------------------------------------------

REFERENCE_LOGISTIC = (0.16969, 0.498, 0.3617, 10.459)
REFERENCE_POINTS = ((12, 0.748), (24, 0.627), (26, 0.465), (28, 0.444),
                    (32, 0.2624), (38, 0.1895), (62, 0.1735))


@dataclass
class FigureBundle:
    circuits: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)


def run_all_oracles(name: str, shots: int, noise: NoiseModel, seed: int
                    ) -> tuple[list[CountsHistogram], np.ndarray, int]:
    """Noisy runs of a benchmark for all 16 marked elements.

    Each oracle gets its own child generator of ``seed``.
    """
    children = np.random.SeedSequence(seed).spawn(1 << N_DATA)
    hists = []
    theory = None
    cnots = 0
    for m in range(1 << N_DATA):
        placed = place_benchmark(name, m)
        data = placed.layout[:N_DATA]
        cnots = max(cnots, placed.cnot_count)
        th = theoretical_distribution(placed.circuit, m, data)
        theory = th if theory is None else theory
        hists.append(run_noisy(placed.circuit, m, shots, noise,
                               np.random.default_rng(children[m]), data))
    return hists, theory, cnots


def reproduce_figures(out_dir: str | Path, seed: int = 0, shots: int = 1024,
                      noise: NoiseModel = NoiseModel(f=0.97, a=0.94)) -> FigureBundle:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle = FigureBundle()
    for i, name in enumerate(BENCHMARKS):
        hists, theory, cnots = run_all_oracles(name, shots, noise, seed + i)
        agg = offset_aggregate(hists)
        expected = theory * agg.shots
        r = success_ratio_R(agg, theory)
        rows = []
        for o in range(theory.size):
            lo, hi = wilson_interval(int(agg.counts[o]), agg.shots)
            rows.append({"offset": o, "count": int(agg.counts[o]),
                         "expected": float(expected[o]), "noiseless_per_shots": float(theory[o] * shots),
                         "wilson_lo": lo * agg.shots, "wilson_hi": hi * agg.shots})
        with open(out / f"{name}.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
        bundle.circuits[name] = {
            "cnot_count": cnots,
            "theory": theory.tolist(),
            "counts": agg.counts.tolist(),
            "shots": agg.shots,
            "R": r,
            "model_R": fidelity_model(cnots, noise.a, noise.f),
        }
    grid = np.arange(0, 71, dtype=float)
    refit = logistic_fit(REFERENCE_POINTS)
    bundle.curves = {
        "x": grid.tolist(),
        "fidelity_model": [fidelity_model(v, 0.94, 0.97) for v in grid],
        "logistic_reference": logistic(grid, *REFERENCE_LOGISTIC).tolist(),
        "logistic_refit": refit(grid).tolist(),
        "refit_params": list(refit.params),
    }
    with open(out / "curves.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "fidelity_model", "logistic_reference", "logistic_refit"])
        for row in zip(grid, bundle.curves["fidelity_model"], bundle.curves["logistic_reference"],
                       bundle.curves["logistic_refit"]):
            w.writerow([f"{v:.6g}" for v in row])
    with open(out / "report.json", "w") as fh:
        json.dump({"circuits": bundle.circuits, "curves": bundle.curves,
                   "noise": {"f": noise.f, "a": noise.a}, "shots_per_oracle": shots,
                   "seed": seed}, fh, indent=2)
    return bundle
