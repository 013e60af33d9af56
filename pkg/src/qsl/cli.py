"""Command-line interface: ``qsl <group> <command> [options]``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from qsl.circuit import Circuit, Gate, PhaseOracle, from_bits, gate_counts, to_bits
from qsl.errors import QslError, ValidationError


def _default_seed() -> int:
    return int(os.environ.get("QSL_SEED", "0"))


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _emit(obj, out: str | None = None) -> None:
    text = json.dumps(obj, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _load_circuit(path: str) -> Circuit:
    return Circuit.from_json(Path(path).read_text())


# -- tree ---------------------------------------------------------------


def cmd_tree_build(args) -> None:
    from qsl.tree import DiffusionSchedule, build_D

    sched = DiffusionSchedule.parse(args.schedule)
    oracle = PhaseOracle.from_bitstrings([args.marked])
    if oracle.n_qubits != sched.n:
        raise ValidationError(f"marked string has {oracle.n_qubits} bits, schedule needs {sched.n}")
    level = sched.m if args.level is None else args.level
    circ = build_D(level, sched, oracle)
    _emit(circ.to_dict(), args.out)
    if args.out:
        print(json.dumps({"gates": len(circ), "oracle_calls": circ.oracle_calls}))


def cmd_tree_beta(args) -> None:
    from qsl.tree import DiffusionSchedule, amplification_plan, beta_recurrence

    trace = beta_recurrence(DiffusionSchedule.parse(args.schedule))
    plan = amplification_plan(trace)
    out = trace.to_dict()
    out.update(iterations=plan.iterations, theta=plan.theta,
               predicted_success=plan.predicted_success)
    _emit(out)


def cmd_tree_search(args) -> None:
    from qsl.tree import DiffusionSchedule, schedule_from_epsilon, single_point

    oracle = PhaseOracle.from_bitstrings([args.marked])
    n = args.n or oracle.n_qubits
    if n != oracle.n_qubits:
        raise ValidationError("--n differs from the marked string length")
    sched = (DiffusionSchedule.parse(args.schedule) if args.schedule
             else schedule_from_epsilon(args.epsilon, n))
    res = single_point(oracle, sched)
    _emit({"schedule": list(sched.k), "element": res.element, "probability": res.success_prob,
           "oracle_calls": res.oracle_calls, "iterations": res.plan.iterations})


# -- uncompute ------------------------------------------------------------


def _parse_generic_schedule(text: str):
    from qsl.tree import DiffusionSchedule
    from qsl.uncompute import GenericOracleSchedule, wm_schedule

    kind, _, body = text.partition(":")
    if kind == "wm":
        k = DiffusionSchedule.parse(body)
        return wm_schedule(k.m, k)
    if kind == "sets":
        return GenericOracleSchedule.with_diffusors([_ints(s) for s in body.split("/")])
    raise ValidationError(f"schedule must be wm:<k,..> or sets:<q,..>/<q,..>, got {text!r}")


def _load_decomposition(args):
    from qsl.uncompute import CNF, decompose, ksat_oracle

    if args.cnf:
        return ksat_oracle(CNF.from_dimacs(Path(args.cnf).read_text()))
    if not (args.circuit and args.split):
        raise ValidationError("give --cnf, or --circuit with --split")
    sched = _parse_generic_schedule(args.schedule)
    n_data = args.n_data or max((q for s in sched.d for q in s), default=-1) + 1
    return decompose(_load_circuit(args.circuit), tuple(_ints(args.split)), n_data)


def cmd_uncompute_rewrite(args) -> None:
    from qsl.uncompute import gate_count_stats, rewrite_partial_uncompute

    dec = _load_decomposition(args)
    sched = _parse_generic_schedule(args.schedule)
    circ = rewrite_partial_uncompute(sched, dec)
    _emit(circ.to_dict(), args.out)
    if args.out:
        print(json.dumps(gate_count_stats(sched, dec, circ)))


def cmd_uncompute_stats(args) -> None:
    from qsl.uncompute import gate_count_stats

    _emit(gate_count_stats(_parse_generic_schedule(args.schedule), _load_decomposition(args)))


# -- multipoint -------------------------------------------------------------


def cmd_multipoint_run(args) -> None:
    from qsl.multipoint import multipoint_amplified, multipoint_unknown

    lines = Path(args.marked_file).read_text().split()
    oracle = PhaseOracle.from_bitstrings(lines, args.n)
    seeds = np.random.SeedSequence(args.seed).spawn(args.trials)
    found = queries = gates = 0
    for ss in seeds:
        rng = np.random.default_rng(ss)
        if args.k is not None:
            res = multipoint_amplified(oracle, args.n, args.k, args.p, rng)
        else:
            res = multipoint_unknown(oracle, args.n, args.p, rng)
        if res.found and res.element not in oracle.marked:  # pragma: no cover
            raise AssertionError("unverified element returned")
        found += res.found
        queries += res.queries
        gates += res.gates
    t = args.trials
    _emit({"success_rate": found / t, "mean_queries": queries / t, "mean_gates": gates / t,
           "trials": t, "n": args.n, "marked": len(oracle.marked)})


# -- topology ---------------------------------------------------------------


def _load_graph(spec: str):
    from qsl.topology import CouplingGraph, named_graph

    p = Path(spec)
    return CouplingGraph.from_json(p.read_text()) if p.exists() else named_graph(spec)


def cmd_topo_transpile(args) -> None:
    from qsl.topology import transpile, verify_placement

    circ = _load_circuit(args.circuit)
    placed = transpile(circ, _load_graph(args.graph), _ints(args.layout),
                       ancillas=_ints(args.ancillas or ""), use_margolus=not args.no_margolus)
    report = dict(placed.report)
    report["layout"] = list(placed.layout)
    report["exact"] = placed.exact
    if circ.n_qubits <= 10:
        report["max_deviation"] = verify_placement(circ, placed, _ints(args.ancillas or ""))
    if args.out:
        Path(args.out).write_text(json.dumps(placed.to_dict(), indent=2) + "\n")
    else:
        report["circuit"] = placed.circuit.to_dict()
    _emit(report)


# -- bench -----------------------------------------------------------------


def _with_marked(circ: Circuit, m: int) -> Circuit:
    return Circuit(circ.n_qubits, tuple(
        Gate("ORACLE", g.qubits, (), frozenset({m})) if g.kind == "ORACLE" else g for g in circ))


def cmd_bench_run(args) -> None:
    from qsl.bench import (NoiseModel, offset_aggregate, run_noisy, success_ratio_R,
                           theoretical_distribution)

    circ = _load_circuit(args.circuit)
    noise = NoiseModel.parse(args.noise)
    oracles = [g for g in circ if g.kind == "ORACLE"]
    if args.measure:
        measured = _ints(args.measure)
    elif oracles:
        measured = list(oracles[0].qubits)
    else:
        measured = list(range(circ.n_qubits))
    nm = len(measured)
    if args.all_oracles:
        if not oracles:
            raise ValidationError("--all-oracles needs ORACLE gates to re-mark")
        marks = list(range(1 << nm))
        circuits = [_with_marked(circ, m) for m in marks]
    else:
        if args.marked is not None:
            m = from_bits(args.marked)
        elif oracles and len(oracles[0].marked) == 1:
            m = next(iter(oracles[0].marked))
        else:
            m = 0
        marks, circuits = [m], [circ]
    children = np.random.SeedSequence(args.seed).spawn(len(marks))
    hists, theory = [], None
    for m, c, ss in zip(marks, circuits, children):
        hists.append(run_noisy(c, m, args.shots, noise, np.random.default_rng(ss), measured))
        th = theoretical_distribution(c, m, measured)
        theory = th if theory is None else theory + th
    theory = theory / len(marks)
    agg = offset_aggregate(hists)
    rows = ["offset,count,expected"] + [
        f"{o},{int(agg.counts[o])},{theory[o] * agg.shots:.6f}" for o in range(1 << nm)]
    report = {"shots": agg.shots, "oracles": len(marks), "counts": agg.counts.tolist(),
              "expected": (theory * agg.shots).tolist(),
              "two_qubit_gates": gate_counts(circ)["cx_equivalent"],
              "R": success_ratio_R(agg, theory) if theory[0] > 0 else None}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "counts.csv").write_text("\n".join(rows) + "\n")
        (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
        _emit(report)
    else:
        print("\n".join(rows))
        print(json.dumps(report), file=sys.stderr)


def cmd_bench_figures(args) -> None:
    from qsl.bench import NoiseModel, reproduce_figures

    bundle = reproduce_figures(args.out, seed=args.seed, shots=args.shots,
                               noise=NoiseModel.parse(args.noise))
    _emit({name: {k: v for k, v in d.items() if k in ("cnot_count", "R", "model_R")}
           for name, d in bundle.circuits.items()})


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qsl", description=__doc__)
    groups = p.add_subparsers(dest="group", required=True)

    tree = groups.add_parser("tree", help="tree-search circuits").add_subparsers(dest="cmd", required=True)
    sp = tree.add_parser("build", help="write the D_j circuit as JSON")
    sp.add_argument("--schedule", required=True)
    sp.add_argument("--marked", required=True)
    sp.add_argument("--level", type=int)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_tree_build)
    sp = tree.add_parser("beta", help="amplitude recurrence for a schedule")
    sp.add_argument("--schedule", required=True)
    sp.set_defaults(func=cmd_tree_beta)
    sp = tree.add_parser("search", help="simulate single-element search")
    sp.add_argument("--n", type=int)
    sp.add_argument("--marked", required=True)
    sp.add_argument("--epsilon", type=float, default=0.5)
    sp.add_argument("--schedule")
    sp.set_defaults(func=cmd_tree_search)

    unc = groups.add_parser("uncompute", help="partial-uncompute rewriting").add_subparsers(dest="cmd", required=True)
    for name, func in (("rewrite", cmd_uncompute_rewrite), ("stats", cmd_uncompute_stats)):
        sp = unc.add_parser(name)
        sp.add_argument("--circuit", help="oracle circuit JSON (compute, phase, uncompute)")
        sp.add_argument("--split", help="compute_len,phase_len")
        sp.add_argument("--cnf", help="DIMACS instance instead of a circuit")
        sp.add_argument("--n-data", type=int)
        sp.add_argument("--schedule", required=True, help="wm:k1,k2,.. or sets:0,1/2,3")
        if name == "rewrite":
            sp.add_argument("--out")
        sp.set_defaults(func=func)

    mp = groups.add_parser("multipoint", help="multi-target search").add_subparsers(dest="cmd", required=True)
    sp = mp.add_parser("run")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--marked-file", required=True)
    sp.add_argument("--p", type=float, default=0.5)
    sp.add_argument("--k", type=int, help="known k; omit to search without it")
    sp.add_argument("--seed", type=int, default=_default_seed())
    sp.add_argument("--trials", type=int, default=100)
    sp.set_defaults(func=cmd_multipoint_run)

    topo = groups.add_parser("topo", help="coupling-graph placement").add_subparsers(dest="cmd", required=True)
    sp = topo.add_parser("transpile")
    sp.add_argument("--circuit", required=True)
    sp.add_argument("--graph", default="vigo", help="'vigo', 'lineN' or a graph JSON file")
    sp.add_argument("--layout", required=True)
    sp.add_argument("--ancillas", help="logical qubits starting in |0>")
    sp.add_argument("--no-margolus", action="store_true")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_topo_transpile)

    bench = groups.add_parser("bench", help="noisy benchmarks and figures").add_subparsers(dest="cmd", required=True)
    sp = bench.add_parser("run")
    sp.add_argument("--circuit", required=True)
    sp.add_argument("--shots", type=int, default=1024)
    sp.add_argument("--noise", default="f=0.97,a=0.94")
    sp.add_argument("--seed", type=int, default=_default_seed())
    sp.add_argument("--all-oracles", action="store_true")
    sp.add_argument("--marked")
    sp.add_argument("--measure", help="qubits to measure (default: oracle operands)")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_bench_run)
    sp = bench.add_parser("figures")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=_default_seed())
    sp.add_argument("--shots", type=int, default=1024)
    sp.add_argument("--noise", default="f=0.97,a=0.94")
    sp.set_defaults(func=cmd_bench_figures)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (QslError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"qsl: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
