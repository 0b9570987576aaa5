"""Command-line front end.

Every subcommand accepts ``--config``, ``--seed``, ``--out``, ``--trials``,
``--q`` and ``--parallel``.  Trial i of a sweep uses the seed derived from
``SeedSequence([master_seed, i])``, so any trial can be rerun on its own
with ``trial_seed``.  Exit status: 0 success, 1 invalid input, 2 an
experiment check failed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Optional, Sequence

import numpy as np

from . import byzantine as byz
from . import inference as inf
from . import lemmas
from . import network as netmod
from . import p2p
from .dissemination import (
    INF,
    DisseminationError,
    RunConfig,
    WaitingPolicy,
    minimal_sufficient_n,
    run,
    snapshot,
    steady_state,
)
from .finite_field import field_new, make_rng
from .report import IoFailure, write_json, write_report

EXIT_OK, EXIT_INVALID, EXIT_CHECK = 0, 1, 2


class BadConfig(ValueError):
    pass


def trial_seed(master: int, i: int) -> int:
    """Seed of trial ``i`` under master seed ``master``."""
    return int(np.random.SeedSequence([master, i]).generate_state(1, dtype=np.uint32)[0])


def _map(fn: Callable, items: Sequence, parallel: int) -> list:
    if parallel > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    if not os.path.exists(path):
        raise BadConfig(f"config file {path} does not exist")
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise BadConfig(f"config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise BadConfig("config must be a JSON object")
    return data


EXAMPLES = {
    "six_node": netmod.six_node_example,
    "diamond": netmod.diamond,
    "example_tree": netmod.example_tree,
    "rate_counterexample": netmod.rate_counterexample,
}


def _network_from(spec, rng: Optional[np.random.Generator] = None) -> netmod.Network:
    """A network from a file path, an inline dict, an example name or a
    generator block such as {"generator": "random_dag", "size": 8}."""
    if isinstance(spec, netmod.Network):
        return spec
    if isinstance(spec, str):
        if spec in EXAMPLES:
            return EXAMPLES[spec]()
        if spec.startswith("line:"):
            return netmod.line(int(spec.split(":", 1)[1]))
        if not os.path.exists(spec):
            raise BadConfig(f"network file {spec} does not exist")
        return netmod.load(spec, check_rates=False)
    if isinstance(spec, dict) and "generator" in spec:
        rng = rng if rng is not None else make_rng(0)
        g = spec["generator"]
        if g == "random_dag":
            return netmod.random_dag(int(spec.get("size", 8)), float(spec.get("density", 0.4)), rng,
                                     max_rate=int(spec.get("max_rate", 1)))
        if g == "random_tree":
            return netmod.random_tree(int(spec.get("depth", 3)), int(spec.get("branching", 2)), rng)
        if g == "line":
            return netmod.line(int(spec.get("size", 4)))
        raise BadConfig(f"unknown generator {g!r}")
    if isinstance(spec, dict):
        return netmod.from_dict(spec, check_rates=False)
    raise BadConfig("no network given")


def _common(p: argparse.ArgumentParser, trials: int = 1, q: Optional[int] = 256) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--trials", type=int, default=trials, help="number of trials")
    p.add_argument("--q", type=int, default=q, help="field order")
    p.add_argument("--parallel", type=int, default=1, help="worker processes")


def _check_common(a) -> None:
    if a.trials < 1:
        raise BadConfig("--trials must be at least 1")
    if a.parallel < 1:
        raise BadConfig("--parallel must be at least 1")
    if a.q is not None:
        field_new(a.q)  # raises on a non prime power


# ---------------------------------------------------------------------------
# disseminate


def _disseminate_trial(job) -> dict:
    i, seed, netspec, n, q, horizon, policy = job
    net = _network_from(netspec, make_rng(seed))
    nn = n or minimal_sufficient_n(net)
    cfg = RunConfig(net, nn, field=field_new(q), horizon=horizon, waiting_policy=WaitingPolicy.parse(policy), seed=seed)
    tr = run(cfg)
    ss = steady_state(tr)
    D = netmod.longest_path(net)
    return {
        "trial": i,
        "seed": seed,
        "nodes": net.size,
        "D": D,
        "n": nn,
        "completed": tr.completed,
        "slots": tr.t_end,
        "T_s": ss.T_s,
        "T_s_rate": ss.T_s_rate,
        "bound_2D_minus_1": 2 * D - 1,
        "exact_fraction": ss.exact_fraction,
    }


def cmd_disseminate(a) -> int:
    cfg = _load_config(a.config)
    netspec = a.network or cfg.get("network")
    if netspec is None:
        raise BadConfig("disseminate needs --network or a 'network' entry in the config")
    n = a.n or cfg.get("n")
    horizon = a.horizon or cfg.get("horizon", 400)
    policy = a.policy or cfg.get("waiting_policy", "paper_default")
    WaitingPolicy.parse(policy)
    snaps = a.snapshot or cfg.get("snapshots", [])
    first = _network_from(netspec, make_rng(trial_seed(a.seed, 0)))  # validates before running
    jobs = [(i, trial_seed(a.seed, i), netspec, n, a.q, horizon, policy) for i in range(a.trials)]
    rows = _map(_disseminate_trial, jobs, a.parallel)
    cols = list(rows[0].keys())
    write_report(a.out, "disseminate", rows, cols, ["slots", "T_s", "T_s_rate", "exact_fraction"])
    if a.trials == 1:
        nn = n or minimal_sufficient_n(first)
        rc = RunConfig(first, nn, field=field_new(a.q), horizon=horizon, waiting_policy=WaitingPolicy.parse(policy), seed=jobs[0][1])
        tr = run(rc)
        dims_rows = [{"slot": t, **{f"d_{first.label(v)}": int(tr.dims[t, v]) for v in range(first.size)}} for t in range(tr.t_end + 1)]
        write_report(a.out, "dims", dims_rows, list(dims_rows[0].keys()))
        for t in snaps:
            s = snapshot(tr, int(t))
            write_json(a.out, f"snapshot_t{int(t)}.json", s.to_dict())
            with open(os.path.join(a.out, f"snapshot_t{int(t)}.snc"), "wb") as fh:
                fh.write(s.to_bytes())
    for r in rows:
        print(f"trial {r['trial']}: slots={r['slots']} T_s={r['T_s']} (2D-1={r['bound_2D_minus_1']}) exact_fraction={r['exact_fraction']:.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# infer-topology


def inference_schedule(net: netmod.Network) -> tuple:
    """(n, t): snapshot at t = 2D, inside the steady state, with enough
    source packets that no node completes before the second snapshot."""
    D = netmod.longest_path(net)
    return max(net.c_max, 1) * (2 * D + 4), 2 * D


def _infer_trial(job) -> dict:
    i, seed, netspec, mode, q = job
    rng = make_rng(seed)
    net = _network_from(netspec, rng)
    n, t = inference_schedule(net)
    tr = run(RunConfig(net, n, field=field_new(q), horizon=t + 2, seed=seed, stop_when_complete=False))
    row = {"trial": i, "seed": seed, "nodes": net.size, "mode": mode, "t": t, "n": n}
    try:
        if mode == "tree":
            est = inf.infer_tree(inf.tree_input(snapshot(tr, t)))
        else:
            est = inf.infer_general(snapshot(tr, t), snapshot(tr, t + 1))
        d = est.diff(net)
        row.update(status="ok" if est.all_unique else "ambiguous", exact_match=d["exact_match"],
                   missing=len(d["missing"]), extra=len(d["extra"]))
        row["_estimate"] = est.to_dict()
        row["_diff"] = d
    except inf.DistinctnessViolated as exc:
        row.update(status="distinctness_violated", exact_match=False, missing="", extra="")
        row["_diff"] = {"pairs": [list(p) for p in exc.pairs]}
    return row


def cmd_infer(a) -> int:
    cfg = _load_config(a.config)
    mode = a.mode or cfg.get("mode", "general")
    if mode not in ("tree", "general"):
        raise BadConfig("--mode must be tree or general")
    if a.generate:
        netspec = {"generator": "random_tree"} if a.generate == "tree" else {"generator": "random_dag", "size": 8, "max_rate": 2}
        netspec.update(cfg.get("generator_args", {}))
    else:
        netspec = a.network or a.ground_truth or cfg.get("network")
    if netspec is None:
        raise BadConfig("infer-topology needs --network, --ground-truth or --generate")
    _network_from(netspec, make_rng(trial_seed(a.seed, 0)))
    truth = _network_from(a.ground_truth) if a.ground_truth else None
    jobs = [(i, trial_seed(a.seed, i), netspec, mode, a.q) for i in range(a.trials)]
    rows = _map(_infer_trial, jobs, a.parallel)
    if truth is not None and not a.generate:
        for r in rows:
            if "_estimate" in r:
                est = _estimate_from_dict(r["_estimate"], truth.size)
                r["_diff"] = est.diff(truth)
                r["exact_match"] = r["_diff"]["exact_match"]
    cols = ["trial", "seed", "nodes", "mode", "t", "n", "status", "exact_match", "missing", "extra"]
    write_report(a.out, "infer_topology", rows, cols, ["exact_match"])
    if a.trials == 1:
        write_json(a.out, "estimate.json", rows[0].get("_estimate"))
        write_json(a.out, "diff.json", rows[0].get("_diff"))
    exact = sum(bool(r["exact_match"]) for r in rows)
    for r in rows:
        print(f"trial {r['trial']}: {'exact match' if r['exact_match'] else 'mismatch'} ({r['status']})")
    print(f"exact recovery: {exact}/{len(rows)}")
    if truth is not None or a.generate:
        return EXIT_OK if exact == len(rows) or a.allow_mismatch else EXIT_CHECK
    return EXIT_OK


def _estimate_from_dict(d: dict, size: int) -> inf.TopologyEstimate:
    est = inf.TopologyEstimate(size, d["source"])
    for u, bs in d["branches"].items():
        est.branches[int(u)] = [inf.BranchResult(b["parent"], b["status"], tuple(b["candidates"]), b["rate"]) for b in bs]
    return est


# ---------------------------------------------------------------------------
# locate-adversary

LYING = ("blame_one_incoming", "claim_clean", "corrupt_one_outgoing")


def _locate_trial(job) -> dict:
    i, seed, netspec, scenario, method, info, q = job
    rng = make_rng(seed)
    if scenario is None:
        # random single-attacker scenario, lying strategies in rotation
        cand = []
        while not cand:  # redraw until some node may attack
            net = netmod.random_dag(int(rng.integers(5, 16)), 0.35, rng, max_rate=2)
            recv = {v for v in range(net.size) if not net.out_edges[v]}
            cand = [v for v in range(net.size) if v != net.source and v not in recv]
        adv = byz.AdversaryConfig((byz.AttackerSpec(int(rng.choice(cand)), strategy=LYING[i % 3]),))
    else:
        net = _network_from(netspec, rng)
        adv = byz.AdversaryConfig.from_dict(scenario, net)
    method = method or ("single" if len(adv.attackers) == 1 else "multiple")
    D = netmod.longest_path(net)
    n = minimal_sufficient_n(net)
    tr = byz.run_with_adversary(RunConfig(net, n, field=field_new(q), horizon=n + 3 * D + 6, seed=seed, stop_when_complete=False), adv)
    PiS = tr.source_space()
    recv = adv.receivers_of(net)
    row = {"trial": i, "seed": seed, "nodes": net.size, "method": method,
           "attackers": " ".join(net.label(x.node) for x in adv.attackers)}
    try:
        if method == "subset":
            verdict = byz.locate_subset_method(net, byz.info1_reports(tr, method="subset"), PiS)
            split = None
        else:
            reports = byz.info1_reports(tr)
            if info == 2:
                reports = byz.info2_reports(reports, make_rng(np.random.SeedSequence([seed, 99])))
            split = byz.split_edges(net, reports, PiS, level="info2" if info == 2 else "info1")
            fn = byz.locate_single if method == "single" else byz.locate_multiple_splitting
            verdict = fn(net, split, recv)
    except byz.NoCorruptionObserved:
        verdict, split = byz.LocatorVerdict([]), None
    found = all(verdict.contains(x.node) or x.node in verdict.undetectable for x in adv.attackers)
    row.update(
        sets=" | ".join(",".join(sorted(net.label(v) for v in s.nodes)) + f"[{s.flag}]" for s in verdict.sets),
        undetectable=",".join(sorted(net.label(v) for v in verdict.undetectable)),
        max_set_size=max((len(s.nodes) for s in verdict.sets), default=0),
        attackers_covered=found,
    )
    row["_verdict"] = verdict.to_dict(net)
    row["_split"] = None if split is None else {
        "E_S": sorted([net.label(x), net.label(y)] for x, y in split.clean),
        "E_C": sorted([net.label(x), net.label(y)] for x, y in split.corrupted),
    }
    return row


def cmd_locate(a) -> int:
    cfg = _load_config(a.config)
    scenario = cfg.get("scenario")
    if a.scenario:
        scenario = _load_config(a.scenario)
    netspec = a.network or cfg.get("network")
    if scenario is not None:
        if netspec is None:
            raise BadConfig("a scenario needs --network")
        net = _network_from(netspec, make_rng(trial_seed(a.seed, 0)))
        byz.AdversaryConfig.from_dict(scenario, net).resolved(net)  # validate first
    method = a.method or cfg.get("method")
    if method not in (None, "single", "multiple", "subset"):
        raise BadConfig("--method must be single, multiple or subset")
    jobs = [(i, trial_seed(a.seed, i), netspec, scenario, method, a.info, a.q) for i in range(a.trials)]
    rows = _map(_locate_trial, jobs, a.parallel)
    cols = ["trial", "seed", "nodes", "method", "attackers", "sets", "undetectable", "max_set_size", "attackers_covered"]
    write_report(a.out, "locate_adversary", rows, cols, ["attackers_covered", "max_set_size"])
    if a.trials == 1:
        write_json(a.out, "verdict.json", {"verdict": rows[0]["_verdict"], "split": rows[0]["_split"]})
    for r in rows:
        print(f"trial {r['trial']}: attackers {r['attackers']} -> {r['sets'] or 'no corruption seen'}"
              + (f"; undetectable {r['undetectable']}" if r["undetectable"] else ""))
    covered = sum(bool(r["attackers_covered"]) for r in rows)
    print(f"attackers covered: {covered}/{len(rows)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# p2p-sim


def _p2p_trial(job) -> dict:
    size3, algo, seed, base = job
    m = p2p.table1_session(size3, algo, seed, p2p.SessionConfig.from_dict(base))
    return {
        "topology": f"15-15-{size3}",
        "size3": size3,
        "algo": algo,
        "seed": seed,
        "avg_collection_time": m.avg_collection_time,
        "total_rewirings": m.total_rewirings,
        "rounds": m.rounds,
    }


def table1_summary(rows: Sequence[dict]) -> list:
    out = []
    for size3 in sorted({r["size3"] for r in rows}):
        row = {"topology": f"15-15-{size3}"}
        for j, algo in enumerate(p2p.TABLE1_ALGOS):
            rs = [r for r in rows if r["size3"] == size3 and r["algo"] == algo]
            if not rs:
                continue
            row[f"{algo}_time"] = float(np.mean([r["avg_collection_time"] for r in rs]))
            row[f"{algo}_rewirings"] = float(np.mean([r["total_rewirings"] for r in rs]))
            if size3 in p2p.TABLE1_REFERENCE_TIME:
                row[f"{algo}_reference_time"] = p2p.TABLE1_REFERENCE_TIME[size3][j]
                row[f"{algo}_reference_rewirings"] = p2p.TABLE1_REFERENCE_REWIRINGS[size3][j]
        out.append(row)
    return out


def cmd_p2p(a) -> int:
    cfg = _load_config(a.config)
    base = {"n": a.n or cfg.get("n", 50), "q": a.q, "bottleneck_capacity": cfg.get("bottleneck_capacity", 1.0),
            "bottleneck_links": cfg.get("bottleneck_links", 2)}
    p2p.SessionConfig.from_dict(base)
    if a.table1 or not cfg.get("session"):
        sizes = [int(x) for x in (a.rows.split(",") if a.rows else cfg.get("rows", p2p.TABLE1_ROWS))]
        algos = a.algos.split(",") if a.algos else list(cfg.get("algos", p2p.TABLE1_ALGOS))
        for al in algos:
            p2p.AlgoConfig.named(al)
        jobs = [(s3, al, trial_seed(a.seed, i), base) for s3 in sizes for al in algos for i in range(a.trials)]
        rows = _map(_p2p_trial, jobs, a.parallel)
        cols = ["topology", "size3", "algo", "seed", "avg_collection_time", "total_rewirings", "rounds"]
        write_report(a.out, "p2p_sessions", rows, cols, ["avg_collection_time", "total_rewirings", "rounds"], ["topology", "algo"])
        summary = table1_summary(rows)
        scols = ["topology"] + [f"{al}_{k}" for al in algos for k in ("time", "reference_time", "rewirings", "reference_rewirings")]
        write_report(a.out, "table1", summary, scols)
        for r in summary:
            print(r["topology"], " ".join(f"{al}={r[f'{al}_time']:.2f}/{r[f'{al}_rewirings']:.1f}" for al in algos))
        return EXIT_OK
    sess = dict(cfg["session"])
    sess.setdefault("seed", a.seed)
    sess.setdefault("q", a.q)
    m = p2p.run_session(p2p.SessionConfig.from_dict(sess))
    write_json(a.out, "session.json", m.to_dict())
    print(f"avg collection time {m.avg_collection_time:.2f}, rewirings {m.total_rewirings}, rounds {m.rounds}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify-lemmas and cost-report


def cmd_verify(a) -> int:
    suites = a.suite.split(",")
    if any(s not in ("subspace", "steady") for s in suites):
        raise BadConfig("--suite takes subspace and/or steady")
    results = []
    if "subspace" in suites:
        results += lemmas.subspace_suites(a.q, a.trials, a.seed, a.tolerance)
    if "steady" in suites:
        results += lemmas.steady_state_suites(a.runs, a.steady_q, a.seed)
    rows = [r.to_row() for r in results]
    cols = ["check", "params", "trials", "hits", "frequency", "bound", "direction", "passed"]
    write_report(a.out, "verify_lemmas", rows, cols)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name} [{r.to_row()['params']}] "
              f"freq={r.frequency:.6f} {r.direction} {r.bound:.6f}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK


def cmd_cost(a) -> int:
    if a.network:
        net = _network_from(a.network)
        c_max, D, delta_in, nodes = net.c_max, netmod.longest_path(net), net.in_degree_max(), net.size
    else:
        c_max, D, delta_in, nodes = a.c_max, a.D, a.delta_in, a.nodes
    if min(c_max, D, delta_in) < 1 or a.beta2 <= 0:
        raise BadConfig("c_max, D and delta_in must be positive")
    n = a.n or int(math.ceil(2 * math.sqrt(a.beta2) * c_max * D))
    cost = inf.cost_formula(n, a.q, delta_in, nodes, a.beta2, c_max, D)
    row = {
        "q": a.q, "c_max": c_max, "beta2": a.beta2, "delta_in": delta_in, "D": D, "n": n, "nodes": nodes,
        "bits_per_node": cost.bits_per_node, "bytes_per_node": cost.bytes_per_node,
        "kilobytes_per_node": cost.kilobytes_per_node, "kibibytes_per_node": cost.kibibytes_per_node,
        "bits_total": cost.bits_total,
    }
    write_report(a.out, "cost_report", [row], list(row))
    print(f"per node: {cost.bits_per_node:.0f} bits = {cost.bytes_per_node:.0f} bytes = "
          f"{cost.kilobytes_per_node:.2f} kilobytes ({cost.kibibytes_per_node:.2f} KiB)")
    print(f"total for {nodes} nodes with n={n}: {cost.bits_total:.0f} bits")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="subspacenc", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("disseminate", help="run the dissemination protocol")
    _common(p)
    p.add_argument("--network", help="network JSON, example name or line:<k>")
    p.add_argument("--n", type=int, help="source packets (default: smallest sufficient n)")
    p.add_argument("--horizon", type=int)
    p.add_argument("--policy", help="paper_default | none | fixed_dimension:<w>")
    p.add_argument("--snapshot", type=int, action="append", help="export a snapshot at this slot")
    p.set_defaults(fn=cmd_disseminate)

    p = sub.add_parser("infer-topology", help="infer the network from collected subspaces")
    _common(p)
    p.add_argument("--mode", choices=["tree", "general"])
    p.add_argument("--network")
    p.add_argument("--ground-truth", help="network JSON to run on and compare against")
    p.add_argument("--generate", choices=["tree", "dag"], help="random network per trial")
    p.add_argument("--allow-mismatch", action="store_true", help="exit 0 even if some trial is not exact")
    p.set_defaults(fn=cmd_infer)

    p = sub.add_parser("locate-adversary", help="inject attackers and localize them")
    _common(p)
    p.add_argument("--network")
    p.add_argument("--scenario", help="adversary JSON {attackers:[{node, delta, edges, strategy}]}")
    p.add_argument("--method", choices=["single", "multiple", "subset"])
    p.add_argument("--info", type=int, choices=[1, 2], default=1)
    p.set_defaults(fn=cmd_locate)

    p = sub.add_parser("p2p-sim", help="P2P rewiring sessions and the --table1 sweep")
    _common(p, trials=20)
    p.add_argument("--table1", action="store_true")
    p.add_argument("--rows", help="comma separated cluster-3 sizes")
    p.add_argument("--algos", help="comma separated algorithms")
    p.add_argument("--n", type=int)
    p.set_defaults(fn=cmd_p2p)

    p = sub.add_parser("verify-lemmas", help="Monte-Carlo checks of the subspace lemmas")
    _common(p, trials=10_000, q=257)
    p.add_argument("--suite", default="subspace,steady")
    p.add_argument("--runs", type=int, default=50, help="random DAGs for the steady-state suite")
    p.add_argument("--steady-q", type=int, default=256)
    p.add_argument("--tolerance", type=float, default=5.0, help="constant c in the O(1/q) bounds")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("cost-report", help="communication cost of collecting subspaces")
    _common(p)
    p.add_argument("--network")
    p.add_argument("--c-max", type=int, default=1)
    p.add_argument("--beta2", type=float, default=5.0)
    p.add_argument("--delta-in", type=int, default=5)
    p.add_argument("--D", type=int, default=10)
    p.add_argument("--n", type=int)
    p.add_argument("--nodes", type=int, default=1)
    p.set_defaults(fn=cmd_cost)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    try:
        _check_common(a)
        return a.fn(a)
    except (BadConfig, netmod.NetworkError, byz.ByzantineError, p2p.P2PError, DisseminationError,
            inf.InferenceError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except IoFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
