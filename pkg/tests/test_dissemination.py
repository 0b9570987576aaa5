import numpy as np
import pytest

from subspacenc.dissemination import (
    INF,
    AlgebraicOracle,
    CoefficientLogMissing,
    NeverSatisfied,
    RunConfig,
    SnapshotSet,
    WaitingPolicy,
    containment_chain_holds,
    minimal_sufficient_n,
    n_is_sufficient,
    run,
    snapshot,
    steady_state,
    waiting_time_realized,
)
from subspacenc.finite_field import field_new, make_rng
from subspacenc.network import build, example_tree, line, longest_path, random_dag, random_tree
from subspacenc.subspace import is_subspace_of, rref, sum_spaces

GF256 = field_new(256)


def tree_ids(net):
    return [net.node_id(x) for x in "SABC"]


def test_single_edge_dimension_grows_by_one():
    tr = run(RunConfig(line(2), 3, horizon=10, seed=0))
    assert [int(tr.dims[t, 1]) for t in range(tr.t_end + 1)] == [min(t, 3) for t in range(tr.t_end + 1)]
    assert tr.completed


@pytest.mark.parametrize("seed", range(10))
def test_example_tree_children_are_distinct_lines_in_parent(seed):
    net = example_tree()
    S, A, B, C = tree_ids(net)
    tr = run(RunConfig(net, 4, horizon=20, seed=seed))
    assert tr.tau[A] == 2
    pb, pc, pa = tr.space(B, 3), tr.space(C, 3), tr.space(A, 2)
    assert pb.dim == pc.dim == 1
    assert pb <= pa and pc <= pa
    assert pb != pc


def test_no_waiting_makes_siblings_identical():
    net = example_tree()
    S, A, B, C = tree_ids(net)
    for seed in range(5):
        tr = run(RunConfig(net, 4, horizon=20, seed=seed, waiting_policy="none"))
        for t in range(2, tr.t_end + 1):
            assert tr.space(B, t) == tr.space(C, t)


def test_waiting_times_follow_partial_order():
    tr = run(RunConfig(line(3), 8, horizon=30, seed=2))
    assert waiting_time_realized(tr, 0) == 0
    assert waiting_time_realized(tr, 1) == 2
    assert tr.tau[1] < tr.tau[2]


def test_never_satisfied_when_horizon_too_short():
    tr = run(RunConfig(line(4), 8, horizon=2, seed=0))
    assert not tr.completed
    with pytest.raises(NeverSatisfied):
        waiting_time_realized(tr, 3)


def test_policy_parsing():
    assert WaitingPolicy.parse("fixed_dimension:3") == WaitingPolicy("fixed_dimension", 3)
    assert WaitingPolicy.parse({"kind": "none"}).kind == "none"
    with pytest.raises(ValueError):
        WaitingPolicy("sometimes")


def test_determinism_and_seed_sensitivity():
    net = random_dag(8, 0.4, make_rng(1), max_rate=2)
    a = run(RunConfig(net, 10, horizon=60, seed=7))
    b = run(RunConfig(net, 10, horizon=60, seed=7))
    c = run(RunConfig(net, 10, horizon=60, seed=8))
    assert np.array_equal(a.dims, b.dims)
    assert all(a.space(v, 5) == b.space(v, 5) for v in range(net.size))
    assert any(a.space(v, 5) != c.space(v, 5) for v in range(1, net.size) if a.space(v, 5).dim)


@pytest.mark.parametrize("seed", range(6))
def test_trace_invariants(seed):
    rng = make_rng(seed)
    net = random_dag(int(rng.integers(3, 9)), 0.4, rng, max_rate=2)
    n = minimal_sufficient_n(net)
    tr = run(RunConfig(net, n, horizon=n + 40, seed=seed))
    for t in range(1, tr.t_end + 1):
        for v in range(net.size):
            assert tr.space(v, t - 1) <= tr.space(v, t)
            if v != net.source:
                branches = [tr.edge_space(net.edge_index[e.key], t) for e in net.in_edges[v]]
                total = branches[0]
                for b in branches[1:]:
                    total = sum_spaces(total, b)
                assert total == tr.space(v, t)
        for ei, rows in tr.received[t].items():
            tail = net.edges[ei].tail
            assert rref(GF256, rows, tr.ambient) <= tr.space(tail, t - 1)
    assert tr.completed


def test_source_stops_after_its_slots():
    net = build(3, 0, [(0, 1, 2), (1, 2, 2)])
    tr = run(RunConfig(net, 5, horizon=40, seed=0, stop_when_complete=False))
    cfg = tr.config
    assert cfg.source_slots == 3
    assert all(not tr.received[t] or 0 not in tr.received[t] for t in range(cfg.source_slots + 1, tr.t_end + 1))


@pytest.mark.parametrize("seed", range(12))
def test_algebraic_replay_matches_simulator(seed):
    rng = make_rng(100 + seed)
    net = random_dag(int(rng.integers(2, 9)), 0.4, rng, max_rate=2)
    n = int(rng.integers(2, 8))
    tr = run(RunConfig(net, n, horizon=n + 20, seed=seed, record_coefficients=True))
    oracle = AlgebraicOracle(tr)
    for t in range(1, tr.t_end + 1):
        for v in range(net.size):
            if v == net.source:
                continue
            assert np.array_equal(oracle.transfer(v, t), tr.received_at(v, t))


def test_replay_requires_coefficients():
    tr = run(RunConfig(line(2), 2, horizon=5))
    with pytest.raises(CoefficientLogMissing):
        AlgebraicOracle(tr)


def test_line_steady_state_bound():
    tr = run(RunConfig(line(3), 10, horizon=40, seed=0))
    ss = steady_state(tr)
    assert ss.T_s <= 2 * longest_path(tr.net) - 1


def test_tree_steady_state_innovation_rate():
    exact = total = 0
    for seed in range(30):
        tr = run(RunConfig(example_tree(), 20, horizon=60, seed=seed))
        ss = steady_state(tr)
        exact += ss.exact_node_slots
        total += ss.total_node_slots
    assert exact / total >= 0.99


def test_small_n_flags_rather_than_raises():
    net = line(5)
    assert not n_is_sufficient(net, 3)
    ss = steady_state(run(RunConfig(net, 3, horizon=40, seed=0)))
    assert ss.T_s == INF or ss.T_s >= 0


def test_minimal_sufficient_n():
    net = line(4)
    n = minimal_sufficient_n(net)
    assert n_is_sufficient(net, n) and not n_is_sufficient(net, n - 1)


@pytest.mark.parametrize("seed", range(5))
def test_containment_chain_on_trees(seed):
    rng = make_rng(seed)
    net = random_tree(3, 3, rng)
    tr = run(RunConfig(net, 12, horizon=40, seed=seed))
    for t in range(tr.t_end + 1):
        assert containment_chain_holds(tr, t)


def test_snapshot_round_trips():
    tr = run(RunConfig(example_tree(), 6, horizon=20, seed=3))
    snap = snapshot(tr, 3)
    assert SnapshotSet.from_dict(snap.to_dict()) == snap
    assert SnapshotSet.from_bytes(snap.to_bytes()) == snap
    assert snap.dims == [6, 3, 1, 1]
