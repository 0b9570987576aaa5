import networkx as nx
import numpy as np
import pytest

from subspacenc.byzantine import (
    AdversaryConfig,
    AttackerIsSourceOrReceiver,
    AttackerSpec,
    ByzantineError,
    InconsistentObservations,
    NoCorruptionObserved,
    corruption_oracle,
    info1_reports,
    info2_reports,
    locate_multiple_splitting,
    locate_single,
    locate_subset_method,
    receiver_only_candidates,
    run_with_adversary,
    shadow_set,
    split_edges,
)
from subspacenc.dissemination import RunConfig, minimal_sufficient_n, run
from subspacenc.finite_field import make_rng
from subspacenc.network import line, longest_path, random_dag, six_node_example

NET = six_node_example()
ix = NET.node_id


def E(a, b):
    return (ix(a), ix(b))


def attack(net, specs, seed=0, n=None):
    D = longest_path(net)
    n = n or minimal_sufficient_n(net)
    cfg = RunConfig(net, n, horizon=n + 3 * D + 6, seed=seed, stop_when_complete=False)
    adv = AdversaryConfig(tuple(specs))
    return run_with_adversary(cfg, adv), adv


def test_receiver_only_pins_single_edge():
    obs = {E("D", "R1"): True, E("A", "R1"): False, E("C", "R2"): False, E("D", "R2"): False}
    assert receiver_only_candidates(NET, obs) == {E("D", "R1")}
    assert receiver_only_candidates(NET, {k: False for k in obs}) == frozenset()


def test_receiver_only_line_is_fully_ambiguous():
    net = line(4)
    assert receiver_only_candidates(net, {(2, 3): True}) == {(0, 1), (1, 2), (2, 3)}


def test_receiver_only_inconsistent():
    obs = {E("A", "R1"): True, E("D", "R1"): True, E("D", "R2"): False}
    with pytest.raises(InconsistentObservations):
        receiver_only_candidates(NET, obs)


def test_attacker_leaves_source_space_on_line():
    tr, _ = attack(line(4), [AttackerSpec(1)])
    assert not tr.space(3, tr.t_end) <= tr.source_space()


def test_no_attacker_reproduces_plain_run():
    cfg = RunConfig(NET, 8, horizon=30, seed=4)
    a = run(cfg)
    b = run_with_adversary(cfg, AdversaryConfig(()))
    assert np.array_equal(a.dims, b.dims)
    assert split_edges(b, info1_reports(b), b.source_space()).corrupted == frozenset()
    assert locate_subset_method(NET, info1_reports(b, method="subset"), b.source_space()).sets == []
    with pytest.raises(NoCorruptionObserved):
        locate_single(NET, split_edges(b, info1_reports(b), b.source_space()))


def test_trusted_nodes_cannot_attack():
    cfg = RunConfig(NET, 8, horizon=30)
    for node in ("S", "R1"):
        with pytest.raises(AttackerIsSourceOrReceiver):
            run_with_adversary(cfg, AdversaryConfig((AttackerSpec(ix(node)),)))
    with pytest.raises(ByzantineError):
        AdversaryConfig((AttackerSpec(ix("A"), delta=0),)).resolved(NET)


def reach_oracle(net, attackers):
    """Edges carrying corruption: the attackers' corrupted edges plus every
    edge leaving a node reachable from one of them."""
    g = net.digraph()
    polluted = set()
    bad = set()
    for a in attackers:
        for e in a.edges:
            bad.add(e)
            polluted |= nx.descendants(g, e[1]) | {e[1]}
    bad |= {e.key for e in net.edges if e.tail in polluted}
    return frozenset(bad)


@pytest.mark.parametrize("seed", range(15))
def test_truthful_split_matches_reachability(seed):
    rng = make_rng([3, seed])
    net = random_dag(int(rng.integers(5, 12)), 0.35, rng, max_rate=2)
    recv = {v for v in range(net.size) if not net.out_edges[v]}
    cand = [v for v in range(net.size) if v != net.source and v not in recv]
    if not cand:
        pytest.skip("no eligible attacker")
    a = int(rng.choice(cand))
    tr, adv = attack(net, [AttackerSpec(a)], seed)
    split = split_edges(tr, info1_reports(tr), tr.source_space())
    assert split.corrupted == corruption_oracle(tr) == reach_oracle(net, adv.resolved(net))
    assert all(e.key in split.clean for e in net.out_edges[net.source])
    assert split.clean | split.corrupted == {e.key for e in net.edges}
    assert locate_single(net, split, adv.receivers_of(net)).contains(a)


def test_info2_false_clean_rate():
    tr, _ = attack(NET, [AttackerSpec(ix("B"))], seed=1)
    rep = info1_reports(tr)
    PiS = tr.source_space()
    truth = corruption_oracle(tr)
    rng = make_rng(9)
    missed = total = 0
    for _ in range(400):
        s2 = split_edges(NET, info2_reports(rep, rng), PiS, level="info2")
        missed += len(truth - s2.corrupted)
        total += len(truth)
    assert missed / total <= 5 / 256


def test_single_attacker_cases():
    # two of three outgoing edges corrupted: pinned exactly
    from subspacenc.network import build

    net = build(["S", "A", "X", "Y", "Z"], "S", [("S", "A"), ("A", "X"), ("A", "Y"), ("A", "Z")])
    A = net.node_id("A")
    tr, adv = attack(net, [AttackerSpec(A, edges=frozenset({(A, 2), (A, 3)}), strategy="claim_clean")])
    v = locate_single(net, split_edges(tr, info1_reports(tr), tr.source_space()), adv.receivers_of(net))
    assert v.sets[0].nodes == {A} and v.sets[0].flag == "exact"
    # blame strategy on the seven-node graph: pair with the blamed parent
    tr, adv = attack(NET, [AttackerSpec(ix("D"), strategy="blame_one_incoming")], seed=2)
    v = locate_single(NET, split_edges(tr, info1_reports(tr), tr.source_space()), adv.receivers_of(NET))
    assert v.sets[0].nodes == {ix("A"), ix("D")}
    # one outgoing corrupted, claims clean: pair with that child
    tr, adv = attack(NET, [AttackerSpec(ix("C"), strategy="corrupt_one_outgoing")], seed=3)
    v = locate_single(NET, split_edges(tr, info1_reports(tr), tr.source_space()), adv.receivers_of(NET))
    assert v.sets[0].nodes == {ix("C"), ix("D")}


def test_frontier_attackers_identified():
    tr, adv = attack(NET, [AttackerSpec(ix("A")), AttackerSpec(ix("C"), strategy="claim_clean")], seed=5)
    v = locate_multiple_splitting(NET, split_edges(tr, info1_reports(tr), tr.source_space()), adv.receivers_of(NET))
    assert v.contains(ix("A")) and v.contains(ix("C"))
    assert all(len(s.nodes) <= 2 for s in v.sets)


def test_shadowed_attacker_reported_undetectable():
    tr, adv = attack(NET, [AttackerSpec(ix("B")), AttackerSpec(ix("D"))], seed=6)
    v = locate_multiple_splitting(NET, split_edges(tr, info1_reports(tr), tr.source_space()), adv.receivers_of(NET))
    assert [s.nodes for s in v.sets] == [{ix("B")}]
    assert ix("D") in v.undetectable
    assert v.undetectable == {ix("A"), ix("C"), ix("D")}


def test_shadow_examples_and_monotonicity():
    net = line(5)
    assert shadow_set(net, 1, {(1, 2)}) == {2, 3, 4}
    assert shadow_set(NET, ix("B"), set()) == frozenset()
    outs = [e.key for e in NET.out_edges[ix("C")]]
    assert shadow_set(NET, ix("C"), outs[:1]) <= shadow_set(NET, ix("C"), outs)
    rng = make_rng(2)
    for _ in range(30):
        g = random_dag(9, 0.4, rng)
        for a in range(1, g.size):
            outs = [e.key for e in g.out_edges[a]]
            for k in range(len(outs)):
                assert shadow_set(g, a, outs[:k]) <= shadow_set(g, a, outs[: k + 1])


def test_subset_method_single_attacker_neighbourhood():
    for strategy in ("truthful", "claim_clean"):
        tr, _ = attack(NET, [AttackerSpec(ix("C"), strategy=strategy)], seed=7)
        v = locate_subset_method(NET, info1_reports(tr, method="subset"), tr.source_space())
        assert len(v.sets) == 1
        hood = {ix("C")} | set(NET.parents(ix("C"))) | set(NET.children(ix("C")))
        assert ix("C") in v.sets[0].nodes <= hood


def test_adversary_config_round_trip():
    adv = AdversaryConfig((AttackerSpec(ix("C"), 2, frozenset({E("C", "D")}), "claim_clean"),))
    again = AdversaryConfig.from_dict(adv.to_dict())
    assert again == adv
