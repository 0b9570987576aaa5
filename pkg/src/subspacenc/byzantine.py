"""Byzantine attackers: injection of corrupted packets and their localization.

Each attacker j owns a block of delta_j extra coordinates, so the global
ambient space is F_q^{n + sum delta}.  The source spans the first n
coordinates and a corrupted packet is any packet with a nonzero entry in
an error block, which makes "is this flow inside Π_S" an exact test.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import networkx as nx
import numpy as np

from .dissemination import Attack, RunConfig, Trace, run
from .finite_field import make_rng
from .network import Network
from .subspace import RowSpace, contains_vector, is_subspace_of, rref, sample_from, sum_all

STRATEGIES = ("truthful", "blame_one_incoming", "claim_clean", "corrupt_one_outgoing")


class ByzantineError(ValueError):
    pass


class AttackerIsSourceOrReceiver(ByzantineError):
    pass


class InconsistentObservations(ByzantineError):
    pass


class NoCorruptionObserved(ByzantineError):
    pass


@dataclass(frozen=True)
class AttackerSpec:
    node: int
    delta: int = 1
    edges: Optional[frozenset] = None  # corrupted outgoing edge keys; None means all
    strategy: str = "truthful"
    activation: Optional[int] = None


@dataclass(frozen=True)
class AdversaryConfig:
    attackers: tuple
    receivers: Optional[frozenset] = None  # default: every node without outgoing edges

    def receivers_of(self, net: Network) -> frozenset:
        if self.receivers is not None:
            return frozenset(self.receivers)
        return frozenset(v for v in range(net.size) if not net.out_edges[v])

    def resolved(self, net: Network) -> list:
        """Attackers with their corrupted edge sets made explicit and checked."""
        recv = self.receivers_of(net)
        out = []
        for a in self.attackers:
            if a.strategy not in STRATEGIES:
                raise ByzantineError(f"unknown strategy {a.strategy!r}")
            if a.node == net.source or a.node in recv:
                raise AttackerIsSourceOrReceiver(f"node {a.node} is trusted")
            if a.delta < 1:
                raise ByzantineError("error dimension must be at least 1")
            outs = [e.key for e in sorted(net.out_edges[a.node], key=lambda e: e.key)]
            if a.strategy == "corrupt_one_outgoing":
                edges = frozenset(a.edges) if a.edges else frozenset(outs[:1])
                if len(edges) != 1:
                    raise ByzantineError("corrupt_one_outgoing corrupts exactly one edge")
            elif a.strategy == "blame_one_incoming":
                edges = frozenset(outs)
            else:
                edges = frozenset(a.edges) if a.edges is not None else frozenset(outs)
            if not edges or not edges <= set(outs):
                raise ByzantineError(f"attacker {a.node}: corrupted edges must be a nonempty subset of its outgoing edges")
            out.append(AttackerSpec(a.node, a.delta, edges, a.strategy, a.activation))
        if len({a.node for a in out}) != len(out):
            raise ByzantineError("duplicate attacker")
        return out

    def to_dict(self) -> dict:
        return {
            "attackers": [
                {
                    "node": a.node,
                    "delta": a.delta,
                    "edges": None if a.edges is None else sorted(list(e) for e in a.edges),
                    "strategy": a.strategy,
                    "activation": a.activation,
                }
                for a in self.attackers
            ],
            "receivers": None if self.receivers is None else sorted(self.receivers),
        }

    @classmethod
    def from_dict(cls, data: dict, net: Optional[Network] = None) -> "AdversaryConfig":
        ident = net.node_id if net is not None else int
        atk = []
        for a in data["attackers"]:
            edges = a.get("edges")
            if edges is not None:
                edges = frozenset((ident(x), ident(y)) for x, y in edges)
            atk.append(AttackerSpec(ident(a["node"]), int(a.get("delta", 1)), edges, a.get("strategy", "truthful"), a.get("activation")))
        recv = data.get("receivers")
        return cls(tuple(atk), None if recv is None else frozenset(ident(r) for r in recv))


def run_with_adversary(config: RunConfig, adv: AdversaryConfig) -> Trace:
    specs = adv.resolved(config.net)
    attacks = []
    offset = config.n
    for a in specs:
        attacks.append(Attack(a.node, a.delta, a.edges, a.activation, offset))
        offset += a.delta
    trace = run(config, tuple(attacks))
    trace.adversary = adv
    trace.attacker_specs = specs
    return trace


def source_space(trace: Trace) -> RowSpace:
    return trace.source_space()


def error_space(trace: Trace, node: int) -> RowSpace:
    for a in trace.attacks:
        if a.node == node:
            m = np.zeros((a.delta, trace.ambient), dtype=np.int64)
            for i in range(a.delta):
                m[i, a.offset + i] = 1
            return rref(trace.field, m, trace.ambient)
    raise KeyError(node)


# ---------------------------------------------------------------------------
# reports

def info1_reports(trace: Trace, t: Optional[int] = None, method: str = "splitting") -> dict:
    """Per-edge subspace reports {(u, v): Π_v^{(u)} as reported by v}.

    Honest nodes report what they received.  Attackers follow their
    strategy.  ``method`` matters only for ``truthful``: under splitting a
    truthful attacker reports what it received, under the subset method it
    also declares its own error space on every incoming edge.
    """
    net = trace.net
    t = trace.t_end if t is None else t
    specs = {a.node: a for a in getattr(trace, "attacker_specs", [])}
    PiS = trace.source_space()
    rep = {}
    for ei, e in enumerate(net.edges):
        actual = trace.edge_space(ei, t)
        a = specs.get(e.head)
        if a is None:
            rep[e.key] = actual
            continue
        ins = sorted(x.key for x in net.in_edges[e.head])
        err = error_space(trace, a.node)
        if a.strategy == "truthful":
            rep[e.key] = actual + err if method == "subset" else actual
        elif a.strategy == "blame_one_incoming":
            rep[e.key] = actual + err if e.key == ins[0] else _clean(actual, PiS)
        else:  # claim_clean, corrupt_one_outgoing
            rep[e.key] = _clean(actual, PiS)
    return rep


def _clean(space: RowSpace, PiS: RowSpace) -> RowSpace:
    return space & PiS


def info2_reports(info1: dict, rng: np.random.Generator) -> dict:
    """One uniformly random vector from each reported subspace."""
    return {k: sample_from(s, 1, rng)[0] for k, s in sorted(info1.items())}


@dataclass(frozen=True)
class EdgeSplit:
    clean: frozenset  # E_S
    corrupted: frozenset  # E_C

    def to_dict(self) -> dict:
        return {"E_S": sorted(list(e) for e in self.clean), "E_C": sorted(list(e) for e in self.corrupted)}


def split_edges(net, reports: dict, PiS: RowSpace, level: str = "info1") -> EdgeSplit:
    """e in E_C iff the flow reported on e leaves Π_S; source edges are clean.

    ``net`` may be a network or a trace.  With ``level="info2"`` each report
    is a single vector and the test is membership.
    """
    net = getattr(net, "net", net)
    clean, bad = set(), set()
    for e in net.edges:
        if e.tail == net.source:
            clean.add(e.key)
            continue
        r = reports[e.key]
        inside = is_subspace_of(r, PiS) if level == "info1" else contains_vector(PiS, r)
        (clean if inside else bad).add(e.key)
    return EdgeSplit(frozenset(clean), frozenset(bad))


def corruption_oracle(trace: Trace, t: Optional[int] = None) -> frozenset:
    """Edges whose actual flow leaves Π_S, straight from the trace."""
    t = trace.t_end if t is None else t
    PiS = trace.source_space()
    return frozenset(
        e.key for ei, e in enumerate(trace.net.edges) if not is_subspace_of(trace.edge_space(ei, t), PiS)
    )


# ---------------------------------------------------------------------------
# receiver-only analysis

def path_edges(net: Network, e: tuple) -> frozenset:
    """P_e: every edge lying on some source-to-e path, e included."""
    g = net.digraph()
    anc = nx.ancestors(g, e[0]) | {e[0]}
    return frozenset(x.key for x in net.edges if x.head in anc and x.tail in anc) | {e}


def receiver_only_candidates(net: Network, observations: dict) -> frozenset:
    """E_A = ∩_{e corrupted} P_e − ∪_{e clean} P_e over receiver edges."""
    bad = [e for e, c in observations.items() if c]
    good = [e for e, c in observations.items() if not c]
    if not bad:
        return frozenset()
    cand = frozenset.intersection(*(path_edges(net, e) for e in bad))
    for e in good:
        cand -= path_edges(net, e)
    if not cand:
        raise InconsistentObservations("no single edge set explains the observations")
    return cand


# ---------------------------------------------------------------------------
# verdicts

@dataclass(frozen=True)
class AmbiguitySet:
    nodes: frozenset
    flag: str  # exact | pair | parent_children | merged | best_effort


@dataclass
class LocatorVerdict:
    sets: list
    undetectable: frozenset = frozenset()

    def contains(self, node: int) -> bool:
        return any(node in s.nodes for s in self.sets)

    def to_dict(self, net: Optional[Network] = None) -> dict:
        name = net.label if net is not None else (lambda v: v)
        return {
            "sets": [{"nodes": sorted(name(v) for v in s.nodes), "flag": s.flag} for s in self.sets],
            "undetectable": sorted(name(v) for v in self.undetectable),
        }

    def to_json(self, net: Optional[Network] = None) -> str:
        return json.dumps(self.to_dict(net), indent=2, sort_keys=True, default=str)


def _edge_reach(net: Network) -> dict:
    """desc[v] = nodes reachable from v (v included)."""
    g = net.digraph()
    return {v: nx.descendants(g, v) | {v} for v in range(net.size)}


def maximal_edges(net: Network, edges: frozenset) -> list:
    """Edges of the set with no other member upstream of them.

    e1 is upstream of e2 when head(e1) reaches tail(e2).
    """
    desc = _edge_reach(net)
    out = []
    for e in edges:
        if not any(f != e and e[0] in desc[f[1]] for f in edges):
            out.append(e)
    return sorted(out)


def _trusted(net: Network, receivers) -> set:
    return {net.source} | set(receivers)


def _pair_set(e, trusted) -> AmbiguitySet:
    nodes = frozenset(x for x in e if x not in trusted)
    if not nodes:
        nodes = frozenset(e)
    return AmbiguitySet(nodes, "exact" if len(nodes) == 1 else "pair")


def locate_single(net: Network, split: EdgeSplit, receivers=()) -> LocatorVerdict:
    """At most two candidates, read off the highest-order corrupted edges."""
    if not split.corrupted:
        raise NoCorruptionObserved("no corrupted edge")
    trusted = _trusted(net, receivers)
    M = maximal_edges(net, split.corrupted)
    tails = {e[0] for e in M}
    heads = {e[1] for e in M}
    if len(M) == 1:
        return LocatorVerdict([_pair_set(M[0], trusted)])
    if len(tails) == 1:
        return LocatorVerdict([AmbiguitySet(frozenset(tails), "exact")])
    if len(heads) == 1:
        return LocatorVerdict([AmbiguitySet(frozenset(heads), "exact")])
    # not explainable by one attacker: keep the two most implicated nodes
    count = {}
    for e in M:
        for x in e:
            if x not in trusted:
                count[x] = count.get(x, 0) + 1
    ranked = sorted(count, key=lambda x: (-count[x], x))[:2]
    return LocatorVerdict([AmbiguitySet(frozenset(ranked), "best_effort")])


def shadow_set(net: Network, a: int, corrupted_out) -> frozenset:
    """Nodes all of whose incoming edges lie downstream of a corrupted
    outgoing edge of ``a``."""
    corrupted_out = {tuple(e) for e in corrupted_out if e[0] == a}
    if not corrupted_out:
        return frozenset()
    desc = _edge_reach(net)
    polluted = set()
    for _, h in corrupted_out:
        polluted |= desc[h]
    out = set()
    for v in range(net.size):
        if v == a or not net.in_edges[v]:
            continue
        if all(e.key in corrupted_out or e.tail in polluted for e in net.in_edges[v]):
            out.add(v)
    return frozenset(out)


def locate_multiple_splitting(net: Network, split: EdgeSplit, receivers=()) -> LocatorVerdict:
    """Localize the highest-order attackers and name the nodes they shadow."""
    if not split.corrupted:
        raise NoCorruptionObserved("no corrupted edge")
    trusted = _trusted(net, receivers)
    M = maximal_edges(net, split.corrupted)
    left = set(M)
    sets = []
    by_tail = {}
    for e in M:
        by_tail.setdefault(e[0], []).append(e)
    for u, es in sorted(by_tail.items()):
        if len(es) >= 2:
            sets.append(AmbiguitySet(frozenset([u]), "exact"))
            left -= set(es)
    by_head = {}
    for e in left:
        by_head.setdefault(e[1], []).append(e)
    for v, es in sorted(by_head.items()):
        if len(es) >= 2:
            sets.append(AmbiguitySet(frozenset([v]), "exact"))
            left -= set(es)
    for e in sorted(left):
        sets.append(_pair_set(e, trusted))
    located = set().union(*(s.nodes for s in sets)) if sets else set()
    shadow = set()
    for m in located:
        outs = {e.key for e in net.out_edges[m]} & split.corrupted
        shadow |= shadow_set(net, m, outs)
    shadow -= located | trusted
    return LocatorVerdict(sets, frozenset(shadow))


def subset_failures(net: Network, reports: dict, PiS: RowSpace) -> list:
    """Edges (u, v) whose reported Π_v^{(u)} is not inside Π_{P(u)}.

    A node's space is the sum of its incoming reports; Π_{P(u)} is the sum
    over u's parents, and Π_S for the source.
    """
    F = PiS.field
    amb = PiS.ambient_dim
    node_space = {}
    for v in range(net.size):
        if v == net.source:
            node_space[v] = PiS
        else:
            node_space[v] = sum_all([reports[e.key] for e in net.in_edges[v]], F, amb)
    failing = []
    for e in net.edges:
        u = e.tail
        if u == net.source:
            parent_space = PiS
        else:
            parent_space = sum_all([node_space[p] for p in net.parents(u)], F, amb)
        if not is_subspace_of(reports[e.key], parent_space):
            failing.append(e.key)
    return sorted(failing)


def _hypotheses(net: Network, edges: set) -> list:
    """(node set, covered edges) for every center and reporting mode.

    A center x that reported clean inputs explains failing edges out of x
    and out of its children.  One that declared its error space explains
    failing edges into and out of x.
    """
    nodes = sorted({x for e in edges for x in e})
    out = []
    for x in nodes:
        kids = set(net.children(x))
        pretend = frozenset(e for e in edges if e[0] == x or e[0] in kids)
        truthful = frozenset(e for e in edges if x in e)
        if pretend:
            out.append((frozenset({x} | {e[0] for e in pretend}), pretend))
        if truthful:
            out.append((frozenset({x} | {e[0] for e in truthful}), truthful))
    return out


def _min_cover(net: Network, edges: set, max_exact: int = 4) -> list:
    """Fewest hypotheses covering ``edges``; ties prefer disjoint, then
    smaller, sets.  Falls back to greedy past ``max_exact`` sets."""
    hyps = sorted(set(_hypotheses(net, edges)), key=lambda h: (-len(h[1]), len(h[0]), sorted(h[0])))
    for k in range(1, max_exact + 1):
        best = None
        for combo in itertools.combinations(hyps, k):
            if frozenset().union(*(h[1] for h in combo)) != edges:
                continue
            overlap = sum(len(a[0] & b[0]) for a, b in itertools.combinations(combo, 2))
            key = (overlap, sum(len(h[0]) for h in combo), sorted(sorted(h[0]) for h in combo))
            if best is None or key < best[0]:
                best = (key, [h[0] for h in combo])
        if best is not None:
            return best[1]
    todo, sets = set(edges), []
    while todo:
        nodes, cov = max(hyps, key=lambda h: (len(h[1] & todo), -len(h[0])))
        todo -= cov
        sets.append(nodes)
    return sets


def locate_subset_method(net: Network, reports: dict, PiS: RowSpace) -> LocatorVerdict:
    """Group failing edges into parent-children ambiguity sets.

    Failing edges are split into connected groups; each group is explained
    by the fewest attacker hypotheses (see :func:`_hypotheses`).  Sets that
    still overlap are merged and flagged, since attribution between them is
    not determined by the reports.
    """
    failing = subset_failures(net, reports, PiS)
    if not failing:
        return LocatorVerdict([])
    comp = nx.Graph()
    comp.add_edges_from(failing)
    sets = []
    for cc in sorted(nx.connected_components(comp), key=min):
        es = {e for e in failing if e[0] in cc}
        sets.extend(_min_cover(net, es))
    sets = [set(s) - {net.source} for s in sets]
    sets = [s for s in sets if s]
    merged = []
    for s in sets:
        hit = [m for m in merged if m[0] & s]
        for m in hit:
            merged.remove(m)
            s |= m[0]
        merged.append((s, bool(hit)))
    out = []
    for s, was_merged in sorted(merged, key=lambda m: min(m[0])):
        flag = "merged" if was_merged else ("exact" if len(s) == 1 else "parent_children")
        out.append(AmbiguitySet(frozenset(s), flag))
    return LocatorVerdict(out)


def undirected_distance(net: Network, a: int, b: int) -> float:
    g = net.digraph().to_undirected()
    try:
        return nx.shortest_path_length(g, a, b)
    except nx.NetworkXNoPath:
        return float("inf")
