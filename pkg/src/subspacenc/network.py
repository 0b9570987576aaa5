"""Directed acyclic networks with integer edge rates.

Nodes are integers ``0..size-1``; optional string labels map to them.  A
:class:`Network` is immutable once built through :func:`validate`.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

INF = float("inf")


class NetworkError(ValueError):
    pass


class CycleDetected(NetworkError):
    pass


class UnreachableNode(NetworkError):
    def __init__(self, node):
        super().__init__(f"node {node} is not reachable from the source")
        self.node = node


class RateViolation(NetworkError):
    def __init__(self, edge, rate, cut):
        super().__init__(f"edge {edge} has rate {rate} above the tail min-cut {cut}")
        self.edge = edge


class InfeasibleDegreeConstraints(NetworkError):
    pass


@dataclass(frozen=True)
class Edge:
    tail: int
    head: int
    rate: int = 1

    @property
    def key(self) -> tuple:
        return (self.tail, self.head)


@dataclass(frozen=True)
class CutReport:
    value: float
    saturated: frozenset = frozenset()


@dataclass(frozen=True, eq=False)
class Network:
    size: int
    source: int
    edges: tuple
    labels: tuple = ()
    validated: bool = field(default=False, compare=False)

    # adjacency -----------------------------------------------------------
    @cached_property
    def out_edges(self) -> list:
        out = [[] for _ in range(self.size)]
        for e in self.edges:
            out[e.tail].append(e)
        return out

    @cached_property
    def in_edges(self) -> list:
        inn = [[] for _ in range(self.size)]
        for e in self.edges:
            inn[e.head].append(e)
        return inn

    def parents(self, v: int) -> list:
        return sorted({e.tail for e in self.in_edges[v]})

    def children(self, v: int) -> list:
        return sorted({e.head for e in self.out_edges[v]})

    @cached_property
    def edge_index(self) -> dict:
        return {e.key: i for i, e in enumerate(self.edges)}

    def rate(self, u: int, v: int) -> int:
        return self.edges[self.edge_index[(u, v)]].rate

    @property
    def nodes(self) -> range:
        return range(self.size)

    def label(self, v: int) -> str:
        return self.labels[v] if self.labels else str(v)

    def node_id(self, label) -> int:
        if isinstance(label, (int, np.integer)):
            return int(label)
        if label in self.labels:
            return self.labels.index(label)
        raise KeyError(label)

    @cached_property
    def topo_order(self) -> list:
        return list(nx.lexicographical_topological_sort(self.digraph()))

    def digraph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(range(self.size))
        for e in self.edges:
            if g.has_edge(e.tail, e.head):
                g[e.tail][e.head]["capacity"] += e.rate
            else:
                g.add_edge(e.tail, e.head, capacity=e.rate)
        return g

    @cached_property
    def min_cuts(self) -> list:
        """c_v for every node (infinite for the source)."""
        return [INF if v == self.source else min_cut(self, {self.source}, v).value for v in range(self.size)]

    @property
    def c_max(self) -> int:
        finite = [c for c in self.min_cuts if c != INF]
        return int(max(finite)) if finite else 0

    def in_degree_max(self) -> int:
        return max((len(x) for x in self.in_edges), default=0)

    # serialization -------------------------------------------------------
    def to_dict(self) -> dict:
        names = list(self.labels) if self.labels else list(range(self.size))
        return {
            "nodes": names,
            "source": names[self.source],
            "edges": [{"tail": names[e.tail], "head": names[e.head], "rate": e.rate} for e in self.edges],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def __repr__(self):
        return f"Network(size={self.size}, edges={len(self.edges)}, source={self.label(self.source)})"


def build(nodes, source, edges: Iterable, check_rates: bool = True) -> Network:
    """Create and validate a network.

    ``nodes`` is a count or a sequence of labels; ``edges`` are
    ``(tail, head)`` or ``(tail, head, rate)`` tuples in the same naming.
    """
    if isinstance(nodes, int):
        labels: tuple = ()
        size = nodes
        ident = lambda x: int(x)  # noqa: E731
    else:
        labels = tuple(str(x) for x in nodes)
        size = len(labels)
        index = {lab: i for i, lab in enumerate(labels)}
        ident = lambda x: index[str(x)]  # noqa: E731
    es = []
    for e in edges:
        if isinstance(e, dict):
            t, h, r = e["tail"], e["head"], e.get("rate", 1)
        elif len(e) == 2:
            (t, h), r = e, 1
        else:
            t, h, r = e
        es.append(Edge(ident(t), ident(h), int(r)))
    net = Network(size, ident(source), tuple(es), labels)
    return validate(net, check_rates=check_rates)


def from_dict(data: dict, check_rates: bool = True) -> Network:
    nodes = data["nodes"]
    if all(isinstance(x, int) for x in nodes) and list(nodes) == list(range(len(nodes))):
        nodes = len(nodes)
    return build(nodes, data["source"], data["edges"], check_rates=check_rates)


def load(path, check_rates: bool = True) -> Network:
    with open(path) as fh:
        return from_dict(json.load(fh), check_rates=check_rates)


def validate(net: Network, check_rates: bool = True) -> Network:
    """Check that the graph is acyclic and reachable and that r_e <= c_tail.

    ``check_rates=False`` admits rate-violating networks, which are useful
    as counterexamples for identifiability.
    """
    for e in net.edges:
        if not (0 <= e.tail < net.size and 0 <= e.head < net.size):
            raise NetworkError(f"edge {e} refers to an unknown node")
        if e.tail == e.head:
            raise CycleDetected(f"self-loop at {e.tail}")
        if e.rate < 1:
            raise NetworkError(f"edge {e} needs a positive integer rate")
    if len({e.key for e in net.edges}) != len(net.edges):
        raise NetworkError("parallel edges are not supported; merge them into one rate")
    g = net.digraph()
    if not nx.is_directed_acyclic_graph(g):
        raise CycleDetected(f"cycle {nx.find_cycle(g)}")
    reach = nx.descendants(g, net.source) | {net.source}
    for v in range(net.size):
        if v not in reach:
            raise UnreachableNode(v)
    out = Network(net.size, net.source, net.edges, net.labels, True)
    if check_rates:
        cuts = out.min_cuts
        for e in out.edges:
            if e.rate > cuts[e.tail]:
                raise RateViolation(e.key, e.rate, cuts[e.tail])
    return out


def min_cut(net: Network, from_set, to: int) -> CutReport:
    """Max-flow value from a node set to ``to`` with capacities r_e.

    Returns 0 when no path exists and infinity when ``to`` is in the set.
    """
    from_set = set(from_set)
    if to in from_set:
        return CutReport(INF)
    g = net.digraph()
    src = "__super_source__"
    for s in from_set:
        g.add_edge(src, s)  # no capacity attribute means unbounded
    if not nx.has_path(g, src, to):
        return CutReport(0)
    value, (side_s, side_t) = nx.minimum_cut(g, src, to)
    sat = frozenset(
        (e.tail, e.head) for e in net.edges if e.tail in side_s and e.head in side_t
    )
    return CutReport(int(value), sat)


def min_cut_to_set(net: Network, to_set) -> float:
    """min-cut from the source to a node set (infinite if it holds S)."""
    to_set = set(to_set)
    if net.source in to_set:
        return INF
    g = net.digraph()
    sink = "__super_sink__"
    for v in to_set:
        g.add_edge(v, sink)
    return int(nx.maximum_flow_value(g, net.source, sink))


def levels(net: Network) -> list:
    """Longest-path distance from the source for every node."""
    dist = [0] * net.size
    for v in net.topo_order:
        for e in net.out_edges[v]:
            dist[e.head] = max(dist[e.head], dist[v] + 1)
    return dist


def shortest_levels(net: Network) -> list:
    return [nx.shortest_path_length(net.digraph(), net.source, v) for v in range(net.size)]


def longest_path(net: Network) -> int:
    """D(G)."""
    return max(levels(net))


def ancestors_at(net: Network, u: int, l: int) -> frozenset:
    """P^l(u): nodes having a path of length exactly ``l`` to ``u``."""
    frontier = {u}
    for _ in range(l):
        frontier = {e.tail for v in frontier for e in net.in_edges[v]}
        if not frontier:
            break
    return frozenset(frontier)


def ancestors_at_exact(net: Network, u: int, l: int) -> frozenset:
    """Nodes of P^l(u) whose shortest path to ``u`` also has length ``l``."""
    g = net.digraph().reverse(copy=False)
    dist = nx.single_source_shortest_path_length(g, u)
    return frozenset(w for w in ancestors_at(net, u, l) if dist.get(w) == l)


@dataclass
class IdentifiabilityReport:
    holds: bool
    node_violations: list
    pair_violations: list
    pairs_checked: int

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "node_violations": self.node_violations,
            "pair_violations": self.pair_violations,
            "pairs_checked": self.pairs_checked,
        }


def identifiability_check(net: Network) -> IdentifiabilityReport:
    """Sufficient conditions for identifying every node from its subspace.

    For every node u and every l with nonempty P^l(u) the condition
    min-cut(P^l(u), u) <= min-cut(S, P^l(u)) must hold.  Pairs (u, v)
    sharing an ancestor set are reported separately since they are the
    ones whose subspaces could coincide.
    """
    D = longest_path(net)
    sets = {}
    node_viol = []
    cache = {}

    def cp(P):
        if P not in cache:
            cache[P] = min_cut_to_set(net, P)
        return cache[P]

    for u in range(net.size):
        if u == net.source:
            continue
        for l in range(1, D + 1):
            P = ancestors_at(net, u, l)
            if not P:
                break
            cu = min_cut(net, P, u).value
            c_p = cp(P)
            sets.setdefault((l, P), []).append((u, cu, c_p))
            if cu > c_p:
                node_viol.append({"node": u, "l": l, "cut_from_P": cu, "cut_to_P": c_p})
    pair_viol = []
    checked = 0
    for (l, P), members in sets.items():
        for (u, cu, c_p), (v, cv, _) in itertools.combinations(members, 2):
            checked += 1
            if cu > c_p or cv > c_p:
                pair_viol.append({"pair": [u, v], "l": l, "ancestors": sorted(P), "values": [cu, cv, c_p]})
    return IdentifiabilityReport(not node_viol and not pair_viol, node_viol, pair_viol, checked)


# generators -----------------------------------------------------------------

def line(n: int) -> Network:
    """S -> v1 -> ... -> v_{n-1}, unit rates."""
    if n < 1:
        raise ValueError("line needs at least one node")
    labels = ["S"] + [f"v{i}" for i in range(1, n)]
    return build(labels, "S", [(labels[i], labels[i + 1]) for i in range(n - 1)])


def random_tree(depth: int, branching: int, rng: np.random.Generator, rate: int = 1, max_nodes: int = 64) -> Network:
    """Random rooted tree: nodes above ``depth`` get 0..branching children
    (the root at least one), capped at ``max_nodes``."""
    if depth < 1 or branching < 1:
        raise ValueError("depth and branching must be positive")
    edges = []
    frontier = [0]
    count = 1
    for level in range(depth):
        nxt = []
        for v in frontier:
            lo = 1 if v == 0 else 0
            k = int(rng.integers(lo, branching + 1))
            for _ in range(k):
                if count >= max_nodes:
                    break
                edges.append((v, count, rate))
                nxt.append(count)
                count += 1
        frontier = nxt
        if not frontier:
            break
    return build(count, 0, edges)


def random_dag(size: int, density: float, rng: np.random.Generator, max_rate: int = 1) -> Network:
    """Random DAG on nodes in topological order 0..size-1 with source 0.

    Each node gets one uniformly chosen earlier parent (keeping it
    reachable) plus every other earlier node with probability ``density``.
    Rates are drawn in [1, max_rate] and clipped to the tail's min-cut.
    """
    if size < 1:
        raise ValueError("size must be positive")
    pairs = []
    for v in range(1, size):
        first = int(rng.integers(0, v))
        for u in range(v):
            if u == first or rng.random() < density:
                pairs.append((u, v))
    rates = {p: int(rng.integers(1, max_rate + 1)) for p in pairs}
    if max_rate > 1:
        # heads in increasing order: every edge into a tail is final before use
        g = nx.DiGraph()
        g.add_nodes_from(range(size))
        cut = {0: INF}
        for (a, b) in sorted(pairs, key=lambda p: (p[1], p[0])):
            if a not in cut:
                cut[a] = nx.maximum_flow_value(g, 0, a)
            rates[(a, b)] = int(min(rates[(a, b)], cut[a]))
            g.add_edge(a, b, capacity=rates[(a, b)])
    return build(size, 0, [(a, b, rates[(a, b)]) for (a, b) in pairs])


@dataclass(frozen=True)
class ClusteredTopology:
    """Undirected overlay with cluster labels and designated bottleneck links."""

    size: int
    source: int
    edges: tuple  # undirected (a, b) with a < b
    cluster_of: tuple
    bottleneck: frozenset  # subset of edges crossing clusters

    def neighbors(self) -> list:
        nb = [set() for _ in range(self.size)]
        for a, b in self.edges:
            nb[a].add(b)
            nb[b].add(a)
        return nb

    def degrees(self) -> list:
        return [len(x) for x in self.neighbors()]

    def as_network(self) -> Network:
        """Orient every link away from the source along BFS order."""
        g = nx.Graph(list(self.edges))
        g.add_nodes_from(range(self.size))
        dist = nx.single_source_shortest_path_length(g, self.source)
        rank = {v: (dist[v], v) for v in range(self.size)}
        directed = [(a, b) if rank[a] < rank[b] else (b, a) for a, b in self.edges]
        return build(self.size, self.source, directed)


def clustered(
    sizes: Sequence[int],
    rng: np.random.Generator,
    bottleneck_links: int = 2,
    degree_bounds: tuple = (2, 5),
    chain: bool = True,
) -> ClusteredTopology:
    """Clusters wired internally by a random Hamiltonian cycle plus extra
    random links; consecutive clusters are joined by ``bottleneck_links``
    links each (or every pair of clusters when ``chain`` is False).  Each
    node's target degree is uniform on ``degree_bounds``, which puts the
    average near 3.5 for the default bounds.  Node 0 (in the first
    cluster) is the source.
    """
    lo, hi = degree_bounds
    if any(s < 3 for s in sizes):
        raise InfeasibleDegreeConstraints("every cluster needs at least 3 nodes for degree >= 2")
    if lo < 2 or hi < lo:
        raise InfeasibleDegreeConstraints(f"bad degree bounds {degree_bounds}")
    starts = np.cumsum([0] + list(sizes))
    total = int(starts[-1])
    cluster_of = []
    for ci, s in enumerate(sizes):
        cluster_of += [ci] * s
    adj = [set() for _ in range(total)]

    def link(a, b):
        adj[a].add(b)
        adj[b].add(a)

    for ci, s in enumerate(sizes):
        members = [int(x) for x in rng.permutation(np.arange(starts[ci], starts[ci + 1]))]
        for i in range(s):
            link(members[i], members[(i + 1) % s])
    if chain:
        cpairs = [(i, i + 1) for i in range(len(sizes) - 1)]
    else:
        cpairs = list(itertools.combinations(range(len(sizes)), 2))
    bott = set()
    for a, b in cpairs:
        made = 0
        tries = 0
        while made < bottleneck_links:
            tries += 1
            if tries > 1000:
                raise InfeasibleDegreeConstraints("cannot place bottleneck links within degree bounds")
            x = int(rng.integers(starts[a], starts[a + 1]))
            y = int(rng.integers(starts[b], starts[b + 1]))
            if y in adj[x] or len(adj[x]) >= hi or len(adj[y]) >= hi:
                continue
            link(x, y)
            bott.add((min(x, y), max(x, y)))
            made += 1
    target = rng.integers(lo, hi + 1, size=total)
    for ci, s in enumerate(sizes):
        members = list(range(int(starts[ci]), int(starts[ci + 1])))
        for _ in range(4 * s * hi):
            need = [v for v in members if len(adj[v]) < target[v]]
            if len(need) < 2:
                break
            x, y = rng.choice(need, size=2, replace=False)
            x, y = int(x), int(y)
            if y not in adj[x]:
                link(x, y)
    edges = tuple(sorted((a, b) for a in range(total) for b in adj[a] if a < b))
    degs = [len(x) for x in adj]
    if min(degs) < lo or max(degs) > hi:
        raise InfeasibleDegreeConstraints(f"degrees {min(degs)}..{max(degs)} outside {degree_bounds}")
    topo = ClusteredTopology(total, 0, edges, tuple(cluster_of), frozenset(bott))
    g = nx.Graph(list(edges))
    if not nx.is_connected(g):
        raise InfeasibleDegreeConstraints("generated overlay is disconnected")
    return topo


def diamond() -> Network:
    return build(["S", "A", "B", "C"], "S", [("S", "A"), ("S", "B"), ("A", "C"), ("B", "C")])


def example_tree() -> Network:
    """S -> A -> {B, C}, unit rates."""
    return build(["S", "A", "B", "C"], "S", [("S", "A"), ("A", "B"), ("A", "C")])


def rate_counterexample() -> Network:
    """S -> A at rate 1, A -> {B, C} at rate 2.  Violates the rate
    constraint on purpose: B and C end up with the same subspace."""
    return build(["S", "A", "B", "C"], "S", [("S", "A", 1), ("A", "B", 2), ("A", "C", 2)], check_rates=False)


def six_node_example() -> Network:
    """The seven-node DAG with two receivers used for adversary examples."""
    return build(
        ["S", "A", "B", "C", "D", "R1", "R2"],
        "S",
        [("S", "B"), ("B", "A"), ("B", "C"), ("A", "D"), ("A", "R1"), ("C", "D"), ("C", "R2"), ("D", "R1"), ("D", "R2")],
    )
