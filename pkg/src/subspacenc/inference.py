"""Passive topology inference from the subspaces nodes collect.

Trees need one snapshot: a node's parent is the smallest-dimension node
whose subspace contains its own.  General DAGs need two consecutive
snapshots: what arrives on branch i of u during slot t+1 was drawn from the
parent's space at t, so the branch parent is the smallest Π_w(t) containing
Π_u^{(i)}(t+1).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

from .dissemination import SnapshotSet
from .network import Network, build, longest_path
from .subspace import RowSpace, intersect_dim, is_subspace_of


class InferenceError(ValueError):
    pass


class NoCandidateParent(InferenceError):
    pass


class AmbiguousParent(InferenceError):
    def __init__(self, node, candidates):
        super().__init__(f"node {node}: parent ambiguous among {candidates}")
        self.node = node
        self.candidates = candidates


class DistinctnessViolated(InferenceError):
    def __init__(self, pairs):
        super().__init__(f"equal subspaces at nodes {pairs}")
        self.pairs = pairs


class SourceNotFound(InferenceError):
    pass


@dataclass(frozen=True)
class InferenceInputTree:
    n: int
    d: tuple  # d_u per node
    d_pair: dict  # frozenset{u, v} -> dim(Π_u ∩ Π_v)
    t: Optional[int] = None

    def pair(self, u: int, v: int) -> int:
        return self.d_pair[frozenset((u, v))]


@dataclass(frozen=True)
class InferenceInputGeneral:
    n: int
    d: tuple  # d_u(t)
    branch_dims: tuple  # branch_dims[u][i] = d_u^{(i)} = dim Π_u^{(u_i)}(t+1)
    branch_growth: tuple  # branch dims gained between t and t+1 (rate estimate)
    d_wu: dict  # (w, u, i) -> dim(Π_u^{(u_i)}(t+1) ∩ Π_w(t))
    t: Optional[int] = None


@dataclass
class BranchResult:
    parent: Optional[int]
    status: str  # unique | ambiguous | none
    candidates: tuple = ()
    rate: int = 1


@dataclass
class TopologyEstimate:
    size: int
    source: Optional[int]
    branches: dict = field(default_factory=dict)  # node -> list[BranchResult]

    @property
    def all_unique(self) -> bool:
        return all(b.status == "unique" for bs in self.branches.values() for b in bs)

    def edges(self) -> set:
        return {(b.parent, u) for u, bs in self.branches.items() for b in bs if b.status == "unique"}

    def parents(self, u: int) -> list:
        return sorted(b.parent for b in self.branches.get(u, []) if b.status == "unique")

    def problems(self) -> list:
        return [(u, b) for u, bs in sorted(self.branches.items()) for b in bs if b.status != "unique"]

    def raise_for_status(self) -> "TopologyEstimate":
        for u, b in self.problems():
            if b.status == "ambiguous":
                raise AmbiguousParent(u, list(b.candidates))
            raise NoCandidateParent(f"node {u} has a branch contained in no collected subspace")
        return self

    def is_acyclic(self) -> bool:
        import networkx as nx

        g = nx.DiGraph()
        g.add_nodes_from(range(self.size))
        g.add_edges_from(self.edges())
        return nx.is_directed_acyclic_graph(g)

    def to_network(self, labels=None) -> Network:
        rates = {}
        for u, bs in self.branches.items():
            for b in bs:
                if b.status == "unique":
                    rates[(b.parent, u)] = max(rates.get((b.parent, u), 0), b.rate)
        nodes = list(labels) if labels else self.size
        names = list(labels) if labels else list(range(self.size))
        edges = [(names[a], names[b], r) for (a, b), r in sorted(rates.items())]
        return build(nodes, names[self.source], edges, check_rates=False)

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "branches": {
                str(u): [
                    {"parent": b.parent, "status": b.status, "candidates": list(b.candidates), "rate": b.rate}
                    for b in bs
                ]
                for u, bs in sorted(self.branches.items())
            },
        }

    def diff(self, truth: Network, compare_rates: bool = False) -> dict:
        """Compare against a ground-truth network."""
        if compare_rates:
            est = {(b.parent, u, b.rate) for u, bs in self.branches.items() for b in bs if b.status == "unique"}
            true = {(e.tail, e.head, e.rate) for e in truth.edges}
        else:
            est = self.edges()
            true = {e.key for e in truth.edges}
        missing = sorted(true - est)
        extra = sorted(est - true)
        return {
            "exact_match": not missing and not extra and self.all_unique and self.source == truth.source,
            "missing": [list(x) for x in missing],
            "extra": [list(x) for x in extra],
            "unresolved": [u for u, _ in self.problems()],
            "source_ok": self.source == truth.source,
        }


def _find_source(n: int, d) -> int:
    full = [u for u, x in enumerate(d) if x == n]
    if len(full) != 1:
        raise SourceNotFound(f"expected exactly one node of dimension {n}, found {full}")
    return full[0]


def tree_input(snap: SnapshotSet) -> InferenceInputTree:
    d = tuple(s.dim for s in snap.spaces)
    pairs = {}
    for u, v in itertools.combinations(range(len(d)), 2):
        pairs[frozenset((u, v))] = intersect_dim(snap.spaces[u], snap.spaces[v])
    return InferenceInputTree(snap.n, d, pairs, snap.t)


def infer_tree(inp: InferenceInputTree) -> TopologyEstimate:
    """Parent of u = argmin_{w : d_uw = d_u} d_w."""
    size = len(inp.d)
    S = _find_source(inp.n, inp.d)
    est = TopologyEstimate(size, S)
    for u in range(size):
        if u == S:
            continue
        if inp.d[u] == 0:
            # an empty space sits inside every other one and says nothing
            est.branches[u] = [BranchResult(None, "none")]
            continue
        cands = [w for w in range(size) if w != u and inp.pair(u, w) == inp.d[u]]
        est.branches[u] = [_pick(inp.d, u, cands, inp.d[u])]
    return est


def _pick(d, u, cands, du) -> BranchResult:
    if not cands:
        return BranchResult(None, "none")
    m = min(d[w] for w in cands)
    best = tuple(sorted(w for w in cands if d[w] == m))
    # a candidate with the same dimension holds the same space: no direction
    if len(best) > 1 or m == du:
        return BranchResult(None, "ambiguous", best)
    return BranchResult(best[0], "unique", best)


def check_distinct(snap: SnapshotSet) -> list:
    """All unordered pairs of nodes holding identical subspaces."""
    seen = {}
    for u, s in enumerate(snap.spaces):
        seen.setdefault(s, []).append(u)
    pairs = []
    for group in seen.values():
        pairs.extend(itertools.combinations(sorted(group), 2))
    return sorted(pairs)


def general_input(a: SnapshotSet, b: SnapshotSet) -> InferenceInputGeneral:
    """Assemble dimension data from snapshots at t and t+1.

    Branches of a node are its incoming links in a fixed local order; the
    parent identities stored in the snapshot keys are not used.
    """
    if b.t != a.t + 1:
        raise InferenceError(f"snapshots must be consecutive, got t={a.t} and t={b.t}")
    size = len(a.spaces)
    d = tuple(s.dim for s in a.spaces)
    bd, growth, dwu = [], [], {}
    for u in range(size):
        keys = sorted(k for k in b.edge_spaces if k[1] == u)
        dims_u, grow_u = [], []
        for i, k in enumerate(keys):
            br = b.edge_spaces[k]
            dims_u.append(br.dim)
            grow_u.append(br.dim - a.edge_spaces[k].dim)
            for w in range(size):
                if w != u:
                    dwu[(w, u, i)] = intersect_dim(br, a.spaces[w])
        bd.append(tuple(dims_u))
        growth.append(tuple(grow_u))
    return InferenceInputGeneral(a.n, d, tuple(bd), tuple(growth), dwu, a.t)


def infer_general_from_input(inp: InferenceInputGeneral) -> TopologyEstimate:
    size = len(inp.d)
    S = _find_source(inp.n, inp.d)
    est = TopologyEstimate(size, S)
    for u in range(size):
        if u == S:
            continue
        res = []
        for i, du in enumerate(inp.branch_dims[u]):
            if du == 0:
                res.append(BranchResult(None, "none"))
                continue
            cands = [w for w in range(size) if w != u and inp.d_wu[(w, u, i)] == du]
            r = _pick(inp.d, u, cands, -1)
            r.rate = max(1, inp.branch_growth[u][i])
            res.append(r)
        est.branches[u] = res
    return est


def infer_general(a: SnapshotSet, b: SnapshotSet, on_violation: str = "raise") -> TopologyEstimate:
    """Branch-wise parent inference from consecutive snapshots.

    When two nodes hold equal subspaces at t the estimate cannot be trusted;
    this raises :class:`DistinctnessViolated` (or, with
    ``on_violation="flag"``, marks every branch touching those nodes as
    ambiguous).
    """
    pairs = check_distinct(a)
    if pairs and on_violation == "raise":
        raise DistinctnessViolated(pairs)
    est = infer_general_from_input(general_input(a, b))
    if pairs:
        bad = {x for p in pairs for x in p}
        for u, bs in est.branches.items():
            for br in bs:
                if u in bad or br.parent in bad:
                    br.status = "ambiguous"
                    br.candidates = tuple(sorted(set(br.candidates) | bad))
                    br.parent = None
    return est


@dataclass(frozen=True)
class CommunicationCost:
    bits_total: float
    bits_per_node: float

    @property
    def bytes_per_node(self) -> float:
        return self.bits_per_node / 8

    @property
    def kilobytes_per_node(self) -> float:
        return self.bytes_per_node / 1000

    @property
    def kibibytes_per_node(self) -> float:
        return self.bytes_per_node / 1024


def cost_formula(n: int, q: int, delta_in: int, nodes: int, beta2: float, c_max: int, D: int) -> CommunicationCost:
    """Total bits (2 n^2 Δ_i ϑ / 4) log2 q and per-node bits
    2 β^2 c_max^2 D^2 Δ_i log2 q."""
    lq = math.log2(q)
    total = 2 * n * n * delta_in * nodes / 4 * lq
    per_node = 2 * beta2 * c_max**2 * D**2 * delta_in * lq
    return CommunicationCost(total, per_node)


def communication_cost(net: Network, n: int, q: int, beta2: float = 5.0) -> CommunicationCost:
    return cost_formula(n, q, net.in_degree_max(), net.size, beta2, net.c_max, longest_path(net))
