"""Gossip over a clustered P2P overlay with subspace-driven rewiring.

Every slot each peer holding at least ``waiting_dimension`` dimensions
sends one fresh random combination of its buffer (as of the previous slot)
to each overlay neighbor.  Links are unit capacity and bidirectional.  The
generator's inter-cluster links ride a shared physical bottleneck: per
slot and direction, each cluster pair can push at most
``bottleneck_capacity`` packets across its original bottleneck links,
served round robin.  Links created later by the registrat are ordinary
unit links.

Peers decide between slots whether they are satisfied.  Unsatisfied peers
send requests, and the registrat (the central authority holding the
active peer list) executes rewirings while keeping every degree in
[lo, hi] and the overlay connected.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .finite_field import FieldSpec, field_new, make_rng
from .network import ClusteredTopology, clustered
from .subspace import Buffer, RowSpace, distance_ds, set_distance_DS

ALGORITHMS = ("none", "random", "algo1", "algo2", "algo3")


class P2PError(ValueError):
    pass


class DisconnectedOverlay(P2PError):
    pass


class NonTerminating(P2PError):
    pass


class NoAlternativePeer(P2PError):
    pass


@dataclass(frozen=True)
class AlgoConfig:
    kind: str = "random"
    p: float = 8 / 500
    k: int = 10
    check_every: int = 4
    T: float = 1.0
    vote_threshold: int = 2
    cluster_radius: int = 7
    per_cluster: int = 1  # algo3: rewirings per registrat cluster per slot
    report_window: int = 4  # algo3: slots a report stays in the registrat's view

    def __post_init__(self):
        if self.kind not in ALGORITHMS:
            raise P2PError(f"unknown algorithm {self.kind!r}")
        if not 0 <= self.p <= 1:
            raise P2PError("rewiring probability must lie in [0, 1]")
        if self.check_every < 1 or self.vote_threshold < 1:
            raise P2PError("check_every and vote_threshold must be positive")

    @classmethod
    def named(cls, kind: str, **overrides) -> "AlgoConfig":
        """Defaults per algorithm; algo3 votes with threshold 5."""
        base = {"vote_threshold": 5} if kind == "algo3" else {}
        base.update(overrides)
        return cls(kind=kind, **base)

    @classmethod
    def parse(cls, spec) -> "AlgoConfig":
        if isinstance(spec, AlgoConfig):
            return spec
        if isinstance(spec, str):
            return cls.named(spec)
        spec = dict(spec)
        kind = spec.pop("kind", spec.pop("algo", "random"))
        return cls.named(kind, **spec)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class SessionConfig:
    cluster_sizes: tuple = (15, 15, 20)
    algo: AlgoConfig = AlgoConfig()
    n: int = 40
    q: int = 256
    seed: int = 0
    bottleneck_links: int = 2
    bottleneck_capacity: float = 1.0
    waiting_dimension: int = 2
    degree_bounds: tuple = (2, 5)
    horizon: int = 1000
    sample_rounds: tuple = ()  # rounds at which to record cluster D_S matrices

    def __post_init__(self):
        if self.n < 1 or self.waiting_dimension < 1:
            raise P2PError("n and waiting_dimension must be positive")
        if self.bottleneck_capacity < 0:
            raise P2PError("bottleneck capacity must be non-negative")

    @classmethod
    def from_dict(cls, data: dict) -> "SessionConfig":
        d = dict(data)
        if "algo" in d:
            d["algo"] = AlgoConfig.parse(d["algo"])
        for key in ("cluster_sizes", "degree_bounds", "sample_rounds"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["algo"] = self.algo.to_dict()
        for key in ("cluster_sizes", "degree_bounds", "sample_rounds"):
            d[key] = list(d[key])
        return d


@dataclass
class SessionMetrics:
    avg_collection_time: float
    collection_times: list
    total_rewirings: int
    rewirings_per_round: list
    cluster_census: list  # per round: overlay links joining different ground-truth clusters
    ds_matrices: dict  # round -> cluster-by-cluster D_S matrix (floats)
    rounds: int
    requests: int = 0
    rejected: int = 0

    def to_dict(self) -> dict:
        return {
            "avg_collection_time": self.avg_collection_time,
            "total_rewirings": self.total_rewirings,
            "rounds": self.rounds,
            "requests": self.requests,
            "rejected": self.rejected,
            "collection_times": list(self.collection_times),
            "rewirings_per_round": list(self.rewirings_per_round),
            "cluster_census": list(self.cluster_census),
            "ds_matrices": {str(k): v for k, v in sorted(self.ds_matrices.items())},
        }


# ---------------------------------------------------------------------------
# overlay and registrat


class OverlayState:
    """Mutable overlay: neighbor sets plus the registrat's bookkeeping."""

    def __init__(self, topo: ClusteredTopology, degree_bounds=(2, 5)):
        self.size = topo.size
        self.source = topo.source
        self.cluster_of = topo.cluster_of
        self.lo, self.hi = degree_bounds
        self.nb = [set(x) for x in topo.neighbors()]
        self.bottleneck_group = {}
        for a, b in topo.bottleneck:
            g = tuple(sorted((topo.cluster_of[a], topo.cluster_of[b])))
            self.bottleneck_group[(a, b)] = g
            self.bottleneck_group[(b, a)] = g
        self.reports = {}  # peer -> (round, RowSpace)
        if not self.connected():
            raise DisconnectedOverlay("initial overlay is disconnected")
        self.check_degrees()

    def degree(self, v: int) -> int:
        return len(self.nb[v])

    def check_degrees(self) -> None:
        for v in range(self.size):
            if not self.lo <= len(self.nb[v]) <= self.hi:
                raise P2PError(f"peer {v} has degree {len(self.nb[v])}")

    def connected(self, skip: Optional[tuple] = None, extra: Optional[tuple] = None) -> bool:
        """Connectivity, optionally with edge ``skip`` removed and ``extra`` added."""
        seen = {0}
        todo = deque([0])
        while todo:
            u = todo.popleft()
            nbrs = set(self.nb[u])
            if skip is not None and u in skip:
                nbrs.discard(skip[1] if u == skip[0] else skip[0])
            if extra is not None and u in extra:
                nbrs.add(extra[1] if u == extra[0] else extra[0])
            for w in nbrs:
                if w not in seen:
                    seen.add(w)
                    todo.append(w)
        return len(seen) == self.size

    def can_swap(self, v: int, drop: int, add: int) -> bool:
        if drop not in self.nb[v] or add in self.nb[v] or add == v:
            return False
        if self.degree(drop) - 1 < self.lo or self.degree(add) + 1 > self.hi:
            return False
        return self.connected(skip=(v, drop), extra=(v, add))

    def swap(self, v: int, drop: int, add: int) -> None:
        """Replace neighbor ``drop`` of v by ``add``."""
        self.nb[v].discard(drop)
        self.nb[drop].discard(v)
        self.bottleneck_group.pop((v, drop), None)
        self.bottleneck_group.pop((drop, v), None)
        self.nb[v].add(add)
        self.nb[add].add(v)

    def cross_cluster_links(self) -> int:
        return sum(1 for a in range(self.size) for b in self.nb[a] if a < b and self.cluster_of[a] != self.cluster_of[b])

    def rewire(self, v: int, rng: np.random.Generator, drop_choices, add_choices) -> Optional[tuple]:
        """Try (drop, add) pairs in the given preference orders; first
        feasible one wins.  ``add_choices`` is shuffled for uniform choice."""
        adds = [a for a in add_choices if a != v and a not in self.nb[v] and self.degree(a) < self.hi]
        if not adds:
            return None
        adds = [adds[i] for i in rng.permutation(len(adds))]
        for x in drop_choices:
            if x not in self.nb[v] or self.degree(x) - 1 < self.lo:
                continue
            for y in adds[:16]:
                if self.can_swap(v, x, y):
                    self.swap(v, x, y)
                    return (x, y)
        return None


def registrat_cluster(spaces: dict, radius: int) -> list:
    """Greedy partition: take the smallest unassigned peer, put every
    unassigned peer within subspace distance ``radius`` of it in its
    cluster, repeat."""
    left = sorted(spaces)
    out = []
    while left:
        i = left[0]
        group = [j for j in left if j == i or distance_ds(spaces[i], spaces[j]) <= radius]
        out.append(frozenset(group))
        left = [j for j in left if j not in group]
    return out


# ---------------------------------------------------------------------------
# decision rules


def decide_random(p: float, rng: np.random.Generator) -> bool:
    """One Bernoulli(p) draw, made once per received packet."""
    return bool(rng.random() < p)


def decide_algo1(counters: dict, k: int) -> list:
    """Neighbors whose non-innovative count exceeds k."""
    return sorted(u for u, c in counters.items() if c > k)


def pair_votes(increments: dict, T: float) -> list:
    """Neighbor pairs whose intersection grew at least T times as fast as
    their joint space.  ``increments`` maps (a, b) to (joint_inc, inter_inc).
    A pair whose joint space stalled while the intersection grew counts."""
    out = []
    for pair, (dj, di) in sorted(increments.items()):
        if dj > 0:
            if di / dj >= T:
                out.append(pair)
        elif di > 0:
            out.append(pair)
    return out


def decide_algo2(votes: dict, vote_threshold: int) -> list:
    """Peers that have collected at least ``vote_threshold`` votes."""
    return sorted(v for v, c in votes.items() if c >= vote_threshold)


# ---------------------------------------------------------------------------
# the session


class _Peer:
    __slots__ = ("buf", "pair", "nonin", "bad", "last", "received", "since_check", "first", "decoded", "votes")

    def __init__(self, F: FieldSpec, n: int):
        self.buf = Buffer(F, n)
        self.pair = {}  # neighbor -> Buffer of what that neighbor sent
        self.nonin = {}  # neighbor -> non-innovative packets
        self.bad = set()
        self.last = {}  # (a, b) -> (joint, inter) at the previous check
        self.received = 0
        self.since_check = 0
        self.first = None
        self.decoded = None
        self.votes = 0


def run_session(cfg: SessionConfig, topo: Optional[ClusteredTopology] = None) -> SessionMetrics:
    """Disseminate n packets from peer 0 until every peer decodes."""
    F = field_new(cfg.q)
    kargs = F.kernel_args
    algo = cfg.algo
    rng = make_rng(np.random.SeedSequence([cfg.seed, 0]))
    if topo is None:
        topo = clustered(cfg.cluster_sizes, make_rng(np.random.SeedSequence([cfg.seed, 1])), cfg.bottleneck_links, cfg.degree_bounds)
    ov = OverlayState(topo, cfg.degree_bounds)
    N, n, S = ov.size, cfg.n, ov.source
    track_pairs = algo.kind in ("algo2", "algo3")
    peers = [_Peer(F, n) for _ in range(N)]
    src = peers[S]
    src.buf.rows[:n, :n] = np.eye(n, dtype=np.int64)
    src.buf.pivots[:n] = np.arange(n)
    src.buf.dim = n
    src.decoded = 0
    credit = {}
    rr = {}
    rewirings, census, ds = [], [], {}
    requests = rejected = 0

    def clear_link(v, u):
        p = peers[v]
        p.pair.pop(u, None)
        p.nonin.pop(u, None)
        for key in [k for k in p.last if u in k]:
            del p.last[key]

    def do_rewire(v, drop_choices, add_choices):
        nonlocal rejected
        res = ov.rewire(v, rng, drop_choices, add_choices)
        if res is None:
            rejected += 1
            return False
        x, y = res
        clear_link(v, x)
        clear_link(x, v)
        return True

    t = 0
    while True:
        if all(p.decoded is not None for p in peers):
            break
        t += 1
        if t > cfg.horizon:
            raise NonTerminating(f"not every peer decoded within {cfg.horizon} slots")
        # --- transmissions from buffers at t-1
        for g in set(ov.bottleneck_group.values()):
            for direction in (0, 1):
                credit[(g, direction)] = min(credit.get((g, direction), 0.0) + cfg.bottleneck_capacity, max(1.0, cfg.bottleneck_capacity))
        sends = []
        for u in range(N):
            pu = peers[u]
            d = pu.buf.dim
            if d < min(cfg.waiting_dimension, n) and u != S:
                continue
            targets = sorted(ov.nb[u])
            if not targets:
                continue
            coeffs = rng.integers(0, F.q, size=(len(targets), d), dtype=np.int64)
            pkts = K.matmul(coeffs, np.ascontiguousarray(pu.buf.rows[:d, :n]), *kargs)
            for i, v in enumerate(targets):
                sends.append((u, v, pkts[i]))
        # shared bottleneck: serve crossing links round robin
        blocked = set()
        by_group = {}
        for idx, (u, v, _) in enumerate(sends):
            g = ov.bottleneck_group.get((u, v))
            if g is not None:
                direction = 0 if ov.cluster_of[u] == g[0] else 1
                by_group.setdefault((g, direction), []).append(idx)
        for key, idxs in sorted(by_group.items()):
            start = rr.get(key, 0) % len(idxs)
            order = idxs[start:] + idxs[:start]
            for idx in order:
                if credit[key] >= 1.0:
                    credit[key] -= 1.0
                else:
                    blocked.add(idx)
            rr[key] = start + 1
        # --- deliveries
        wants = []  # (peer, reason payload)
        for idx, (u, v, pkt) in enumerate(sends):
            if idx in blocked or v == S:
                continue
            pv = peers[v]
            innovative = pv.buf.insert(pkt)
            pv.received += 1
            pv.since_check += 1
            if pv.first is None:
                pv.first = t
            if not innovative:
                pv.nonin[u] = pv.nonin.get(u, 0) + 1
            if track_pairs:
                b = pv.pair.get(u)
                if b is None:
                    b = pv.pair[u] = Buffer(F, n)
                b.insert(pkt)
            if algo.kind == "random" and pv.decoded is None and decide_random(algo.p, rng):
                wants.append(v)
        for v in range(N):
            if v != S and peers[v].decoded is None and peers[v].buf.dim >= n:
                peers[v].decoded = t
        # --- decisions and registrat actions between slots
        done = 0
        if algo.kind == "random":
            for v in wants:
                requests += 1
                done += do_rewire(v, _shuffled(ov.nb[v], rng), range(N))
        elif algo.kind == "algo1":
            for v in range(N):
                pv = peers[v]
                if v == S or pv.decoded is not None or pv.since_check < algo.check_every:
                    continue
                pv.since_check = 0
                for u in decide_algo1(pv.nonin, algo.k):
                    if u not in ov.nb[v]:
                        continue
                    requests += 1
                    pv.bad.add(u)
                    pv.nonin[u] = 0
                    if do_rewire(v, [u], [y for y in range(N) if y not in pv.bad]):
                        done += 1
        elif algo.kind in ("algo2", "algo3"):
            for v in range(N):
                pv = peers[v]
                if v == S or pv.decoded is not None or pv.since_check < algo.check_every:
                    continue
                pv.since_check = 0
                incs = {}
                for a, b in itertools.combinations(sorted(ov.nb[v]), 2):
                    ba, bb = pv.pair.get(a), pv.pair.get(b)
                    da = ba.dim if ba else 0
                    db = bb.dim if bb else 0
                    if da and db:
                        joint = K.stacked_rank(ba.rows, da, bb.rows, db, n, *kargs)
                    else:
                        joint = da + db
                    inter = da + db - joint
                    pj, pi = pv.last.get((a, b), (0, 0))
                    pv.last[(a, b)] = (joint, inter)
                    incs[(a, b)] = (joint - pj, inter - pi)
                for a, b in pair_votes(incs, algo.T):
                    peers[a].votes += 1
                    peers[b].votes += 1
            unhappy = decide_algo2({v: peers[v].votes for v in range(N) if v != S}, algo.vote_threshold)
            for v in unhappy:
                peers[v].votes = 0
            requests += len(unhappy)
            if algo.kind == "algo2":
                for v in unhappy:
                    done += do_rewire(v, _shuffled(ov.nb[v], rng), range(N))
            else:
                done += _algo3_round(ov, peers, unhappy, t, algo, rng, do_rewire)
        rewirings.append(done)
        census.append(ov.cross_cluster_links())
        if t in cfg.sample_rounds:
            ds[t] = cluster_ds_matrix([p.buf.space() for p in peers], ov.cluster_of)

    times = [p.decoded - p.first for i, p in enumerate(peers) if i != S]
    return SessionMetrics(
        float(np.mean(times)) if times else 0.0,
        times,
        int(sum(rewirings)),
        rewirings,
        census,
        ds,
        t,
        requests,
        rejected,
    )


def _shuffled(items, rng) -> list:
    items = sorted(items)
    return [items[i] for i in rng.permutation(len(items))]


def _algo3_round(ov: OverlayState, peers, unhappy, t, algo: AlgoConfig, rng, do_rewire) -> int:
    """Registrat side of algo3: cluster recent reports, rewire a few
    requesters per cluster away from their own cluster."""
    for v in unhappy:
        ov.reports[v] = (t, peers[v].buf.space())
    for v in [v for v, (s, _) in ov.reports.items() if t - s >= algo.report_window]:
        del ov.reports[v]
    if not unhappy:
        return 0
    spaces = {v: sp for v, (_, sp) in ov.reports.items()}
    parts = registrat_cluster(spaces, algo.cluster_radius)
    label = {v: i for i, part in enumerate(parts) for v in part}
    done = 0
    pending = set(unhappy)
    for i, part in enumerate(parts):
        movers = sorted(part & pending)[: algo.per_cluster]
        for v in movers:
            same = [x for x in _shuffled(ov.nb[v], rng) if label.get(x) == i]
            other = [x for x in _shuffled(ov.nb[v], rng) if x not in label]
            targets = [y for y in range(ov.size) if label.get(y, -1) != i]
            if not same + other or not targets:
                continue  # no alternative peer: deferred
            done += do_rewire(v, same + other, targets)
    return done


def cluster_ds_matrix(spaces: Sequence[RowSpace], cluster_of: Sequence[int]) -> list:
    """D_S between the collections of spaces held in each ground-truth cluster."""
    k = max(cluster_of) + 1
    groups = [[s for s, c in zip(spaces, cluster_of) if c == i] for i in range(k)]
    return [[float(set_distance_DS(groups[i], groups[j])) for j in range(k)] for i in range(k)]


# ---------------------------------------------------------------------------
# the --table1 sweep: growing third cluster, four algorithms

TABLE1_ROWS = (20, 40, 70, 100, 150, 250)
TABLE1_ALGOS = ("random", "algo1", "algo2", "algo3")

# Average collection time and average rewirings, per cluster-3 size, in
# the order random, algo1, algo2, algo3.
TABLE1_REFERENCE_TIME = {
    20: (20.98, 22.14, 20.57, 20.39),
    40: (18.72, 21.13, 19.36, 19.47),
    70: (18.88, 21.54, 18.97, 19.54),
    100: (18.6, 21.48, 18.91, 21.42),
    150: (19.56, 20.85, 19.96, 20.18),
    250: (18.79, 19.8, 19.18, 18.99),
}
TABLE1_REFERENCE_REWIRINGS = {
    20: (28.1, 25, 35.1, 18.6),
    40: (43.3, 33.67, 42.6, 19.7),
    70: (60.4, 59.2, 33.9, 18.5),
    100: (77.9, 59.9, 33.7, 11.3),
    150: (144.8, 42.38, 46.13, 18.26),
    250: (184.5, 36.5, 74.86, 40.6),
}


def table1_session(size3: int, algo: str, seed: int, base: Optional[SessionConfig] = None) -> SessionMetrics:
    """One session of the --table1 sweep.  The topology depends only on (size3, seed), so
    all algorithms see the same starting overlay."""
    base = base or SessionConfig()
    sizes = (15, 15, size3)
    topo = clustered(sizes, make_rng(np.random.SeedSequence([seed, size3, 1])), base.bottleneck_links, base.degree_bounds)
    cfg = SessionConfig(**{**base.__dict__, "cluster_sizes": sizes, "algo": AlgoConfig.named(algo), "seed": seed})
    return run_session(cfg, topo)
