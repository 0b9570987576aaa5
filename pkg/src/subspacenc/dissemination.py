"""Synchronous randomized network coding on a DAG.

Timing follows the unit-delay model: a packet sent in slot ``t`` is built
from the sender's buffer at the end of slot ``t-1`` and is in the
receiver's buffer at the end of slot ``t``.  Node ``v`` may send from slot
``tau_v + 1`` on; the source has ``tau_S = 0`` and stops after
``ceil(n / r_S)`` slots.

Coefficient draws happen in a fixed order so runs can be replayed: within a
slot, edges sorted by ``(tail, head)``, then the ``r_e`` lanes of each edge
in order; every lane draws ``rng.integers(0, q, size=d)`` where ``d`` is
the sender's dimension (``n`` for the source, plus the error dimension on
a corrupted lane of an attacker).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import _kernels as K
from .finite_field import FieldSpec, field_new, make_rng
from .network import INF, Network, longest_path
from .subspace import Buffer, RowSpace, rref, sum_all, zero_space


class DisseminationError(ValueError):
    pass


class HorizonExceeded(DisseminationError):
    pass


class NeverSatisfied(DisseminationError):
    pass


class CoefficientLogMissing(DisseminationError):
    pass


class OutOfRange(DisseminationError):
    pass


@dataclass(frozen=True)
class WaitingPolicy:
    """``paper_default``: first slot with at least c_v innovative packets and
    dimension >= c_v + 1.  ``fixed_dimension``: first slot with dimension
    >= w.  ``none``: first slot with anything at all."""

    kind: str = "paper_default"
    w: int = 0

    def __post_init__(self):
        if self.kind not in ("paper_default", "fixed_dimension", "none"):
            raise ValueError(f"unknown waiting policy {self.kind!r}")

    @classmethod
    def parse(cls, spec) -> "WaitingPolicy":
        if isinstance(spec, WaitingPolicy):
            return spec
        if spec is None:
            return cls()
        if isinstance(spec, dict):
            return cls(spec["kind"], int(spec.get("w", 0)))
        if isinstance(spec, str) and spec.startswith("fixed_dimension"):
            w = int(spec.split(":")[1]) if ":" in spec else int(spec[spec.index("(") + 1 : spec.index(")")])
            return cls("fixed_dimension", w)
        return cls(str(spec))

    def satisfied(self, gained: int, dim: int, c_v: float, n: int) -> bool:
        if self.kind == "none":
            return dim >= 1
        if self.kind == "fixed_dimension":
            return dim >= min(self.w, n)
        # a node that already holds everything has nothing left to wait for
        return (gained >= c_v and dim >= c_v + 1) or dim >= n


@dataclass(frozen=True)
class RunConfig:
    net: Network
    n: int
    field: FieldSpec = field(default_factory=lambda: field_new(256))
    horizon: int = 200
    waiting_policy: WaitingPolicy = WaitingPolicy()
    seed: int = 0
    stop_when_complete: bool = True
    record_coefficients: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        object.__setattr__(self, "waiting_policy", WaitingPolicy.parse(self.waiting_policy))

    @property
    def source_rate(self) -> int:
        out = self.net.out_edges[self.net.source]
        return min(e.rate for e in out) if out else 1

    @property
    def source_slots(self) -> int:
        return math.ceil(self.n / self.source_rate)


def n_is_sufficient(net: Network, n: int) -> bool:
    """2 D(G) - 1 < floor(n / c_max)."""
    return 2 * longest_path(net) - 1 < n // max(net.c_max, 1)


def minimal_sufficient_n(net: Network) -> int:
    return max(net.c_max, 1) * 2 * longest_path(net)


@dataclass
class Attack:
    """Runtime description of one attacker (built by the byzantine module)."""

    node: int
    delta: int
    edges: frozenset  # corrupted outgoing edge keys (tail, head)
    activation: Optional[int] = None  # corrupt slots t > activation; None means tau_A
    offset: int = 0  # first coordinate of the error block


@dataclass
class Trace:
    config: RunConfig
    ambient: int
    dims: np.ndarray  # (t_end + 1, size)
    innovation: np.ndarray  # (t_end + 1, size)
    tau: list
    received: list  # received[t] = {edge index: rows}, t = 0..t_end
    completed: bool
    coeffs: Optional[list] = None  # coeffs[t] = {edge index: f rows over the tail's packet log}
    packet_log: Optional[list] = None  # per node: list of (slot, edge index, lane)
    attacks: tuple = ()
    _edge_cache: dict = field(default_factory=dict, repr=False)

    @property
    def net(self) -> Network:
        return self.config.net

    @property
    def field(self) -> FieldSpec:
        return self.config.field

    @property
    def n(self) -> int:
        return self.config.n

    @property
    def t_end(self) -> int:
        return self.dims.shape[0] - 1

    def _check_t(self, t):
        if not 0 <= t <= self.t_end:
            raise OutOfRange(f"slot {t} outside 0..{self.t_end}")

    def source_space(self) -> RowSpace:
        m = np.zeros((self.n, self.ambient), dtype=np.int64)
        m[:, : self.n] = np.eye(self.n, dtype=np.int64)
        return rref(self.field, m, self.ambient)

    def rows_on_edge(self, e: int, t_from: int, t_to: int) -> np.ndarray:
        parts = [self.received[s][e] for s in range(max(t_from, 1), t_to + 1) if e in self.received[s]]
        if not parts:
            return np.zeros((0, self.ambient), dtype=np.int64)
        return np.vstack(parts)

    def edge_space(self, e: int, t: int) -> RowSpace:
        """Cumulative Π_v^{(u)}(t) for edge index ``e`` = (u, v)."""
        self._check_t(t)
        key = ("cum", e, t)
        if key not in self._edge_cache:
            self._edge_cache[key] = rref(self.field, self.rows_on_edge(e, 1, t), self.ambient)
        return self._edge_cache[key]

    def edge_increment(self, e: int, t: int) -> RowSpace:
        """π_v^{(u)}(t): span of what arrived on edge ``e`` during slot t."""
        self._check_t(t)
        return rref(self.field, self.rows_on_edge(e, t, t), self.ambient)

    def space(self, v: int, t: int) -> RowSpace:
        """Π_v(t)."""
        self._check_t(t)
        if v == self.net.source:
            return self.source_space()
        key = ("node", v, t)
        if key not in self._edge_cache:
            rows = [self.rows_on_edge(self.net.edge_index[e.key], 1, t) for e in self.net.in_edges[v]]
            self._edge_cache[key] = rref(self.field, np.vstack(rows) if rows else np.zeros((0, self.ambient)), self.ambient)
        return self._edge_cache[key]

    def received_at(self, v: int, t: int) -> np.ndarray:
        """Rows delivered to ``v`` in slot t, one per incoming lane in canonical order."""
        rows = []
        for e in sorted(self.net.in_edges[v], key=lambda e: e.key):
            ei = self.net.edge_index[e.key]
            # a silent lane counts as carrying the zero vector
            rows.append(self.received[t].get(ei, np.zeros((e.rate, self.ambient), dtype=np.int64)))
        return np.vstack(rows) if rows else np.zeros((0, self.ambient), dtype=np.int64)


def _canonical_edges(net: Network) -> list:
    return sorted(range(len(net.edges)), key=lambda i: net.edges[i].key)


def run(config: RunConfig, attacks: tuple = ()) -> Trace:
    """Simulate the dissemination protocol and return the full trace."""
    net, F, n = config.net, config.field, config.n
    kargs = F.kernel_args
    attacks = tuple(attacks)
    ambient = n + sum(a.delta for a in attacks)
    by_node = {a.node: a for a in attacks}
    if config.record_coefficients and attacks:
        raise CoefficientLogMissing("coefficient logging is only supported without attackers")
    rng = make_rng(config.seed)
    size = net.size
    S = net.source
    cuts = net.min_cuts
    policy = config.waiting_policy
    track = 64 if config.record_coefficients else 0
    bufs = [None if v == S else Buffer(F, ambient, track=track) for v in range(size)]
    tau = [None] * size
    tau[S] = 0
    order = _canonical_edges(net)
    dims = [np.zeros(size, dtype=np.int64)]
    dims[0][S] = n
    innov = [np.zeros(size, dtype=np.int64)]
    received = [{}]
    coeffs = [{}] if config.record_coefficients else None
    plog = [[] for _ in range(size)] if config.record_coefficients else None
    completed = False
    src_slots = config.source_slots
    non_source = [v for v in range(size) if v != S]
    if not non_source:
        completed = True

    for t in range(1, config.horizon + 1):
        if completed and config.stop_when_complete:
            break
        sent = {}
        fslot = {} if coeffs is not None else None
        for ei in order:
            e = net.edges[ei]
            u = e.tail
            if u == S:
                if t > src_slots:
                    continue
                c = rng.integers(0, F.q, size=(e.rate, n), dtype=np.int64)
                rows = np.zeros((e.rate, ambient), dtype=np.int64)
                rows[:, :n] = c
                sent[ei] = rows
                if fslot is not None:
                    fslot[ei] = c
                continue
            if tau[u] is None or t < tau[u] + 1:
                continue
            b = bufs[u]
            d = b.dim
            atk = by_node.get(u)
            corrupt = (
                atk is not None
                and e.key in atk.edges
                and t > (atk.activation if atk.activation is not None else tau[u])
            )
            rows = np.zeros((e.rate, ambient), dtype=np.int64)
            flog = None
            if fslot is not None:
                flog = np.zeros((e.rate, b.logged), dtype=np.int64)
            for lane in range(e.rate):
                if corrupt:
                    c = rng.integers(0, F.q, size=d + atk.delta, dtype=np.int64)
                    if d:
                        rows[lane] = K.matmul(c[None, :d], b.basis, *kargs)[0]
                    rows[lane, atk.offset : atk.offset + atk.delta] = c[d:]
                else:
                    c = rng.integers(0, F.q, size=d, dtype=np.int64)
                    if d:
                        full = K.matmul(c[None, :], np.ascontiguousarray(b.rows[:d]), *kargs)[0]
                        rows[lane] = full[:ambient]
                        if flog is not None:
                            flog[lane] = full[ambient : ambient + b.logged]
            sent[ei] = rows
            if flog is not None:
                fslot[ei] = flog
        # deliveries, in canonical order
        before = np.array([0 if v == S else bufs[v].dim for v in range(size)], dtype=np.int64)
        for ei in order:
            if ei not in sent:
                continue
            e = net.edges[ei]
            for lane, row in enumerate(sent[ei]):
                bufs[e.head].insert(row)
                if plog is not None:
                    plog[e.head].append((t, ei, lane))
        d_now = np.array([n if v == S else bufs[v].dim for v in range(size)], dtype=np.int64)
        gained = d_now - before
        gained[S] = 0
        for v in non_source:
            if tau[v] is None and policy.satisfied(int(gained[v]), int(d_now[v]), cuts[v], n):
                tau[v] = t
        dims.append(d_now)
        innov.append(gained)
        received.append(sent)
        if coeffs is not None:
            coeffs.append(fslot)
        if non_source and min(int(d_now[v]) for v in non_source) >= n:
            completed = True
    return Trace(
        config,
        ambient,
        np.array(dims),
        np.array(innov),
        tau,
        received,
        completed,
        coeffs,
        plog,
        attacks,
    )


def waiting_time_realized(trace: Trace, v: int) -> int:
    if trace.tau[v] is None:
        raise NeverSatisfied(f"node {v} never met its waiting condition by slot {trace.t_end}")
    return trace.tau[v]


@dataclass
class SteadyState:
    T_s: float  # start of the exactly-c_v window, INF when never attained
    T_s_rate: float  # first slot from which every node gains at least c_v
    t_end: int  # last slot before any non-source node completes
    innovation: np.ndarray
    exact_node_slots: int
    total_node_slots: int
    deficits: list  # (slot, node, gained, c_v) inside [T_s, t_end]

    @property
    def exact_fraction(self) -> float:
        return self.exact_node_slots / self.total_node_slots if self.total_node_slots else 1.0

    @property
    def attained(self) -> bool:
        return self.T_s != INF


def generic_gain(trace: Trace, v: int, t: int) -> int:
    """Dimension ``v`` would gain in slot ``t`` for generic coefficients.

    Lanes from parent u carry random vectors of Π_u(t-1); over a large field
    their rank modulo W = Π_v(t-1) is, by Rado's theorem,
    min over parent subsets A of  sum_{u not in A} r_u + dim(W + Σ_{u in A} Π_u(t-1)) - dim W.
    """
    net = trace.net
    W = trace.space(v, t - 1)
    active = []
    for e in net.in_edges[v]:
        u = e.tail
        if u == net.source:
            if t <= trace.config.source_slots:
                active.append((e.rate, trace.space(u, t - 1)))
        elif trace.tau[u] is not None and t >= trace.tau[u] + 1:
            active.append((e.rate, trace.space(u, t - 1)))
    best = None
    for mask in range(1 << len(active)):
        outside = 0
        inside = [W]
        for i, (r, sp) in enumerate(active):
            if mask >> i & 1:
                inside.append(sp)
            else:
                outside += r
        val = outside + sum_all(inside).dim - W.dim
        best = val if best is None else min(best, val)
    return best or 0


def steady_state(trace: Trace) -> SteadyState:
    """Steady-state start and in-window innovation statistics.

    The window ends at ``t_end``, the slot before any non-source node first
    holds n dimensions.  ``T_s`` is the first slot T such that, for every
    node and every slot t of [T, t_end],

    * the gain since T never exceeds c_v per slot on average, and
    * a slot with gain below c_v is a coefficient accident, i.e. the
      generic gain (:func:`generic_gain`) was at least c_v.

    Over a finite field such accidents happen with probability O(1/q);
    they are listed in ``deficits`` instead of restarting the window.  A
    node catching up on reconvergent paths gains more than c_v and is not
    yet in steady state.  ``T_s_rate`` drops that upper condition.
    """
    net = trace.net
    S = net.source
    cuts = net.min_cuts
    nodes = [v for v in range(net.size) if v != S]
    full = [t for t in range(trace.t_end + 1) if any(trace.dims[t, v] >= trace.n for v in nodes)]
    t_end = (full[0] - 1) if full else trace.t_end
    if not nodes:
        return SteadyState(0, 0, t_end, trace.innovation, 0, 0, [])
    gain = trace.innovation
    cache = {}

    def rate_ok(v, t):
        if gain[t, v] >= cuts[v]:
            return True
        if (v, t) not in cache:
            cache[(v, t)] = generic_gain(trace, v, t) >= cuts[v]
        return cache[(v, t)]

    def window_ok(T, exact):
        for v in nodes:
            cum = 0
            for t in range(T, t_end + 1):
                cum += gain[t, v]
                if exact and cum > cuts[v] * (t - T + 1):
                    return False
                if not rate_ok(v, t):
                    return False
        return True

    def first(exact):
        for T in range(1, t_end + 1):
            if window_ok(T, exact):
                return T
        return INF

    T_s = first(True)
    T_rate = first(False)
    exact = total = 0
    deficits = []
    if T_s != INF:
        c = np.array([cuts[v] for v in nodes])
        window = gain[int(T_s) : t_end + 1, nodes]
        exact = int((window == c[None, :]).sum())
        total = window.size
        for i, j in zip(*np.nonzero(window < c[None, :])):
            deficits.append((int(T_s) + int(i), nodes[j], int(window[i, j]), cuts[nodes[j]]))
    return SteadyState(T_s, T_rate, t_end, gain, exact, total, deficits)


# ---------------------------------------------------------------------------
# algebraic replay

class AlgebraicOracle:
    """State-space replay of a run from its recorded coefficients.

    Lanes are indexed by (edge, lane) in canonical order.  With
    W_0 = U A M and W_{k+1} = U F W_k, the lane outputs are Y = sum_k W_k;
    F is strictly lower block-triangular in time, so the sum is finite.
    """

    def __init__(self, trace: Trace, T: Optional[int] = None):
        if trace.coeffs is None or trace.packet_log is None:
            raise CoefficientLogMissing("run with record_coefficients=True to enable replay")
        self.trace = trace
        net = trace.net
        cfg = trace.config
        self.T = trace.t_end if T is None else min(T, trace.t_end)
        self.lanes = []
        self.lane_of = {}
        for ei in _canonical_edges(net):
            for k in range(net.edges[ei].rate):
                self.lane_of[(ei, k)] = len(self.lanes)
                self.lanes.append((ei, k))
        L = len(self.lanes)
        self.L = L
        T = self.T
        n = cfg.n
        F = cfg.field
        idx = lambda lane, t: (t - 1) * L + lane  # noqa: E731
        size = L * T
        self.gate = np.zeros(size, dtype=np.int64)
        AM = np.zeros((size, n), dtype=np.int64)
        Fm = np.zeros((size, size), dtype=np.int64)
        tau = trace.tau
        for t in range(1, T + 1):
            for li, (ei, k) in enumerate(self.lanes):
                tail = net.edges[ei].tail
                active = tau[tail] is not None and t >= tau[tail] + 1
                self.gate[idx(li, t)] = 1 if active else 0
                rec = trace.coeffs[t].get(ei)
                if tail == net.source:
                    if rec is not None:
                        AM[idx(li, t)] = rec[k]
                    continue
                if rec is None:
                    continue
                for j, coef in enumerate(rec[k]):
                    if coef:
                        s, ej, kj = trace.packet_log[tail][j]
                        Fm[idx(li, t), idx(self.lane_of[(ej, kj)], s)] = coef
        g = self.gate[:, None]
        W = AM * g
        Y = W.copy()
        kargs = F.kernel_args
        for _ in range(T + 1):
            W = K.matmul(Fm, W, *kargs) * g
            if not W.any():
                break
            Y = K.matadd(Y, W, F.binary, F.q)
        self.Y = Y
        self._idx = idx

    def lane_output(self, lane: int, t: int) -> np.ndarray:
        return self.Y[self._idx(lane, t)]

    def transfer(self, v: int, t: int) -> np.ndarray:
        """H_Sv(t): rows are the coding vectors v receives in slot t."""
        if not 1 <= t <= self.T:
            return np.zeros((0, self.trace.n), dtype=np.int64)
        net = self.trace.net
        rows = []
        for e in sorted(net.in_edges[v], key=lambda e: e.key):
            ei = net.edge_index[e.key]
            for k in range(e.rate):
                rows.append(self.lane_output(self.lane_of[(ei, k)], t))
        return np.array(rows, dtype=np.int64).reshape(-1, self.trace.n)


def algebraic_transfer(trace: Trace, v: int, T: int, oracle: Optional[AlgebraicOracle] = None) -> np.ndarray:
    oracle = oracle or AlgebraicOracle(trace, T)
    return oracle.transfer(v, T)


# ---------------------------------------------------------------------------
# snapshots

@dataclass(frozen=True, eq=False)
class SnapshotSet:
    """Static view at slot t: Π_v(t), cumulative per-edge spaces, and the
    per-edge increments of slot t.  Edge keys are (tail, head)."""

    t: int
    n: int
    field: FieldSpec
    source: int
    spaces: tuple
    edge_spaces: dict
    increments: dict

    def __eq__(self, other):
        return (
            isinstance(other, SnapshotSet)
            and (self.t, self.n, self.field, self.source) == (other.t, other.n, other.field, other.source)
            and self.spaces == other.spaces
            and self.edge_spaces == other.edge_spaces
            and self.increments == other.increments
        )

    @property
    def dims(self) -> list:
        return [s.dim for s in self.spaces]

    def branches(self, v: int) -> list:
        """Cumulative incoming-edge spaces of ``v``, ordered by parent id."""
        return [self.edge_spaces[k] for k in sorted(self.edge_spaces) if k[1] == v]

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "n": self.n,
            "q": self.field.q,
            "poly": self.field.reduction_polynomial,
            "source": self.source,
            "spaces": [s.to_dict() for s in self.spaces],
            "edge_spaces": [{"tail": k[0], "head": k[1], "space": s.to_dict()} for k, s in sorted(self.edge_spaces.items())],
            "increments": [{"tail": k[0], "head": k[1], "space": s.to_dict()} for k, s in sorted(self.increments.items())],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SnapshotSet":
        F = field_new(int(data["q"]), data.get("poly"))
        spaces = tuple(RowSpace.from_dict(s, F) for s in data["spaces"])
        es = {(x["tail"], x["head"]): RowSpace.from_dict(x["space"], F) for x in data["edge_spaces"]}
        inc = {(x["tail"], x["head"]): RowSpace.from_dict(x["space"], F) for x in data["increments"]}
        return cls(int(data["t"]), int(data["n"]), F, int(data["source"]), spaces, es, inc)

    # compact binary: header, then each space as (dim, packed entries)
    _MAGIC = b"SNC1"

    def to_bytes(self) -> bytes:
        bits = max(1, (self.field.q - 1).bit_length())
        amb = self.spaces[0].ambient_dim if self.spaces else self.n
        out = [self._MAGIC, struct.pack("<IIIIIII", self.t, self.n, self.field.q, self.field.reduction_polynomial or 0,
                                        self.source, amb, len(self.spaces))]

        def pack(s: RowSpace):
            out.append(struct.pack("<I", s.dim))
            if s.dim:
                b = ((s.basis[..., None] >> np.arange(bits)) & 1).astype(np.uint8).ravel()
                out.append(np.packbits(b).tobytes())

        for s in self.spaces:
            pack(s)
        for group in (self.edge_spaces, self.increments):
            out.append(struct.pack("<I", len(group)))
            for (a, b_), s in sorted(group.items()):
                out.append(struct.pack("<II", a, b_))
                pack(s)
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "SnapshotSet":
        if data[:4] != cls._MAGIC:
            raise ValueError("not a snapshot file")
        t, n, q, poly, source, amb, count = struct.unpack_from("<IIIIIII", data, 4)
        F = field_new(q, poly or None)
        bits = max(1, (q - 1).bit_length())
        pos = 4 + 28

        def unpack():
            nonlocal pos
            (d,) = struct.unpack_from("<I", data, pos)
            pos += 4
            if d == 0:
                return rref(F, np.zeros((0, amb), dtype=np.int64), amb)
            nbits = d * amb * bits
            nbytes = (nbits + 7) // 8
            raw = np.unpackbits(np.frombuffer(data, dtype=np.uint8, count=nbytes, offset=pos))[:nbits]
            pos += nbytes
            vals = (raw.reshape(d, amb, bits).astype(np.int64) << np.arange(bits)).sum(axis=2)
            return rref(F, vals, amb)

        spaces = tuple(unpack() for _ in range(count))
        groups = []
        for _ in range(2):
            (m,) = struct.unpack_from("<I", data, pos)
            pos += 4
            g = {}
            for _ in range(m):
                a, b_ = struct.unpack_from("<II", data, pos)
                pos += 8
                g[(a, b_)] = unpack()
            groups.append(g)
        return cls(t, n, F, source, spaces, groups[0], groups[1])


def snapshot(trace: Trace, t: int) -> SnapshotSet:
    trace._check_t(t)
    net = trace.net
    spaces = tuple(trace.space(v, t) for v in range(net.size))
    es, inc = {}, {}
    for ei, e in enumerate(net.edges):
        es[e.key] = trace.edge_space(ei, t)
        inc[e.key] = trace.edge_increment(ei, t) if t >= 1 else zero_space(trace.field, trace.ambient)
    return SnapshotSet(t, trace.n, trace.field, net.source, spaces, es, inc)


def containment_chain_holds(trace: Trace, t: int) -> bool:
    """On a tree: Π_u(t) ⊆ Π_{P(u)}(t) for every non-source u."""
    net = trace.net
    for v in range(net.size):
        if v == net.source:
            continue
        for p in net.parents(v):
            if not trace.space(v, t) <= trace.space(p, t):
                return False
    return True


def innovation_fraction(trace: Trace) -> Fraction:
    ss = steady_state(trace)
    return Fraction(ss.exact_node_slots, ss.total_node_slots or 1)
