"""Monte-Carlo suites for the random-subspace lemmas and the steady-state
results.

Each suite returns :class:`CheckResult` records: an empirical frequency, a
bound and the direction of the comparison.  Tolerance constants default to
5 (5r for general position) and can be overridden per call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dissemination import INF, RunConfig, minimal_sufficient_n, run, steady_state
from .finite_field import FieldSpec, field_new, make_rng
from .network import longest_path, random_dag
from .subspace import (
    intersect_dim,
    is_subspace_of,
    random_subspace,
    random_vectors,
    rref,
    sample_from,
    sum_spaces,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    params: dict
    trials: int
    hits: int
    bound: float
    direction: str  # ">=" (frequency must reach the bound) or "<="

    @property
    def frequency(self) -> float:
        return self.hits / self.trials if self.trials else 0.0

    @property
    def passed(self) -> bool:
        f = self.frequency
        return f >= self.bound if self.direction == ">=" else f <= self.bound

    def to_row(self) -> dict:
        return {
            "check": self.name,
            "params": ";".join(f"{k}={v}" for k, v in sorted(self.params.items())),
            "trials": self.trials,
            "hits": self.hits,
            "frequency": f"{self.frequency:.6f}",
            "bound": f"{self.bound:.6f}",
            "direction": self.direction,
            "passed": int(self.passed),
        }


def _rng(seed, tag: int) -> np.random.Generator:
    return make_rng(np.random.SeedSequence([seed, tag]))


def lemma1_full_rank(F: FieldSpec, n: int, m: int, trials: int, seed=0, c: float = 5) -> CheckResult:
    """m uniform vectors of F_q^n span min(m, n) dimensions."""
    rng = _rng(seed, 1)
    want = min(m, n)
    hits = sum(rref(F, random_vectors(F, m, n, rng), n).dim == want for _ in range(trials))
    return CheckResult("lemma1_full_rank", {"n": n, "m": m, "q": F.q}, trials, hits, 1 - c / F.q, ">=")


def lemma2_subset_capture(F: FieldSpec, n: int, m: int, trials: int, seed=0, c: float = 5,
                          d1: int = 3, d12: int = 2, d2: int = 4) -> CheckResult:
    """m samples of Π1 all landing in Π2, where Π1 ⊄ Π2.

    With dim(Π1 ∩ Π2) = d1 − 1 each sample is captured with probability
    exactly 1/q, the worst case.
    """
    rng = _rng(seed, 2)
    common = random_subspace(F, n, d12, rng)
    while common.dim != d12:
        common = random_subspace(F, n, d12, rng)
    # extend the common part separately on each side
    while True:
        p1 = sum_spaces(common, random_subspace(F, n, d1 - d12, rng))
        p2 = sum_spaces(common, random_subspace(F, n, d2 - d12, rng))
        if p1.dim == d1 and p2.dim == d2 and intersect_dim(p1, p2) == d12:
            break
    hits = 0
    for _ in range(trials):
        s = rref(F, sample_from(p1, m, rng), n)
        hits += is_subspace_of(s, p2)
    return CheckResult(
        "lemma2_subset_capture",
        {"n": n, "m": m, "q": F.q, "d1": d1, "d2": d2, "d12": d12},
        trials,
        hits,
        c * F.q ** (-m),
        "<=",
    )


def lemma3_intersection(F: FieldSpec, n: int, k: int, m: int, trials: int, seed=0, c: float = 5) -> CheckResult:
    """dim(Π ∩ Π_k) = (min(m, n) + k − n)^+ for Π spanned by m uniform vectors."""
    rng = _rng(seed, 3)
    pk = random_subspace(F, n, k, rng)
    while pk.dim != k:
        pk = random_subspace(F, n, k, rng)
    want = max(min(m, n) + k - n, 0)
    hits = sum(intersect_dim(random_subspace(F, n, m, rng), pk) == want for _ in range(trials))
    return CheckResult("lemma3_intersection", {"n": n, "k": k, "m": m, "q": F.q}, trials, hits, 1 - c / F.q, ">=")


def corollary1_expected(d1: int, d2: int, d12: int, m1: int, m2: int) -> int:
    pos = lambda x: max(x, 0)
    return min(d12, pos(m1 + m2 - (d1 + d2 - d12)), pos(m1 - (d1 - d12)), pos(m2 - (d2 - d12)))


def corollary1_joint(F: FieldSpec, n: int, d1: int, d2: int, d12: int, m1: int, m2: int, trials: int,
                     seed=0, c: float = 5) -> CheckResult:
    """Intersection of samples drawn from two overlapping subspaces."""
    rng = _rng(seed, 4)
    while True:
        common = random_subspace(F, n, d12, rng)
        p1 = sum_spaces(common, random_subspace(F, n, d1 - d12, rng))
        p2 = sum_spaces(common, random_subspace(F, n, d2 - d12, rng))
        if p1.dim == d1 and p2.dim == d2 and intersect_dim(p1, p2) == d12:
            break
    want = corollary1_expected(d1, d2, d12, m1, m2)
    hits = 0
    for _ in range(trials):
        h1 = rref(F, sample_from(p1, m1, rng), n)
        h2 = rref(F, sample_from(p2, m2, rng), n)
        hits += intersect_dim(h1, h2) == want
    return CheckResult(
        "corollary1_joint",
        {"n": n, "d1": d1, "d2": d2, "d12": d12, "m1": m1, "m2": m2, "q": F.q},
        trials,
        hits,
        1 - c / F.q,
        ">=",
    )


def theorem1_general_position(F: FieldSpec, n: int, dims: tuple, m: int, trials: int, seed=0,
                              c: float = 5) -> CheckResult:
    """A random m-vector span meets each fixed Π_i in max(d_i + d − n, 0)
    dimensions, d being its own dimension."""
    rng = _rng(seed, 5)
    family = []
    for d in dims:
        s = random_subspace(F, n, d, rng)
        while s.dim != d:
            s = random_subspace(F, n, d, rng)
        family.append(s)
    hits = 0
    for _ in range(trials):
        p = random_subspace(F, n, m, rng)
        hits += all(intersect_dim(s, p) == max(s.dim + p.dim - n, 0) for s in family)
    r = len(dims)
    return CheckResult(
        "theorem1_general_position",
        {"n": n, "dims": "/".join(map(str, dims)), "m": m, "q": F.q, "r": r},
        trials,
        hits,
        1 - c * r / F.q,
        ">=",
    )


def subspace_suites(q: int = 257, trials: int = 10_000, seed=0, c: float = 5) -> list:
    """All random-subspace checks at the default parameters."""
    F = field_new(q)
    out = [lemma1_full_rank(F, 8, m, trials, seed, c) for m in (4, 8, 12)]
    out += [lemma2_subset_capture(F, 8, m, trials, seed, c) for m in (1, 2)]
    out.append(lemma3_intersection(F, 8, 5, 6, trials, seed, c))
    out.append(corollary1_joint(F, 10, 6, 6, 3, 5, 5, trials, seed, c))
    out.append(theorem1_general_position(F, 8, (3, 5, 6), 4, trials, seed, c))
    return out


@dataclass
class SteadyStateRun:
    index: int
    size: int
    D: int
    n: int
    T_s: float
    T_s_rate: float
    exact: int
    total: int


def steady_state_runs(runs: int = 50, q: int = 256, seed=0, max_nodes: int = 12, max_rate: int = 2,
                      density: float = 0.4) -> list:
    """Random DAGs with n set to the smallest value satisfying
    2D − 1 < ⌊n / c_max⌋, run to completion under the default waiting rule."""
    F = field_new(q)
    out = []
    for i in range(runs):
        rng = make_rng(np.random.SeedSequence([seed, 6, i]))
        size = int(rng.integers(3, max_nodes + 1))
        net = random_dag(size, density, rng, max_rate=max_rate)
        D = longest_path(net)
        n = minimal_sufficient_n(net)
        cfg = RunConfig(net, n, field=F, horizon=n + 4 * D + 20, seed=int(rng.integers(2**31)))
        ss = steady_state(run(cfg))
        out.append(SteadyStateRun(i, size, D, n, ss.T_s, ss.T_s_rate, ss.exact_node_slots, ss.total_node_slots))
    return out


def steady_state_suites(runs: int = 50, q: int = 256, seed=0, min_fraction: float = 0.99) -> list:
    """The T_s <= 2D - 1 bound (every run), its rate-only variant, and the
    fraction of in-window node-slots gaining exactly c_v."""
    rs = steady_state_runs(runs, q, seed)
    bound_ok = sum(r.T_s != INF and r.T_s <= 2 * r.D - 1 for r in rs)
    rate_ok = sum(r.T_s_rate != INF and r.T_s_rate <= 2 * r.D - 1 for r in rs)
    exact = sum(r.exact for r in rs)
    total = sum(r.total for r in rs)
    return [
        CheckResult("lemma5_Ts_bound", {"runs": runs, "q": q}, runs, bound_ok, 1.0, ">="),
        CheckResult("lemma5_Ts_rate_bound", {"runs": runs, "q": q}, runs, rate_ok, 1.0, ">="),
        CheckResult("theorem2_exact_innovation", {"runs": runs, "q": q}, total, exact, min_fraction, ">="),
    ]
