"""Independent brute-force oracles shared by the test modules.

Nothing here calls into the package's linear algebra: subspaces of F_2^n
are plain sets of bitmask vectors closed under XOR, GF(2^k) products are
schoolbook shift-and-reduce, and min-cuts enumerate every source side.
"""

import itertools


def gf2k_mul(a, b, poly, k):
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a >> k:
            a ^= poly
    return r


def span_f2(vectors):
    """All XOR combinations of the given bitmasks."""
    space = {0}
    for v in vectors:
        space |= {x ^ v for x in space}
    return frozenset(space)


def all_subspaces_f2(n):
    seen = {frozenset({0})}
    frontier = [frozenset({0})]
    while frontier:
        nxt = []
        for s in frontier:
            for v in range(1 << n):
                if v not in s:
                    t = frozenset(s | {x ^ v for x in s})
                    if t not in seen:
                        seen.add(t)
                        nxt.append(t)
        frontier = nxt
    return sorted(seen, key=lambda s: (len(s), sorted(s)))


def dim_f2(space):
    return len(space).bit_length() - 1


def basis_f2(space, n):
    """A greedy basis of a set-represented subspace, as 0/1 rows."""
    rows, cur = [], frozenset({0})
    for v in sorted(space):
        if v not in cur:
            rows.append(v)
            cur = span_f2(rows)
    return [[(v >> (n - 1 - j)) & 1 for j in range(n)] for v in rows]


def rows_to_masks(rows, n):
    return [sum(int(x) << (n - 1 - j) for j, x in enumerate(r)) for r in rows]


def brute_min_cut(nodes, source, edges, target):
    """Min over every source side containing S and not ``target`` of the
    capacity leaving it.  ``edges`` are (tail, head, rate)."""
    others = [v for v in nodes if v not in (source, target)]
    best = None
    for k in range(len(others) + 1):
        for side in itertools.combinations(others, k):
            A = {source, *side}
            cap = sum(r for t, h, r in edges if t in A and h not in A)
            best = cap if best is None else min(best, cap)
    return best


def gaussian_count(n, i):
    return sum(1 for s in all_subspaces_f2(n) if dim_f2(s) == i)
