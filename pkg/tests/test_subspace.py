import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from subspacenc.finite_field import field_new, make_rng
from subspacenc.subspace import (
    AmbientMismatch,
    Buffer,
    EmptySet,
    RowSpace,
    contains_vector,
    distance_ds,
    full_space,
    gaussian_binomial,
    intersect,
    intersect_dim,
    is_subspace_of,
    random_subspace,
    rref,
    sample_from,
    set_distance_DS,
    subspace_bits,
    sum_spaces,
    zero_space,
)

from oracles import all_subspaces_f2, basis_f2, dim_f2, gaussian_count, rows_to_masks, span_f2

GF2 = field_new(2)
GF256 = field_new(256)
GF257 = field_new(257)


def as_set(space: RowSpace, n: int):
    return span_f2(rows_to_masks(space.basis, n))


def lib(space_set, n):
    return rref(GF2, basis_f2(space_set, n) or np.zeros((0, n), dtype=np.int64), n)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_exhaustive_pairs_against_enumeration(n):
    subs = all_subspaces_f2(n)
    libs = {s: lib(s, n) for s in subs}
    for a, b in itertools.product(subs, repeat=2):
        A, B = libs[a], libs[b]
        assert as_set(A, n) == a
        assert as_set(sum_spaces(A, B), n) == span_f2(a | b)
        assert as_set(intersect(A, B), n) == a & b
        assert distance_ds(A, B) == 2 * dim_f2(span_f2(a | b)) - dim_f2(a) - dim_f2(b)
        assert is_subspace_of(A, B) == (a <= b)
        assert (A == B) == (a == b)


def test_rref_is_canonical_under_row_operations():
    rng = make_rng(3)
    m = rng.integers(0, 256, size=(4, 7))
    a = rref(GF256, m, 7)
    mixer = rng.integers(1, 256, size=(4, 4))
    b = rref(GF256, np.vstack([m, m[::-1]]), 7)
    assert a == b and hash(a) == hash(b)
    assert a.basis.flags.writeable is False


@pytest.mark.parametrize("n", [2, 3])
def test_metric_axioms_exhaustive(n):
    subs = [lib(s, n) for s in all_subspaces_f2(n)]
    for a, b, c in itertools.product(subs, repeat=3):
        assert distance_ds(a, c) <= distance_ds(a, b) + distance_ds(b, c)
    for a, b in itertools.product(subs, repeat=2):
        assert distance_ds(a, b) == distance_ds(b, a)
        assert (distance_ds(a, b) == 0) == (a == b)


def test_gaussian_binomials_match_enumeration():
    assert gaussian_binomial(3, 1, 2) == 7 == gaussian_count(3, 1)
    assert gaussian_binomial(4, 2, 2) == 35 == gaussian_count(4, 2)
    for n in range(5):
        assert gaussian_binomial(n, 0, 5) == 1
        for i in range(n + 1):
            if n <= 4:
                assert gaussian_binomial(n, i, 2) == gaussian_count(n, i)


def test_subspace_bits():
    assert subspace_bits(8, 256) == pytest.approx(8 * 8 / 4 * 8)


def test_set_distance_examples():
    e1 = rref(GF2, [[1, 0]], 2)
    e2 = rref(GF2, [[0, 1]], 2)
    assert set_distance_DS([e1], [e1]) == 0
    assert set_distance_DS([e1], [e2, e1]) == Fraction(1)
    with pytest.raises(EmptySet):
        set_distance_DS([], [e1])


def test_set_distance_against_double_loop():
    rng = make_rng(4)
    A = [random_subspace(GF257, 6, int(k), rng) for k in rng.integers(0, 6, size=4)]
    B = [random_subspace(GF257, 6, int(k), rng) for k in rng.integers(0, 6, size=3)]
    total = 0
    for a in A:
        for b in B:
            total += 2 * sum_spaces(a, b).dim - a.dim - b.dim
    assert set_distance_DS(A, B) == Fraction(total, 12)
    assert set_distance_DS(A, B) == set_distance_DS(B, A)


def test_ambient_mismatch():
    with pytest.raises(AmbientMismatch):
        sum_spaces(zero_space(GF2, 2), zero_space(GF2, 3))


def test_sample_from_closure_and_zero_space():
    rng = make_rng(5)
    s = random_subspace(GF256, 8, 3, rng)
    for v in sample_from(s, 50, rng):
        assert contains_vector(s, v)
    z = sample_from(zero_space(GF256, 5), 5, rng)
    assert z.shape == (5, 5) and not z.any()


def test_sample_from_full_rank_frequency():
    rng = make_rng(6)
    s = random_subspace(GF256, 8, 4, rng)
    hits = sum(rref(GF256, sample_from(s, 4, rng), 8).dim == 4 for _ in range(10_000))
    assert hits / 10_000 >= 1 - 5 / 256


def test_serialization_round_trip():
    rng = make_rng(7)
    s = random_subspace(GF256, 6, 3, rng)
    d = s.to_dict()
    assert set(d) >= {"ambient_dim", "q", "basis"}
    assert RowSpace.from_dict(d, GF256) == s


def test_buffer_tracks_innovation_and_transform():
    rng = make_rng(8)
    b = Buffer(GF256, 5, track=2)
    vs = rng.integers(0, 256, size=(7, 5))
    flags = [b.insert(v) for v in vs]
    assert sum(flags) == 5 == b.dim
    assert not b.insert(vs[0])
    # every basis row is the stated combination of the logged inputs
    from subspacenc import _kernels as K

    again = K.matmul(np.ascontiguousarray(b.transform[:, :7]), np.ascontiguousarray(vs), *GF256.kernel_args)
    assert np.array_equal(again, b.basis)
    assert b.space() == full_space(GF256, 5)


@st.composite
def spaces(draw, F=GF257, n=5):
    k = draw(st.integers(0, 6))
    rows = draw(st.lists(st.lists(st.integers(0, F.q - 1), min_size=n, max_size=n), min_size=k, max_size=k))
    return rref(F, np.array(rows, dtype=np.int64).reshape(k, n), n)


@settings(max_examples=150, deadline=None)
@given(spaces(), spaces())
def test_dimension_formula_and_lattice_laws(a, b):
    s, i = a + b, a & b
    assert s.dim + i.dim == a.dim + b.dim
    assert i <= a and i <= b and a <= s and b <= s
    assert intersect_dim(a, b) == i.dim
    assert a + a == a and a & a == a


@settings(max_examples=100, deadline=None)
@given(spaces(GF256, 4), spaces(GF256, 4))
def test_intersection_members_lie_in_both(a, b):
    i = a & b
    for v in i.basis:
        assert v in a and v in b
