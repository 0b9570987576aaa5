import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from subspacenc.finite_field import (
    DivisionByZero,
    NonPrimePower,
    ReduciblePolynomial,
    field_new,
    make_rng,
    sample_uniform,
)

from oracles import gf2k_mul

GF256 = field_new(256)
GF7 = field_new(7)
GF16 = field_new(16)
GF5 = field_new(5)


def test_aes_inverse_pair():
    assert GF256.mul(0x53, 0xCA) == 1
    assert GF256.inv(0x53) == 0xCA


def test_prime_field_inverse():
    assert GF7.inv(3) == 5


@pytest.mark.parametrize("q", [6, 9, 10, 12, 1, 2**17])
def test_unsupported_orders_rejected(q):
    with pytest.raises(NonPrimePower):
        field_new(q)


def test_small_prime_examples():
    assert GF5.add(3, 4) == 2 and GF5.mul(3, 4) == 2
    assert GF5.pow(2, 4) == 1
    assert GF256.inv(1) == 1


def test_reducible_polynomial_rejected():
    with pytest.raises(ReduciblePolynomial):
        field_new(256, 0x100)  # x^8 is reducible


def test_division_by_zero():
    with pytest.raises((DivisionByZero, ZeroDivisionError)):
        GF256.inv(0)


def test_gf256_matches_schoolbook_exhaustively():
    for a in range(256):
        for b in range(0, 256, 7):
            assert GF256.mul(a, b) == gf2k_mul(a, b, 0x11B, 8)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 6), st.integers(0, 6), st.integers(0, 6))
def test_gf7_matches_integers_mod_7(a, b, c):
    assert GF7.mul(a, b) == a * b % 7
    assert GF7.add(a, b) == (a + b) % 7
    assert GF7.sub(a, b) == (a - b) % 7
    assert GF7.mul(a, GF7.add(b, c)) == GF7.add(GF7.mul(a, b), GF7.mul(a, c))


@settings(max_examples=200, deadline=None)
@given(st.sampled_from([GF256, GF5, GF16, field_new(257), field_new(2**16)]), st.data())
def test_field_axioms(F, data):
    a = data.draw(st.integers(0, F.q - 1))
    b = data.draw(st.integers(0, F.q - 1))
    c = data.draw(st.integers(0, F.q - 1))
    assert F.mul(a, b) == F.mul(b, a)
    assert F.mul(F.mul(a, b), c) == F.mul(a, F.mul(b, c))
    assert F.add(F.add(a, b), c) == F.add(a, F.add(b, c))
    assert F.add(a, F.neg(a)) == 0
    assert F.mul_direct(a, b) == F.mul(a, b)
    if a:
        assert F.mul(a, F.inv(a)) == 1
        assert F.div(F.mul(a, b), a) == b
        assert F.pow(a, F.q - 1) == 1


def test_multiplicative_group_is_cyclic_via_tables():
    F = GF16
    gen = F.exp[1]
    seen = {F.pow(gen, k) for k in range(F.q - 1)}
    assert seen == set(range(1, F.q))


def test_rng_determinism():
    a = sample_uniform(GF256, make_rng(5), size=20)
    b = sample_uniform(GF256, make_rng(5), size=20)
    assert np.array_equal(a, b)
    assert a.min() >= 0 and a.max() < 256


def test_characteristic_two_and_exhaustive_pairs_gf256():
    for a in range(256):
        assert GF256.add(a, a) == 0
        for b in range(256):
            assert GF256.mul(a, b) == GF256.mul(b, a)
            assert GF256.mul_direct(a, b) == GF256.mul(a, b)
        if a:
            assert GF256.mul(a, GF256.inv(a)) == 1


def test_exhaustive_axioms_gf16_triples():
    F = GF16
    for a in range(16):
        for b in range(16):
            for c in range(16):
                assert F.mul(a, F.add(b, c)) == F.add(F.mul(a, b), F.mul(a, c))
                assert F.mul(F.mul(a, b), c) == F.mul(a, F.mul(b, c))


def test_gf2_sampling_frequency():
    x = sample_uniform(field_new(2), make_rng(1), size=100_000)
    assert 0.49 <= x.mean() <= 0.51


def test_gf257_chi_square_uniformity():
    from scipy.stats import chisquare

    x = sample_uniform(field_new(257), make_rng(2), size=1_000_000)
    counts = np.bincount(x, minlength=257)
    assert chisquare(counts).pvalue > 1e-3
