import pytest

from subspacenc.finite_field import field_new
from subspacenc.lemmas import (
    CheckResult,
    corollary1_expected,
    corollary1_joint,
    lemma1_full_rank,
    lemma2_subset_capture,
    lemma3_intersection,
    steady_state_runs,
    subspace_suites,
    theorem1_general_position,
)

GF257 = field_new(257)


def test_check_result_directions():
    assert CheckResult("x", {}, 100, 99, 0.98, ">=").passed
    assert not CheckResult("x", {}, 100, 97, 0.98, ">=").passed
    assert CheckResult("x", {}, 100, 1, 0.02, "<=").passed
    assert CheckResult("x", {}, 100, 1, 0.02, "<=").to_row()["passed"] == 1


def test_corollary1_expected_cases():
    # each sample fills its private part first, the rest lands in the overlap
    assert corollary1_expected(6, 6, 3, 5, 5) == 1  # two 2-dim pieces of a 3-dim overlap
    assert corollary1_expected(6, 6, 3, 6, 6) == 3
    assert corollary1_expected(6, 6, 3, 2, 6) == 0
    assert corollary1_expected(4, 4, 0, 4, 4) == 0


@pytest.mark.parametrize("fn,args", [
    (lemma1_full_rank, (8, 4)),
    (lemma1_full_rank, (8, 12)),
    (lemma3_intersection, (8, 5, 6)),
    (corollary1_joint, (10, 6, 6, 3, 5, 5)),
    (theorem1_general_position, (8, (3, 5, 6), 4)),
])
def test_high_probability_checks_small(fn, args):
    r = fn(GF257, *args, trials=1500, seed=1)
    assert r.passed, r.to_row()


def test_lemma2_capture_is_rare():
    r = lemma2_subset_capture(GF257, 8, 1, trials=3000, seed=2)
    assert r.passed, r.to_row()
    # with a single sample the capture frequency sits near 1/q
    assert r.frequency <= 5 / 257


def test_small_field_makes_failures_visible():
    # over GF(2) a square random matrix is singular often, so the bound fails
    r = lemma1_full_rank(field_new(2), 6, 6, trials=500, seed=0)
    assert 0.2 < r.frequency < 0.4


def test_suite_shape():
    names = [r.name for r in subspace_suites(trials=50)]
    assert names.count("lemma1_full_rank") == 3 and names.count("lemma2_subset_capture") == 2
    assert {"lemma3_intersection", "corollary1_joint", "theorem1_general_position"} <= set(names)


def test_steady_state_runs_record_bounds():
    rs = steady_state_runs(runs=4, seed=3)
    for r in rs:
        assert r.T_s_rate <= r.T_s
        assert r.total >= r.exact
