"""End-to-end acceptance gate: one test per shipped correctness claim.

Each test runs the corresponding claim check from ``sohb.acceptance`` and
prints its PASS/FAIL line. These are the expensive whole-pipeline checks
(several minutes total); the per-module suites cover the same ground at
unit granularity.
"""

from sohb import acceptance


def check(fn):
    result = fn()
    print(result.line(), flush=True)
    assert result.passed, result.line()
    return result


def test_pairing_identity():
    check(acceptance.criterion_1)


def test_target_equivalence():
    check(acceptance.criterion_2)


def test_sampler_first_moment():
    check(acceptance.criterion_3)


def test_jump_stationary_law():
    check(acceptance.criterion_4)


def test_gradual_weak_convergence():
    check(acceptance.criterion_5)


def test_representation_equivalence_in_law():
    check(acceptance.criterion_6)


def test_invariant_profile_and_constants():
    check(acceptance.criterion_7)


def test_jump_adjoint_invariant():
    check(acceptance.criterion_8)


def test_derivative_machinery():
    check(acceptance.criterion_9)


def test_macro_coevolution_consistency():
    check(acceptance.criterion_10)


def test_neighbor_scaling():
    check(acceptance.criterion_11)
