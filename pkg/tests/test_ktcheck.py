import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import vopt
from pathlib import Path

from vopt.ktcheck import (
    FIRST_ORDER_ONLY,
    FRITZ_JOHN,
    MODE_SUPPORT,
    NOT_STATIONARY,
    SECOND_ORDER_KT,
    NotCritical,
    classify_point,
    first_order_kt,
    primal_necessary,
    second_order_multipliers,
)
from vopt.problem import load_problem, parse_problem, sample_critical_directions

FIX = Path(vopt.__file__).parent / "fixtures"

ROOT2 = np.sqrt(2.0)


@pytest.fixture(scope="module")
def exA():
    return load_problem(FIX / "exA.vopt")


@pytest.fixture(scope="module")
def exB():
    return load_problem(FIX / "exB.vopt")


@pytest.fixture(scope="module")
def exBprime():
    return load_problem(FIX / "exBprime.vopt")


@pytest.fixture(scope="module")
def exC():
    return load_problem(FIX / "exC.vopt")


# ---------------------------------------------------------------------------
# first-order


def test_first_order_at_disk_boundary(exA):
    pair = first_order_kt(exA, [1.0, 0.0])
    assert pair is not None
    np.testing.assert_allclose(pair.mu, [0.0], atol=1e-7)
    assert pair.lam.sum() == pytest.approx(1.0, abs=1e-9)
    assert (pair.lam >= 0).all()
    assert pair.residual <= 1e-7


def test_first_order_segment_multipliers(exC):
    # Gradients (2,-2) and (-1,1): cancellation forces lam = (1/3, 2/3).
    pair = first_order_kt(exC, [1.0, -1.0])
    assert pair is not None
    np.testing.assert_allclose(pair.lam, [1 / 3, 2 / 3], atol=1e-6)
    np.testing.assert_allclose(pair.mu, [0.0], atol=1e-9)
    assert pair.residual <= 1e-7


def test_first_order_none_off_stationary_set(exA):
    assert first_order_kt(exA, [0.5, 0.0]) is None


def test_first_order_at_origin(exA):
    pair = first_order_kt(exA, [0.0, 0.0])
    assert pair is not None
    np.testing.assert_allclose(pair.mu, [0.0], atol=1e-9)


def test_first_order_boundary_of_quadrant(exBprime):
    # At (1,0) the second coordinate needs mu_2 = 4 lam_1 + 2 lam_2 >= 2.
    pair = first_order_kt(exBprime, [1.0, 0.0])
    assert pair is not None
    assert pair.mu[0] == pytest.approx(0.0, abs=1e-9)
    assert pair.mu[1] >= 2.0 - 1e-6
    assert pair.residual <= 1e-7


def test_first_order_fritz_john_normalization(exBprime):
    pair = first_order_kt(exBprime, [1.0, 0.0], normalization=FRITZ_JOHN)
    assert pair is not None
    total = pair.lam.sum() + pair.mu.sum()
    assert total == pytest.approx(1.0, abs=1e-9)


# ---------------------------------------------------------------------------
# second-order along single directions


def test_second_order_none_at_unconstrained_origin(exB):
    # Both Hessians are diag(-4, 4) at the origin: along (1,0) every convex
    # combination has curvature -4.
    pair = second_order_multipliers(exB, [0.0, 0.0], [1.0, 0.0])
    assert pair is None


def test_second_order_some_on_disk_boundary(exA):
    pair = second_order_multipliers(exA, [1.0, 0.0], [0.0, 1.0])
    assert pair is not None
    assert pair.curvature is not None and pair.curvature >= -1e-9
    assert pair.residual <= 1e-7
    assert pair.supported_on((0, 1), (0,))


def test_second_order_none_on_segment(exC):
    d = np.array([1.0, 1.0]) / ROOT2
    assert second_order_multipliers(exC, [1.0, -1.0], d) is None


def test_second_order_zero_direction_reduces_to_first_order(exC):
    pair = second_order_multipliers(exC, [1.0, -1.0], [0.0, 0.0])
    assert pair is not None
    np.testing.assert_allclose(pair.lam, [1 / 3, 2 / 3], atol=1e-6)
    assert pair.curvature == pytest.approx(0.0, abs=1e-12)


def test_second_order_rejects_noncritical_direction(exA):
    with pytest.raises(NotCritical):
        second_order_multipliers(exA, [1.0, 0.0], [1.0, 0.0])


def test_second_order_support_mode_agrees_on_fixtures(exA, exC):
    for P, x, d in [
        (exA, [1.0, 0.0], [0.0, 1.0]),
        (exC, [1.0, -1.0], np.array([1.0, 1.0]) / ROOT2),
        (exC, [1.0, -1.0], [0.0, 0.0]),
    ]:
        plain = second_order_multipliers(P, x, d)
        support = second_order_multipliers(P, x, d, mode=MODE_SUPPORT)
        assert (plain is None) == (support is None)


# ---------------------------------------------------------------------------
# classification


def test_classify_origin_first_order_only(exA):
    v = classify_point(exA, [0.0, 0.0], dirs=64, seed=0)
    assert v.level == FIRST_ORDER_ONLY
    assert v.first_order is not None
    assert v.directions_tested >= 64
    assert any(o.multipliers is None for o in v.per_direction)


def test_classify_boundary_second_order(exA):
    for x in ([1.0, 0.0], [-1.0, 0.0]):
        v = classify_point(exA, x, dirs=64, seed=0)
        assert v.level == SECOND_ORDER_KT
        assert all(o.multipliers is not None for o in v.per_direction)
        assert v.directions_tested > 0


def test_classify_not_stationary(exA):
    v = classify_point(exA, [0.5, 0.0])
    assert v.level == NOT_STATIONARY
    assert v.first_order is None
    assert v.directions_tested == 0


def test_classify_deterministic(exA):
    a = classify_point(exA, [0.0, 0.0], dirs=32, seed=3)
    b = classify_point(exA, [0.0, 0.0], dirs=32, seed=3)
    assert a.level == b.level
    assert a.directions_tested == b.directions_tested
    for oa, ob in zip(a.per_direction, b.per_direction):
        np.testing.assert_array_equal(oa.analysis.direction, ob.analysis.direction)


# ---------------------------------------------------------------------------
# primal necessary condition


def test_primal_inconsistent_on_disk_boundary(exA):
    v = primal_necessary(exA, [1.0, 0.0], [0.0, 1.0])
    assert v.status == "Inconsistent"
    assert v.lam is not None and v.lam.sum() + v.mu.sum() == pytest.approx(1.0, abs=1e-9)


def test_primal_consistent_on_segment(exC):
    d = np.array([1.0, 1.0]) / ROOT2
    v = primal_necessary(exC, [1.0, -1.0], d)
    assert v.status == "Consistent"
    z = v.witness
    assert z is not None
    # re-verify the strict system by direct evaluation
    assert 2 * z[0] - 2 * z[1] + (-1.0) < 0
    assert -z[0] + z[1] + 0.0 < 0


def test_primal_inconsistent_when_gradients_vanish(exB):
    v = primal_necessary(exB, [1.0, 0.0], [0.0, 1.0])
    assert v.status == "Inconsistent"


def test_primal_empty_index_sets(exA):
    # At (0.5,0) along (1,0) both objective products are -1.5: critical with
    # no zero products at all.
    v = primal_necessary(exA, [0.5, 0.0], [1.0, 0.0])
    assert v.status == "EmptyIndexSets"


def test_duality_consistency_across_fixture_pairs(exA, exB, exC):
    cases = []
    for P, x in [
        (exA, [1.0, 0.0]),
        (exA, [0.0, 0.0]),
        (exB, [0.0, 0.0]),
        (exB, [1.0, 0.0]),
        (exC, [1.0, -1.0]),
    ]:
        for da in sample_critical_directions(P, x, count=16, seed=1):
            cases.append((P, x, da))
    assert len(cases) > 20
    for P, x, da in cases:
        v = primal_necessary(P, x, da)
        if v.status == "EmptyIndexSets":
            continue
        pair = second_order_multipliers(P, x, da, mode=MODE_SUPPORT, normalization=FRITZ_JOHN)
        assert v.inconsistent == (pair is not None), (x, da.direction)


# ---------------------------------------------------------------------------
# invariance


@given(c=st.floats(min_value=0.1, max_value=10.0))
@settings(max_examples=15, deadline=None)
def test_classification_invariant_under_objective_scaling(c):
    text = (
        "var x1 in [-2, 2]\n"
        "var x2 in [-2, 2]\n"
        f"min {c!r}*((x1^2 + x2^2)^2 - 2*x1^2 + 2*x2^2)\n"
        "min (x1^2 - 1)^2 + 2*x2^2\n"
        "st  x1^2 + x2^2 - 1 <= 0\n"
    )
    P = parse_problem(text)
    assert classify_point(P, [0.0, 0.0], dirs=8, seed=0).level == FIRST_ORDER_ONLY
    assert classify_point(P, [1.0, 0.0], dirs=8, seed=0).level == SECOND_ORDER_KT
    assert classify_point(P, [0.5, 0.0], dirs=8, seed=0).level == NOT_STATIONARY
