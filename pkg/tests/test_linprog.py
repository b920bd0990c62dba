import numpy as np
import pytest

from vopt.linprog import (
    LpProblem,
    MultiplierWitness,
    StrictWitness,
    decide_alternative,
    solve_lp,
    verify_certificate,
)

from _oracles import multiplier_system_solvable, random_instance, strict_system_solvable


def test_known_optimum_and_duals():
    # min -x1 - x2: optimum (3, 0.5), objective -3.5; both row prices -1/2
    out = solve_lp(
        LpProblem(
            c=np.array([-1.0, -1.0]),
            A=np.array([[1.0, 2.0], [1.0, 0.0]]),
            senses=["<=", "<="],
            b=np.array([4.0, 3.0]),
        )
    )
    assert out.status == "optimal"
    np.testing.assert_allclose(out.x, [3.0, 0.5], atol=1e-9)
    assert out.objective == pytest.approx(-3.5)
    np.testing.assert_allclose(out.y, [-0.5, -0.5], atol=1e-9)
    assert out.objective == pytest.approx(float(out.y @ [4.0, 3.0]))


def test_free_variable_equality_max():
    # max x1 s.t. x1 + x2 = 3, x1 - x2 <= 1, x1 free, x2 >= 0
    out = solve_lp(
        LpProblem(
            c=np.array([1.0, 0.0]),
            A=np.array([[1.0, 1.0], [1.0, -1.0]]),
            senses=["=", "<="],
            b=np.array([3.0, 1.0]),
            free=(0,),
            maximize=True,
        )
    )
    assert out.status == "optimal"
    np.testing.assert_allclose(out.x, [2.0, 1.0], atol=1e-9)
    assert out.objective == pytest.approx(2.0)
    assert float(out.y @ [3.0, 1.0]) == pytest.approx(2.0)  # strong duality


def test_infeasible_and_unbounded():
    bad = solve_lp(
        LpProblem(np.zeros(1), np.array([[1.0]]), ["<="], np.array([-1.0]))
    )
    assert bad.status == "infeasible"
    unb = solve_lp(
        LpProblem(np.array([-1.0]), np.array([[1.0]]), [">="], np.array([0.0]))
    )
    assert unb.status == "unbounded"


def test_normalized_feasibility_contradiction():
    # y = 0 and sum y = 1 cannot both hold
    out = solve_lp(
        LpProblem(np.zeros(1), np.array([[1.0], [1.0]]), ["=", "="], np.array([0.0, 1.0]))
    )
    assert out.status == "infeasible"


def test_degenerate_rhs_terminates():
    # Bland's rule must leave this degenerate vertex without cycling
    out = solve_lp(
        LpProblem(
            c=np.array([-0.75, 150.0, -0.02, 6.0]),
            A=np.array(
                [
                    [0.25, -60.0, -0.04, 9.0],
                    [0.5, -90.0, -0.02, 3.0],
                    [0.0, 0.0, 1.0, 0.0],
                ]
            ),
            senses=["<=", "<=", "<="],
            b=np.array([0.0, 0.0, 1.0]),
        )
    )
    assert out.status == "optimal"
    assert out.objective == pytest.approx(-0.05)


def test_strict_side_simple():
    # single strict column (2, 0): x = (-1, 0) works
    cert = decide_alternative(np.array([[2.0], [0.0]]))
    assert isinstance(cert, StrictWitness)
    assert verify_certificate(cert, np.array([[2.0], [0.0]]))


def test_multiplier_side_zero_matrix():
    A = np.zeros((2, 2))
    cert = decide_alternative(A)
    assert isinstance(cert, MultiplierWitness)
    assert verify_certificate(cert, A)
    assert cert.y.sum() == pytest.approx(1.0)


def test_opposed_columns_force_multipliers():
    # columns g and -g cannot both be strictly negative against any x
    A = np.array([[1.0, -1.0], [2.0, -2.0]])
    cert = decide_alternative(A)
    assert isinstance(cert, MultiplierWitness)
    assert verify_certificate(cert, A)


def test_u_block_changes_answer():
    # alone, the column (1, 0) admits x = (-1, 0); forcing u >= 0 through a
    # positive C row cannot block that, but an opposing C sign can matter
    A = np.array([[1.0], [0.0]])
    C = np.array([[-5.0]])
    cert = decide_alternative(A, C=C)
    assert isinstance(cert, StrictWitness)
    assert verify_certificate(cert, A, C=C)


def test_weak_block_restricts_strict_side():
    # strict column e1 with weak columns +/- e1: B rows force x1 = 0 exactly,
    # so the strict row cannot be met and multipliers must exist
    A = np.array([[1.0], [0.0]])
    B = np.array([[1.0, -1.0], [0.0, 0.0]])
    cert = decide_alternative(A, B=B)
    assert isinstance(cert, MultiplierWitness)
    assert verify_certificate(cert, A, B=B)


def test_exclusivity_sample():
    rng = np.random.default_rng(7)
    for _ in range(120):
        A, B, C, D = random_instance(rng, max_dim=4)
        cert = decide_alternative(A, B, C, D)
        assert verify_certificate(cert, A, B, C, D)
        s7 = strict_system_solvable(A, B, C, D)
        s8 = multiplier_system_solvable(A, B, C, D)
        assert s7 != s8, "exactly one system must be solvable"
        assert isinstance(cert, StrictWitness) == s7


def test_random_lp_duality_gap():
    rng = np.random.default_rng(3)
    checked = 0
    for _ in range(120):
        m = int(rng.integers(1, 5))
        n = int(rng.integers(1, 5))
        A = rng.uniform(-2, 2, size=(m, n))
        b = rng.uniform(-1, 3, size=m)
        c = rng.uniform(-2, 2, size=n)
        senses = [("<=", ">=", "=")[int(k)] for k in rng.integers(0, 3, size=m)]
        out = solve_lp(LpProblem(c, A, senses, b))
        if out.status != "optimal":
            continue
        checked += 1
        scale = 1.0 + abs(out.objective)
        assert abs(out.objective - float(out.y @ b)) <= 1e-8 * scale
        # primal feasibility at tolerance
        resid = A @ out.x - b
        for i, s in enumerate(senses):
            if s == "<=":
                assert resid[i] <= 1e-9 * scale
            elif s == ">=":
                assert resid[i] >= -1e-9 * scale
            else:
                assert abs(resid[i]) <= 1e-9 * scale
        assert (out.x >= -1e-9).all()
    assert checked > 20
