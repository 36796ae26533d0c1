import numpy as np
import pytest
from scipy.optimize import linprog

from stratcomm.simplex import Infeasible, IterationLimit, Unbounded, linprog_equality


def test_random_lps_match_reference_solver():
    rng = np.random.default_rng(0)
    for _ in range(200):
        m, n = rng.integers(1, 5), rng.integers(5, 20)
        A = rng.normal(size=(m, n))
        b = A @ rng.random(n)
        c = rng.random(n)
        ours = linprog_equality(c, A, b)
        ref = linprog(c, A_eq=A, b_eq=b, method="highs")
        assert ours.value == pytest.approx(ref.fun, abs=1e-8)
        np.testing.assert_allclose(A @ ours.x, b, atol=1e-8)
        assert np.count_nonzero(ours.x > 1e-12) <= m


def test_duals_certify_optimality():
    rng = np.random.default_rng(1)
    for _ in range(50):
        A = rng.normal(size=(3, 10))
        b = A @ rng.random(10)
        flip = -np.sign(b[0])  # a negative right-hand side exercises the row flip
        A[0] *= flip
        b[0] *= flip
        c = rng.random(10)
        res = linprog_equality(c, A, b)
        reduced = c - res.duals @ A
        assert reduced.min() >= -1e-9
        assert res.duals @ b == pytest.approx(res.value, abs=1e-9)


def test_cycling_example_terminates():
    # a classic degenerate instance on which the largest-coefficient rule cycles
    c = np.array([-0.75, 150, -0.02, 6, 0, 0, 0])
    A = np.array([[0.25, -60, -0.04, 9, 1, 0, 0],
                  [0.5, -90, -0.02, 3, 0, 1, 0],
                  [0, 0, 1, 0, 0, 0, 1]])
    b = np.array([0.0, 0.0, 1.0])
    res = linprog_equality(c, A, b, basis=[4, 5, 6])
    assert res.value == pytest.approx(-0.05)


def test_infeasible_and_unbounded():
    with pytest.raises(Infeasible):
        linprog_equality([1, 1], [[1, 1]], [-1])
    with pytest.raises(Unbounded):
        linprog_equality([-1, 0], [[1, -1]], [0])


def test_redundant_rows_are_dropped():
    A = np.array([[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]])
    res = linprog_equality([1.0, 2.0, 3.0], A, [1.0, 2.0])
    assert res.value == pytest.approx(1.0)


def test_supplied_basis_and_iteration_limit():
    A = np.array([[1.0, 1.0, 1.0, 0.0], [1.0, -1.0, 0.0, 1.0]])
    b = np.array([1.0, 0.5])
    c = np.array([-1.0, -2.0, 0.0, 0.0])
    res = linprog_equality(c, A, b, basis=[2, 3])
    assert res.value == pytest.approx(-2.0)
    with pytest.raises(ValueError):
        linprog_equality(c, A, -b, basis=[2, 3])
    with pytest.raises(IterationLimit):
        linprog_equality(c, A, b, basis=[2, 3], max_iter=0)
