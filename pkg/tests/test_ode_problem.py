import numpy as np
import pytest

from mrtrbdf2.errors import DimensionMismatch, NonFiniteOutput
from mrtrbdf2.ode_problem import (
    ActivePartition,
    EvalCounter,
    OdeProblem,
    eval_jacobian,
    eval_rhs,
    eval_subsystem_rhs,
    subsystem_jacobian,
)


def linear_problem(a):
    a = np.asarray(a, dtype=float)
    return OdeProblem(m=a.shape[0], rhs=lambda t, y: a @ y, jacobian=lambda t, y: a)


def linear_problem_no_jac(a):
    a = np.asarray(a, dtype=float)
    return OdeProblem(m=a.shape[0], rhs=lambda t, y: a @ y)


def test_eval_rhs_linear():
    p = linear_problem(np.diag([-1.0, -2.0]))
    f = eval_rhs(p, 0.3, np.array([1.0, 1.0]))
    assert np.allclose(f, [-1.0, -2.0], rtol=0, atol=0)


def test_eval_rhs_counts_scalar_evaluations():
    p = linear_problem(np.eye(3))
    c = EvalCounter()
    eval_rhs(p, 0.0, np.zeros(3), c)
    eval_rhs(p, 0.0, np.zeros(3), c)
    assert c.scalar_evals == 6


def test_eval_rhs_nonfinite():
    p = OdeProblem(m=1, rhs=lambda t, y: np.array([np.inf]))
    with pytest.raises(NonFiniteOutput):
        eval_rhs(p, 0.0, np.zeros(1))


def test_eval_rhs_dimension():
    p = linear_problem(np.eye(2))
    with pytest.raises(DimensionMismatch):
        eval_rhs(p, 0.0, np.zeros(3))


def test_jacobian_analytic_linear():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(eval_jacobian(linear_problem(a), 0.0, np.ones(2)), a)


def test_jacobian_fd_linear():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    jac = eval_jacobian(linear_problem_no_jac(a), 0.0, np.array([0.5, -0.2]))
    assert np.max(np.abs(jac - a)) <= 1e-6


def test_jacobian_fd_scalar_square():
    p = OdeProblem(m=1, rhs=lambda t, y: y * y)
    jac = eval_jacobian(p, 0.0, np.array([3.0]))
    assert jac[0, 0] == pytest.approx(6.0, abs=1e-6)


def test_jacobian_fd_linear_bounded_error():
    rng = np.random.default_rng(5)
    a = rng.uniform(-1e3, 1e3, size=(4, 4))
    a *= 1e3 / max(np.max(np.sum(np.abs(a), axis=1)), 1.0)
    jac = eval_jacobian(linear_problem_no_jac(a), 0.0, rng.normal(size=4))
    assert np.max(np.abs(jac - a)) <= 5e-6 * 1e3


def test_partition_basics():
    part = ActivePartition(5, [3, 1])
    assert part.indices.tolist() == [1, 3]
    assert part.complement().indices.tolist() == [0, 2, 4]
    assert ActivePartition.full(4).is_full
    assert ActivePartition.empty(4).is_empty
    assert ActivePartition(4, [1]).subset_of(ActivePartition(4, [0, 1]))
    with pytest.raises(DimensionMismatch):
        ActivePartition(3, [5])


def test_scatter_gather_round_trip():
    part = ActivePartition(4, [0, 2])
    x = np.array([7.0, 9.0])
    base = np.array([0.0, 1.0, 2.0, 3.0])
    full = part.scatter(x, base)
    assert np.array_equal(full, [7.0, 1.0, 9.0, 3.0])
    assert np.array_equal(part.gather(full), x)


def test_subsystem_full_matches_eval_rhs():
    a = np.array([[0.0, 1.0], [-1.0, -0.5]])
    p = linear_problem(a)
    y = np.array([0.3, -0.7])
    full = ActivePartition.full(2)
    assert np.array_equal(eval_subsystem_rhs(p, 0.0, y, y, full), eval_rhs(p, 0.0, y))


def test_subsystem_empty():
    p = linear_problem(np.eye(3))
    out = eval_subsystem_rhs(p, 0.0, np.empty(0), np.ones(3), ActivePartition.empty(3))
    assert out.size == 0


def test_subsystem_matches_hand_reduction():
    a = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]])
    p = linear_problem(a)
    part = ActivePartition(3, [0, 2])
    frozen = np.array([0.0, 10.0, 0.0])
    x = np.array([2.0, -1.0])
    got = eval_subsystem_rhs(p, 0.0, x, frozen, part)
    # hand-reduced 2x2 subsystem: rows {0,2}, latent y1 frozen at 10
    reduced = a[np.ix_([0, 2], [0, 2])] @ x + a[np.ix_([0, 2], [1])].ravel() * 10.0
    assert np.allclose(got, reduced, rtol=0, atol=1e-14)


def test_subsystem_counts_active_evals():
    p = linear_problem(np.eye(4))
    c = EvalCounter()
    part = ActivePartition(4, [1, 2])
    eval_subsystem_rhs(p, 0.0, np.zeros(2), np.zeros(4), part, c)
    assert c.scalar_evals == 2


def test_subsystem_jacobian_full_and_diag():
    a = np.diag([2.0, 3.0, 4.0])
    p = linear_problem(a)
    full = subsystem_jacobian(p, 0.0, np.ones(3), ActivePartition.full(3))
    assert np.array_equal(full, a)
    single = subsystem_jacobian(p, 0.0, np.ones(3), ActivePartition(3, [1]))
    assert single.shape == (1, 1) and single[0, 0] == 3.0


def test_subsystem_jacobian_corner():
    rng = np.random.default_rng(9)
    a = rng.normal(size=(4, 4))
    p = linear_problem(a)
    part = ActivePartition(4, [0, 3])
    got = subsystem_jacobian(p, 0.0, rng.normal(size=4), part)
    assert np.allclose(got, a[np.ix_([0, 3], [0, 3])], rtol=0, atol=1e-13)


def test_subsystem_jacobian_fd_matches_block():
    rng = np.random.default_rng(21)
    a = rng.normal(size=(5, 5))
    p = linear_problem_no_jac(a)
    part = ActivePartition(5, [1, 2, 4])
    got = subsystem_jacobian(p, 0.0, rng.normal(size=5), part)
    assert np.max(np.abs(got - a[np.ix_([1, 2, 4], [1, 2, 4])])) <= 1e-6
