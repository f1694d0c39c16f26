import math

import numpy as np
import pytest

from mrtrbdf2.errors import NewtonDivergence, PoleEncountered
from mrtrbdf2.ode_problem import OdeProblem
from mrtrbdf2.trbdf2 import (
    COEFFS,
    D_STAGE,
    NewtonConfig,
    modified_error_estimate,
    raw_error_estimate,
    stability_function,
    step,
)

TIGHT = NewtonConfig(tolerance=1e-13, max_iterations=50)


def scalar_problem(lam):
    return OdeProblem(
        m=1, rhs=lambda t, y: lam * y, jacobian=lambda t, y: np.array([[lam]])
    )


# Independent oracle: rational functions of the main and embedded rows built
# directly from the Butcher tableau via a linear solve.
_A_TABLEAU = np.array([
    [0.0, 0.0, 0.0],
    [D_STAGE, D_STAGE, 0.0],
    [COEFFS.b[0], COEFFS.b[1], COEFFS.b[2]],
])


def tableau_amplification(z, weights):
    stages = np.linalg.solve(np.eye(3) - z * _A_TABLEAU, np.ones(3))
    return 1.0 + z * np.dot(weights, stages)


def test_coefficients_sum_to_one():
    assert abs(sum(COEFFS.b) - 1.0) <= 1e-15
    assert abs(sum(COEFFS.b_star) - 1.0) <= 1e-15
    assert 0.0 < COEFFS.gamma < 1.0


def test_step_zero_rhs():
    p = OdeProblem(m=2, rhs=lambda t, y: np.zeros(2), jacobian=lambda t, y: np.zeros((2, 2)))
    u = np.array([1.5, -2.0])
    res = step(p, 0.0, u, 0.7)
    assert np.array_equal(res.u_gamma, u)
    assert np.array_equal(res.u_next, u)
    assert np.all(res.eps_raw == 0.0)
    assert np.all(res.eps_mod == 0.0)


def test_scalar_step_matches_stability_function():
    res = step(scalar_problem(-1.0), 0.0, np.array([1.0]), 0.1, cfg=TIGHT)
    expected = stability_function(-0.1).real
    assert abs(res.u_next[0] - expected) <= 1e-10


def test_fixed_step_second_order():
    p = scalar_problem(-1.0)

    def global_error(h):
        n = round(1.0 / h)
        u = np.array([1.0])
        z = None
        for k in range(n):
            res = step(p, k * h, u, h, z_in=z, cfg=TIGHT)
            u, z = res.u_next, res.z_next
        return abs(u[0] - math.exp(-1.0))

    e1, e2 = global_error(0.05), global_error(0.025)
    assert 3.6 <= e1 / e2 <= 4.4


def test_stability_function_consistency():
    assert stability_function(0.0) == pytest.approx(1.0, abs=1e-15)


def test_stability_function_decay_at_minus_infinity():
    assert abs(stability_function(-1e6)) <= 1e-5


def test_stability_function_third_order_contact():
    # |R(z) - e^z| = O(z^3) near the origin
    for z in (0.1, -0.1, 0.01, -0.01):
        assert abs(stability_function(z) - math.exp(z)) / abs(z) ** 3 <= 0.1


def test_l_stability_on_log_grid():
    xs = -np.logspace(-4, 8, 200)
    vals = [abs(stability_function(x)) for x in xs]
    assert max(vals) <= 1.0 + 1e-14
    decades = [abs(stability_function(-10.0**k)) for k in range(2, 9)]
    assert all(a > b for a, b in zip(decades, decades[1:]))


def test_a_stability_on_imaginary_axis():
    ys = np.linspace(-1e3, 1e3, 501)
    assert max(abs(stability_function(1j * y)) for y in ys) <= 1.0 + 1e-12


def test_stability_function_pole():
    pole = 2.0 + math.sqrt(2.0)  # double root of the denominator
    with pytest.raises(PoleEncountered):
        stability_function(pole)


def test_raw_error_estimate_zero_for_equal_stages():
    z = np.array([0.3, -0.4])
    assert np.max(np.abs(raw_error_estimate(z, z, z))) <= 1e-16


def test_raw_error_estimate_first_weight():
    out = raw_error_estimate(np.array([1.0, 0.0]), np.zeros(2), np.zeros(2))
    assert out[0] == pytest.approx((1.0 - math.sqrt(2.0)) / 3.0, abs=1e-15)
    assert out[1] == 0.0


def test_raw_error_estimate_matches_embedded_difference():
    # quadrature check: for y' = lam*y the estimate equals (Rhat - R)(h*lam)*u0
    lam, h, u0 = -2.0, 0.37, 1.3
    res = step(scalar_problem(lam), 0.0, np.array([u0]), h, cfg=TIGHT)
    z = h * lam
    expected = (tableau_amplification(z, COEFFS.b_star) - tableau_amplification(z, COEFFS.b)) * u0
    assert res.eps_raw[0] == pytest.approx(expected, rel=1e-9)


def test_modified_estimate_identity_jacobian_zero():
    eps = np.array([0.25, -0.5])
    out = modified_error_estimate(eps, np.zeros((2, 2)), 0.3)
    assert np.allclose(out, eps, rtol=0, atol=1e-15)


def test_modified_estimate_stiff_scalar():
    out = modified_error_estimate(np.array([1.0]), np.array([[-1e6]]), 1.0)
    assert out[0] == pytest.approx(1.0 / (1.0 + D_STAGE * 1e6), rel=1e-12)


def test_modified_estimate_small_step_limit():
    eps = np.array([0.7])
    jac = np.array([[-3.0]])
    for h in (1e-4, 1e-6):
        out = modified_error_estimate(eps, jac, h)
        assert abs(out[0] - eps[0]) <= 2.0 * D_STAGE * h * 3.0 * abs(eps[0])


def test_modified_estimate_solves_shifted_system():
    # the returned estimate must satisfy (I - d*h*J) eps = eps_raw
    rng = np.random.default_rng(8)
    a = rng.normal(size=(4, 4))
    p = OdeProblem(m=4, rhs=lambda t, y: a @ y, jacobian=lambda t, y: a)
    h = 0.3
    res = step(p, 0.0, rng.normal(size=4), h, cfg=TIGHT)
    lhs = (np.eye(4) - D_STAGE * h * res.jacobian) @ res.eps_mod
    denom = max(np.max(np.abs(res.eps_raw)), 1e-300)
    assert np.max(np.abs(lhs - res.eps_raw)) / denom <= 1e-10


def test_fsal_bitwise_handoff():
    p = scalar_problem(-0.5)
    h = 0.2
    res1 = step(p, 0.0, np.array([1.0]), h, cfg=TIGHT)
    res2 = step(p, h, res1.u_next, h, z_in=res1.z_next, cfg=TIGHT)
    assert np.array_equal(res2.z_n, res1.z_next)


def test_newton_two_iterations_on_linear():
    a = np.array([[-1.0, 0.3], [0.0, -2.0]])
    p = OdeProblem(m=2, rhs=lambda t, y: a @ y, jacobian=lambda t, y: a)
    res = step(p, 0.0, np.array([1.0, -1.0]), 0.25)
    assert res.newton_iterations[0] <= 2
    assert res.newton_iterations[1] <= 2


def test_modified_estimate_tames_stiff_raw():
    ratios = []
    for lam in (-1e2, -1e4, -1e6):
        res = step(scalar_problem(lam), 0.0, np.array([1.0]), 1.0)
        ratios.append(abs(res.eps_mod[0]) / abs(res.eps_raw[0]))
    assert ratios[0] > ratios[1] > ratios[2]
    assert ratios[2] <= 1e-4


def test_jacobian_refresh_matches_reuse_on_linear():
    a = np.array([[-3.0, 1.0], [0.0, -7.0]])
    p = OdeProblem(m=2, rhs=lambda t, y: a @ y, jacobian=lambda t, y: a)
    u = np.array([1.0, 2.0])
    res_reuse = step(p, 0.0, u, 0.3, cfg=NewtonConfig(jacobian_reuse=True))
    res_fresh = step(p, 0.0, u, 0.3, cfg=NewtonConfig(jacobian_reuse=False))
    # constant Jacobian: the refreshed factorization is identical
    assert np.array_equal(res_reuse.u_next, res_fresh.u_next)


def test_newton_divergence_raises():
    # rhs with a Jacobian wildly inconsistent with the supplied one: the
    # modified-Newton contraction fails and the iteration must give up
    p = OdeProblem(
        m=1,
        rhs=lambda t, y: 1e4 * y * y - y,
        jacobian=lambda t, y: np.array([[-1.0]]),
    )
    with pytest.raises(NewtonDivergence):
        step(p, 0.0, np.array([5.0]), 1.0, cfg=NewtonConfig(tolerance=1e-12, max_iterations=8))
