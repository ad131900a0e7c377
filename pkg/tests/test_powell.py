import math

import numpy as np
import pytest

from topoforge.exceptions import OptimizationError
from topoforge.powell import OptimizerConfig, line_minimize, minimize


def rosenbrock(x):
    return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2


def test_line_minimize_parabola():
    a, f = line_minimize(lambda t: (t - 2.0) ** 2, (-5.0, 7.0), tol=1e-8)
    assert abs(a - 2.0) <= 1e-6
    assert f <= 1e-12


def test_line_minimize_abs():
    a, _ = line_minimize(abs, (-3.0, 4.0), tol=1e-8)
    assert abs(a) <= 1e-6


def test_line_minimize_monotone_returns_endpoint():
    a, f = line_minimize(lambda t: t, (1.0, 3.0))
    assert a == 1.0 and f == 1.0


def test_line_minimize_all_nonfinite():
    with pytest.raises(OptimizationError):
        line_minimize(lambda t: math.inf, (0.0, 1.0))


def test_minimize_1d():
    r = minimize(lambda x: (x[0] - 3.0) ** 2, [0.0])
    assert abs(r.x_star[0] - 3.0) <= 1e-5
    assert r.f_star <= 1e-10


def test_minimize_rosenbrock():
    r = minimize(rosenbrock, [-1.2, 1.0], OptimizerConfig(max_iterations=1000, f_tolerance=1e-14,
                                                          max_evaluations=5000))
    assert np.abs(r.x_star - 1.0).max() <= 1e-6
    assert r.f_star <= 1e-10
    assert r.evaluations <= 5000


def test_minimize_constant_stops_after_one_sweep():
    x0 = np.array([0.3, -2.0, 5.0])
    r = minimize(lambda x: 4.0, x0)
    assert r.converged and r.iterations == 1
    assert np.array_equal(r.x_star, x0)


def test_history_monotone_on_quadratics():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(1, 11))
        Q = rng.normal(size=(n, n))
        A = Q @ Q.T + 0.1 * np.eye(n)
        c = rng.normal(size=n)
        r = minimize(lambda x: 0.5 * x @ A @ x - c @ x, rng.normal(size=n) * 3)
        assert all(b <= a for a, b in zip(r.history, r.history[1:]))
        x_opt = np.linalg.solve(A, c)
        assert r.f_star <= 0.5 * x_opt @ A @ x_opt - c @ x_opt + 1e-6 * (1 + abs(c @ x_opt))


def test_quadratic_termination():
    # exact line searches on a quadratic: conjugate set after n rounds
    rng = np.random.default_rng(5)
    n = 4
    Q = rng.normal(size=(n, n))
    A = Q @ Q.T + np.eye(n)
    r = minimize(lambda x: 0.5 * x @ A @ x, rng.normal(size=n),
                 OptimizerConfig(max_iterations=2 * n + 2, f_tolerance=1e-300, line_search_tolerance=1e-10))
    assert r.f_star <= 1e-14


def test_budget_is_respected():
    calls = []

    def f(x):
        calls.append(1)
        return rosenbrock(x)

    r = minimize(f, [-1.2, 1.0], OptimizerConfig(max_evaluations=50))
    assert len(calls) == r.evaluations <= 50
    assert not r.converged
    assert r.f_star <= rosenbrock([-1.2, 1.0])


def test_nonfinite_values_treated_as_inf():
    r = minimize(lambda x: math.nan if x[0] > 1 else (x[0] - 0.5) ** 2, [0.0])
    assert abs(r.x_star[0] - 0.5) <= 1e-4


def test_nonfinite_start_rejected():
    with pytest.raises(OptimizationError):
        minimize(lambda x: math.inf, [0.0])


def test_empty_problem():
    r = minimize(lambda x: 1.5, np.zeros(0))
    assert r.f_star == 1.5 and r.converged


def test_config_validation():
    with pytest.raises(OptimizationError):
        OptimizerConfig(max_iterations=0)
