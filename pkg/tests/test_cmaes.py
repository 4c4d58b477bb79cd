import numpy as np
import pytest

from catlplus.cmaes import cmaes_maximize


def neg_sphere(target):
    def evaluate(X):
        return -np.sum((X - target) ** 2, axis=1)

    return evaluate


def test_converges_to_interior_optimum():
    dim = 10
    target = np.full(dim, 0.4)
    lower, upper = -np.ones(dim), np.ones(dim)
    result = cmaes_maximize(
        neg_sphere(target), lower, upper, population=20, generations=200, seed=1
    )
    assert np.max(np.abs(result.best - target)) < 1e-2
    assert result.evaluations == 20 * 200


def test_deterministic_for_fixed_seed():
    dim = 6
    lower, upper = -np.ones(dim), np.ones(dim)
    a = cmaes_maximize(neg_sphere(np.zeros(dim)), lower, upper, population=12, generations=40, seed=9)
    b = cmaes_maximize(neg_sphere(np.zeros(dim)), lower, upper, population=12, generations=40, seed=9)
    assert np.array_equal(a.best, b.best)
    assert a.value == b.value


def test_exterior_optimum_projects_to_boundary():
    dim = 5
    target = np.array([2.0, -3.0, 0.5, 1.8, -0.2])
    lower, upper = -np.ones(dim), np.ones(dim)
    result = cmaes_maximize(
        neg_sphere(target), lower, upper, population=24, generations=250, seed=3
    )
    expected = np.clip(target, lower, upper)
    assert np.max(np.abs(result.best - expected)) < 2e-2


def test_candidates_stay_inside_box():
    dim = 4
    lower = np.array([-1.0, 0.0, -2.0, 1.0])
    upper = np.array([1.0, 0.5, -1.0, 3.0])
    seen = []

    def evaluate(X):
        seen.append(X.copy())
        return -np.sum(X**2, axis=1)

    cmaes_maximize(evaluate, lower, upper, population=8, generations=20, seed=0, sigma0=0.8)
    stacked = np.vstack(seen)
    assert np.all(stacked >= lower - 1e-12)
    assert np.all(stacked <= upper + 1e-12)


def test_non_finite_fitness_is_survivable():
    def evaluate(X):
        out = -np.sum(X**2, axis=1)
        out[::2] = np.nan
        return out

    lower, upper = -np.ones(3), np.ones(3)
    result = cmaes_maximize(evaluate, lower, upper, population=8, generations=30, seed=5)
    assert np.isfinite(result.value)


def test_parameter_validation():
    lower, upper = -np.ones(3), np.ones(3)
    with pytest.raises(ValueError):
        cmaes_maximize(neg_sphere(np.zeros(3)), lower, upper, population=3, generations=10)
    with pytest.raises(ValueError):
        cmaes_maximize(neg_sphere(np.zeros(3)), lower, upper, population=8, generations=0)
    with pytest.raises(ValueError):
        cmaes_maximize(neg_sphere(np.zeros(3)), lower, np.full(3, np.inf), population=8, generations=1)
