import numpy as np
import pytest

from koopstab.dictionary import (Dictionary, boundary_variational_derivative,
                                 cube_triples, feature_map,
                                 observable_time_derivative)
from koopstab.plant import PlantSpec, simulate
from koopstab.spatial import CosineBasis, Grid, StateProfile


@pytest.fixture(scope="module")
def grid():
    return Grid(101)


@pytest.fixture(scope="module")
def dictionary(grid):
    return Dictionary(cube_triples(3), CosineBasis(3, grid))


def _unit_weight(dictionary, triple):
    w = np.zeros(dictionary.size)
    w[dictionary.triples.index(triple)] = 1.0
    return w


def test_default_dictionary_size(dictionary):
    assert dictionary.size == 27


def test_duplicate_triples_rejected(grid):
    with pytest.raises(ValueError):
        Dictionary([(1, 1, 1), (1, 1, 1)], CosineBasis(3, grid))


def test_feature_map_zero_state(dictionary, grid):
    psi = feature_map(dictionary, StateProfile(grid, np.zeros(grid.n)))
    assert np.allclose(psi, 0.0)


def test_feature_map_constant_state(dictionary, grid):
    one = StateProfile(grid, np.ones(grid.n))
    psi = feature_map(dictionary, one)
    assert psi[dictionary.triples.index((1, 1, 1))] == pytest.approx(1.0, abs=1e-14)
    assert abs(psi[dictionary.triples.index((2, 3, 2))]) <= 1e-18


def test_boundary_derivative_closed_forms(dictionary, grid):
    any_x = StateProfile(grid, 0.3 + 0.1 * np.cos(np.pi * grid.nodes))
    one = StateProfile(grid, np.ones(grid.n))
    w = _unit_weight(dictionary, (1, 1, 1))
    assert boundary_variational_derivative(dictionary, w, any_x) == pytest.approx(1.0)
    w = _unit_weight(dictionary, (2, 1, 1))
    assert boundary_variational_derivative(dictionary, w, any_x) == pytest.approx(-np.sqrt(2))
    w = _unit_weight(dictionary, (1, 2, 1))
    assert boundary_variational_derivative(dictionary, w, one) == pytest.approx(2.0)


def test_boundary_derivative_matches_gateaux_probe(dictionary, grid):
    # perturbation of unit quadrature mass concentrated on the right endpoint
    x = StateProfile(grid, 0.4 + 0.2 * np.cos(np.pi * grid.nodes))
    bump = np.zeros(grid.n)
    bump[-1] = 1.0 / grid.weights[-1]
    eps = 1e-5
    rng = np.random.default_rng(0)
    w = rng.normal(size=dictionary.size)
    theta0 = float(w @ dictionary.feature_map(x))
    theta1 = float(w @ dictionary.feature_map(StateProfile(grid, x.values + eps * bump)))
    probe = (theta1 - theta0) / eps
    exact = boundary_variational_derivative(dictionary, w, x)
    assert probe == pytest.approx(exact, rel=0.02)


def test_feature_map_polynomial_bound(dictionary, grid):
    rng = np.random.default_rng(1)
    kl_max = 9  # k, l up to 3 each
    for _ in range(20):
        x = StateProfile(grid, rng.normal(scale=2.0, size=grid.n))
        norm_psi = np.linalg.norm(dictionary.feature_map(x))
        bound = 60.0 * (1.0 + x.max_norm() ** kl_max)
        assert norm_psi <= bound


def test_time_derivative_constant_trajectory(dictionary, grid):
    plant = PlantSpec.linear(rho=1.0, a=0.0)
    x0 = StateProfile(grid, np.zeros(grid.n))
    traj = simulate(plant, x0, None, 0.4, dense=True)
    w = np.ones(dictionary.size)
    d = observable_time_derivative(dictionary, w, traj, 0.2)
    assert abs(d) <= 1e-8


def test_time_derivative_modal_exponential(dictionary, grid):
    plant = PlantSpec.linear(rho=1.0, a=0.5)
    lam = 0.5 - np.pi ** 2
    x0 = StateProfile(grid, np.cos(np.pi * grid.nodes))
    traj = simulate(plant, x0, None, 0.4, dense=True, rtol=1e-10, atol=1e-12)
    w = _unit_weight(dictionary, (2, 1, 1))
    t0 = 0.2
    theta = float(w @ dictionary.feature_map(traj.state_at(t0)))
    d = observable_time_derivative(dictionary, w, traj, t0)
    assert d == pytest.approx(lam * theta, abs=1e-4)


def test_time_derivative_zero_weights(dictionary, grid):
    plant = PlantSpec.linear(rho=1.0, a=0.5)
    x0 = StateProfile(grid, np.cos(np.pi * grid.nodes))
    traj = simulate(plant, x0, None, 0.3, dense=True)
    assert observable_time_derivative(dictionary, np.zeros(dictionary.size),
                                      traj, 0.15) == 0.0


def test_time_derivative_boundary_warns(dictionary, grid):
    plant = PlantSpec.linear(rho=1.0, a=0.0)
    x0 = StateProfile(grid, 0.1 + 0.2 * np.cos(np.pi * grid.nodes))
    traj = simulate(plant, x0, None, 0.3, dense=True)
    w = _unit_weight(dictionary, (1, 1, 1))
    with pytest.warns(UserWarning):
        observable_time_derivative(dictionary, w, traj, 0.0)
