import numpy as np
import pytest

from koopstab.control import simulate_bilinear
from koopstab.dictionary import Dictionary, cube_triples
from koopstab.errors import EstimateError
from koopstab.lifting import (BilinearModel, CylinderConfig, fit_bN,
                              gramian_bilinearize, lifting_defect, rho_estimate)
from koopstab.plant import (PlantSpec, SnapshotDataset, Trajectory,
                            derivative_sample)
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


def test_rho_estimate_exact_modal():
    # fine grid keeps the discrete spectrum within the 1e-3 budget
    fine = Grid(301)
    dfine = Dictionary(cube_triples(3), CosineBasis(3, fine))
    plant = PlantSpec.linear(rho=1.0, a=0.5)
    x0 = StateProfile(fine, 0.4 + 0.5 * np.cos(np.pi * fine.nodes))
    u0 = 0.1
    x_t0, xdot_t0 = derivative_sample(plant, x0, u0, 0.05)
    w = _unit_weight(dfine, (2, 1, 1))  # exact modal functional <f_2, x>
    lam = 0.5 - np.pi ** 2
    rho, _ = rho_estimate(dfine, w, [lam], x_t0, xdot_t0, u0)
    assert rho == pytest.approx(1.0, abs=1e-3)


def test_rho_estimate_requires_input(grid, dictionary):
    x = StateProfile(grid, np.ones(grid.n))
    with pytest.raises(EstimateError):
        rho_estimate(dictionary, _unit_weight(dictionary, (1, 1, 1)), [0.5], x, x, 0.0)


def test_rho_estimate_singular_denominator(grid, dictionary):
    # weights chosen so the boundary sensitivity cancels: f_1(1) = 1, f_2(1) = -sqrt(2)
    w = np.sqrt(2) * _unit_weight(dictionary, (1, 1, 1)) + _unit_weight(dictionary, (2, 1, 1))
    x = StateProfile(grid, np.ones(grid.n))
    with pytest.raises(EstimateError):
        rho_estimate(dictionary, w, [0.5], x, x, 0.1)


def test_rho_estimate_scale_invariance(paper_run):
    ws, dataset, model = paper_run["ws"], paper_run["dataset"], paper_run["model"]
    x_t0, xdot_t0 = dataset.derivative_profiles()
    w = model.principal_weights[0]
    lam = [model.lam[model.principal[0]].real]
    rho1, _ = rho_estimate(ws.dictionary, w, lam, x_t0, xdot_t0, dataset.deriv_u0)
    rho2, _ = rho_estimate(ws.dictionary, 3.7 * w, lam, x_t0, xdot_t0, dataset.deriv_u0)
    assert rho1 == pytest.approx(rho2, rel=1e-12)


def test_fit_bN_exact_affine(grid, dictionary):
    # theta = <f_1, x>: boundary derivative is exactly 1, so rho (delta)(1) = rho
    rng = np.random.default_rng(4)
    states = np.array([0.2 + 0.1 * rng.normal() + 0.05 * rng.normal()
                       * np.cos(np.pi * grid.nodes) for _ in range(12)])
    ds = SnapshotDataset(grid, states, states.copy(), 0.1)
    w = _unit_weight(dictionary, (1, 1, 1))[None, :]
    b, n_mat, resid = fit_bN(dictionary, ds, w, rho_hat=1.0)
    assert b[0] == pytest.approx(1.0, abs=1e-10)
    assert abs(n_mat[0, 0]) <= 1e-8
    assert resid <= 1e-10


def test_fit_bN_interpolates_minimal_data(grid, dictionary):
    states = np.array([np.full(grid.n, 0.2), np.full(grid.n, 0.9)])
    ds = SnapshotDataset(grid, states, states.copy(), 0.1)
    w = _unit_weight(dictionary, (1, 2, 1))[None, :]  # nonlinear functional
    b, n_mat, resid = fit_bN(dictionary, ds, w, rho_hat=1.0)
    assert resid <= 1e-12  # two unknowns, two samples


def test_fit_bN_optimality(paper_run):
    ws, dataset, bilin = paper_run["ws"], paper_run["dataset"], paper_run["bilin"]
    n = bilin.n
    m = dataset.m
    d_mat = np.empty((n, m))
    f_mat = np.empty((n + 1, m))
    f_mat[0] = 1.0
    for col in range(m):
        d_mat[:, col] = bilin.rho * (bilin.weights @ ws.dictionary.variational_row(dataset.x[col]))
        f_mat[1:, col] = bilin.weights @ ws.dictionary.feature_map(dataset.x[col])
    b_n = np.column_stack([bilin.b, bilin.n_mat])
    base = np.linalg.norm(d_mat - b_n @ f_mat)
    rng = np.random.default_rng(9)
    for _ in range(100):
        e = rng.normal(size=b_n.shape)
        e *= 1e-3 / np.linalg.norm(e)
        assert np.linalg.norm(d_mat - (b_n + e) @ f_mat) >= base - 1e-12


def test_gramian_affine_exact(grid, dictionary):
    w = _unit_weight(dictionary, (1, 1, 1))[None, :]
    cyl = CylinderConfig(m=1, box=[(-0.5, 0.5)], samples=4000, seed=3)
    b, n_mat = gramian_bilinearize(dictionary, w, 1.0, cyl)
    assert b[0] == pytest.approx(1.0, abs=1e-6)
    assert abs(n_mat[0, 0]) <= 1e-6


def test_gramian_zero_gain(grid, dictionary):
    w = (np.sqrt(2) * _unit_weight(dictionary, (1, 1, 1))
         + _unit_weight(dictionary, (2, 1, 1)))[None, :]
    cyl = CylinderConfig(m=2, box=[(-0.5, 0.5), (-0.2, 0.2)], samples=2000, seed=5)
    b, n_mat = gramian_bilinearize(dictionary, w, 1.0, cyl)
    assert abs(b[0]) <= 1e-8 and np.max(np.abs(n_mat)) <= 1e-8


def test_gramian_agrees_with_fit_on_data_region(paper_run):
    ws, dataset, bilin = paper_run["ws"], paper_run["dataset"], paper_run["bilin"]
    lifted = np.array([ws.dictionary.basis.sampled[:5] @ (x * ws.grid.weights)
                       for x in dataset.x])
    lo, hi = lifted.min(axis=0), lifted.max(axis=0)
    cyl = CylinderConfig(m=5, box=list(zip(lo, hi)), samples=3000, seed=17)
    b, n_mat = gramian_bilinearize(ws.dictionary, bilin.weights, bilin.rho, cyl)
    assert np.max(np.abs(b - bilin.b)) <= 0.2
    assert np.max(np.abs(n_mat - bilin.n_mat)) <= 0.2


def test_lifting_defect_exact_bilinear(grid, dictionary):
    # constant-in-z profiles encode a scalar bilinear system through <f_1, x>
    lam, b, n_c = np.array([-0.8]), np.array([0.6]), np.array([[0.3]])
    wtraj = simulate_bilinear(lam, b, n_c, lambda w: 0.2, np.array([0.5]), 2.0,
                              t_eval=np.linspace(0, 2, 401), rtol=1e-11, atol=1e-13)
    states = np.repeat(wtraj.states, grid.n, axis=1)
    traj = Trajectory(grid, wtraj.times, states, wtraj.inputs)
    model = BilinearModel(lam=lam, b=b, n_mat=n_c, rho=1.0, fit_error=0.0,
                          weights=_unit_weight(dictionary, (1, 1, 1))[None, :],
                          triples=list(dictionary.triples))
    _, defect, dmax, _ = lifting_defect(model, dictionary, traj)
    assert dmax <= 1e-4  # differencing error only


def test_lifting_defect_matches_validation_on_linear_plant(grid, dictionary):
    from koopstab.plant import simulate
    plant = PlantSpec.linear(rho=1.0, a=0.5)
    x0 = StateProfile(grid, 0.3 + 0.4 * np.cos(np.pi * grid.nodes))
    traj = simulate(plant, x0, None, 0.5, t_eval=np.linspace(0, 0.5, 201),
                    rtol=1e-10, atol=1e-12)
    lam = np.array([0.5, 0.5 - np.pi ** 2])
    weights = np.vstack([_unit_weight(dictionary, (1, 1, 1)),
                         _unit_weight(dictionary, (2, 1, 1))])
    model = BilinearModel(lam=lam, b=np.zeros(2), n_mat=np.zeros((2, 2)), rho=1.0,
                          fit_error=0.0, weights=weights,
                          triples=list(dictionary.triples))
    _, defect, dmax, _ = lifting_defect(model, dictionary, traj)
    assert dmax <= 1e-2  # exact eigenpairs: only differencing error remains
