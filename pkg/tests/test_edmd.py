import numpy as np
import pytest

from koopstab.dictionary import Dictionary
from koopstab.edmd import (KoopmanModel, build_data_matrices, eigen_residuals,
                           koopman_matrix, scale_principal, score_eigenpairs,
                           select_principal, spectrum, validate_eigenpair)
from koopstab.errors import DataError, SelectionError
from koopstab.plant import PlantSpec, SnapshotDataset, collect_snapshots, simulate
from koopstab.rng import SplitMix64
from koopstab.spatial import CosineBasis, Grid, StateProfile


def test_build_data_matrices_shapes_and_trivials():
    grid = Grid(101)
    dictionary = Dictionary([(1, 1, 1), (2, 1, 1)], CosineBasis(3, grid))
    zeros = np.zeros((1, grid.n))
    ds = SnapshotDataset(grid, zeros, zeros.copy(), 0.1)
    psi, psip = build_data_matrices(dictionary, ds)
    assert psi.shape == (2, 1)
    assert np.allclose(psi, 0.0) and np.array_equal(psi, psip)


def test_paper_data_matrices_shape(paper_run):
    ws, dataset = paper_run["ws"], paper_run["dataset"]
    psi, psip = build_data_matrices(ws.dictionary, dataset)
    assert psi.shape == (27, 200) and psip.shape == (27, 200)


def test_koopman_matrix_invertible_case():
    rng = np.random.default_rng(5)
    psi = rng.normal(size=(4, 4)) + 4 * np.eye(4)
    psip = rng.normal(size=(4, 4))
    k_hat, residual, rank = koopman_matrix(psi, psip, rank_tol=1e-12)
    assert rank == 4
    assert np.allclose(k_hat, psip @ np.linalg.inv(psi), atol=1e-10)
    assert residual <= 1e-10


def test_koopman_matrix_scalar_case():
    k_hat, _, _ = koopman_matrix(np.array([[2.0]]), np.array([[6.0]]))
    assert k_hat[0, 0] == pytest.approx(3.0)


def test_koopman_matrix_rejects_zero_data():
    with pytest.raises(DataError):
        koopman_matrix(np.zeros((3, 5)), np.zeros((3, 5)))


def test_regression_optimality_under_perturbation():
    rng = np.random.default_rng(11)
    psi = rng.normal(size=(5, 40))
    psip = rng.normal(size=(5, 40))
    k_hat, residual, _ = koopman_matrix(psi, psip, rank_tol=1e-12)
    base = np.linalg.norm(k_hat @ psi - psip)
    for _ in range(100):
        e = rng.normal(size=k_hat.shape)
        e *= 1e-3 / np.linalg.norm(e)
        assert np.linalg.norm((k_hat + e) @ psi - psip) >= base - 1e-12


def test_spectrum_diagonal_case():
    t_s = 0.1
    k_hat = np.diag([np.exp(0.5 * t_s), np.exp(-9.37 * t_s)])
    model = spectrum(k_hat, t_s)
    assert model.lam[0].real == pytest.approx(0.5, abs=1e-10)
    assert model.lam[1].real == pytest.approx(-9.37, abs=1e-10)
    assert not model.nonphysical.any()


def test_spectrum_negative_mu_flagged():
    t_s = 0.1
    model = spectrum(np.diag([-0.5, 0.2]), t_s)
    j = int(np.argmin(model.mu.real))
    assert model.nonphysical[j]
    assert model.lam[j].imag == pytest.approx(np.pi / t_s)


def test_left_eigenpair_residuals(paper_run):
    model = paper_run["model"]
    res = eigen_residuals(model)
    assert np.max(res) <= 1e-8


def test_validate_eigenpair_modal_and_monotone():
    grid = Grid(101)
    basis = CosineBasis(3, grid)
    dictionary = Dictionary([(i, 1, 1) for i in (1, 2, 3)], basis)
    plant = PlantSpec.linear(rho=1.0, a=0.5)
    x0 = StateProfile(grid, 0.5 + 0.5 * np.cos(np.pi * grid.nodes))
    traj = simulate(plant, x0, None, 0.6, t_eval=np.linspace(0, 0.6, 61),
                    rtol=1e-10, atol=1e-12)
    w = np.array([0.0, 1.0, 0.0])
    lam = 0.5 - np.pi ** 2
    err = validate_eigenpair(w, lam, dictionary, traj)
    assert err <= 1e-4
    assert validate_eigenpair(w, lam + 1.0, dictionary, traj) > err


def _fake_model(lams, t_s=0.1):
    lams = np.asarray(lams, float)
    size = len(lams)
    model = KoopmanModel(k_hat=np.diag(np.exp(lams * t_s)), t_s=t_s,
                         mu=np.exp(lams * t_s).astype(complex),
                         lam=lams.astype(complex), w=np.eye(size, dtype=complex),
                         nonphysical=np.zeros(size, bool))
    model.validation = np.zeros(size)
    return model


def test_select_principal_integer_sieve():
    model = _fake_model([4.0, 2.0, 1.0, 0.5, -9.37])
    sel = select_principal(model, 2)
    assert [model.lam[j].real for j in sel] == [0.5, -9.37]


def test_select_principal_shifted_family():
    # -8.87 is the 0.5-shift of the deeper -9.37 candidate and must lose to it
    model = _fake_model([1.0, 0.5, -8.87, -9.37])
    sel = select_principal(model, 2)
    assert [model.lam[j].real for j in sel] == [0.5, -9.37]


def test_select_principal_all_and_manual():
    model = _fake_model([0.5, 1.0, 2.0])
    sel = select_principal(model, 3, sieve=False)
    assert len(sel) == 3
    sel = select_principal(model, 2, manual=[2, 0])
    assert sel == [2, 0]


def test_select_principal_insufficient_candidates():
    model = _fake_model([0.5, 1.0])
    model.validation = np.array([0.0, 10.0])  # second candidate filtered out
    with pytest.raises(SelectionError):
        select_principal(model, 2)


def test_eigenfunctional_evaluation_linearity(paper_run):
    ws, model = paper_run["ws"], paper_run["model"]
    x = StateProfile(ws.grid, 0.3 + 0.1 * np.cos(np.pi * ws.grid.nodes))
    psi = ws.dictionary.feature_map(x)
    w1, w2 = model.w[0], model.w[1]
    a, b = 0.7, -1.3
    assert (a * w1 + b * w2) @ psi == pytest.approx(a * (w1 @ psi) + b * (w2 @ psi))


def test_linear_plant_recovery_compact():
    """eDMD on the linear plant recovers the Sturm-Liouville spectrum."""
    rho, a, t_s, m = 1.0, 0.5, 0.1, 40
    grid = Grid(401)
    basis = CosineBasis(5, grid)
    dictionary = Dictionary([(i, 1, 1) for i in range(1, 6)], basis)
    plant = PlantSpec.linear(rho=rho, a=a)
    rng = SplitMix64(12)

    def sampler(_):
        coefs = np.array([rng.uniform(0.2, 1.0) for _ in range(5)])
        return StateProfile(grid, coefs @ basis.sampled[:5])

    ds = collect_snapshots(plant, sampler, m, t_s, rtol=1e-10, atol=1e-12)
    psi, psip = build_data_matrices(dictionary, ds)
    k_hat, _, _ = koopman_matrix(psi, psip, rank_tol=1e-12)
    model = spectrum(k_hat, t_s)
    got = np.sort(model.lam.real)[::-1][:3]
    want = np.array([a - rho * ((k - 1) * np.pi) ** 2 for k in (1, 2, 3)])
    assert np.max(np.abs(got - want)) <= 1e-3


def test_principal_pairs_validate_best_among_top(paper_run):
    """Among the five largest eigenvalues, the principal pairs predict best."""
    model, errors = paper_run["model"], paper_run["fig1_errors"]
    top5 = list(np.argsort(-model.lam.real)[:5])
    principal_errs = sorted(errors[j] for j in model.principal)
    other_errs = [errors[j] for j in top5 if j not in model.principal]
    assert max(principal_errs) < min(other_errs)


def test_scale_principal_unit_norm_mode(paper_run):
    import copy
    model = copy.deepcopy(paper_run["model"])
    ws = paper_run["ws"]
    weights = scale_principal(model, ws.dictionary, normalization="unit")
    assert np.allclose(np.linalg.norm(weights, axis=1), 1.0)
