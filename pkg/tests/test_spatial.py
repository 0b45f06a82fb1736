import numpy as np
import pytest

from koopstab.errors import GridMismatchError, ParameterError
from koopstab.rng import SplitMix64
from koopstab.spatial import (CosineBasis, Grid, LegendreTensorBasis, StateProfile,
                              ic_coefficients, inner_product, load_profile,
                              make_ic_g, random_ic, save_profile)

G_MAX_NORM = 0.37343534926538963  # frozen from the closed form, max at z = 0


@pytest.fixture(scope="module")
def grid():
    return Grid(101)


def test_simpson_weights_sum_to_one(grid):
    assert abs(np.sum(grid.weights) - 1.0) < 1e-14


@pytest.mark.parametrize("power,exact", [(1, 0.5), (2, 1.0 / 3.0), (3, 0.25)])
def test_simpson_exact_on_cubics(grid, power, exact):
    assert abs(grid.quad(grid.nodes ** power) - exact) <= 1e-12


@pytest.mark.parametrize("n", [10, 9, 4])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(ParameterError):
        Grid(n)


def test_inner_product_orthonormality(grid):
    one = StateProfile(grid, np.ones(grid.n))
    c1 = StateProfile(grid, np.sqrt(2) * np.cos(np.pi * grid.nodes))
    assert abs(inner_product(one, one) - 1.0) < 1e-14
    assert abs(inner_product(c1, c1) - 1.0) < 1e-12
    assert abs(inner_product(c1, one)) < 1e-10


def test_inner_product_grid_mismatch(grid):
    other = Grid(51)
    a = StateProfile(grid, np.ones(grid.n))
    b = StateProfile(other, np.ones(other.n))
    with pytest.raises(GridMismatchError):
        inner_product(a, b)
    with pytest.raises(GridMismatchError):
        inner_product(a, np.ones(11))


def test_cosine_gram_is_identity(grid):
    basis = CosineBasis(5, grid)
    assert np.max(np.abs(basis.gram() - np.eye(5))) <= 1e-6


def test_make_ic_g_golden_max_norm(grid):
    g = make_ic_g(0.8, 0.42, 2.0 / 3.0, grid)
    assert abs(g.max_norm() - G_MAX_NORM) < 1e-12


def test_make_ic_g_rejects_zero_frequency(grid):
    with pytest.raises(ParameterError):
        make_ic_g(0.8, 0.0, 0.5, grid)


def test_make_ic_g_neumann_slopes_second_order():
    slopes = {}
    for n in (101, 201):
        g = make_ic_g(0.8, 0.42, 2.0 / 3.0, Grid(n))
        v, h = g.values, g.grid.h
        s0 = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)
        s1 = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h)
        slopes[n] = (abs(s0), abs(s1))
        assert abs(s0) < 5e-5 and abs(s1) < 5e-5
    for side in (0, 1):
        ratio = slopes[101][side] / slopes[201][side]
        assert 3.0 < ratio < 5.0  # O(h^2) refinement


def test_random_ic_zero_half_width_is_nominal(grid):
    basis = CosineBasis(5, grid)
    g = make_ic_g(0.8, 0.42, 2.0 / 3.0, grid)
    coeffs = ic_coefficients(g, basis, 5)
    prof = random_ic(coeffs, 0.0, 123, basis)
    nominal = coeffs @ basis.sampled[:5]
    assert np.allclose(prof.values, nominal, atol=1e-15)


def test_random_ic_deterministic(grid):
    basis = CosineBasis(5, grid)
    a = random_ic([0.3, 0.04, 0.0, 0.0, 0.0], 0.04, 42, basis)
    b = random_ic([0.3, 0.04, 0.0, 0.0, 0.0], 0.04, 42, basis)
    assert np.array_equal(a.values, b.values)


def test_random_ic_respects_coefficient_box(grid):
    basis = CosineBasis(5, grid)
    g = make_ic_g(0.8, 0.42, 2.0 / 3.0, grid)
    coeffs = ic_coefficients(g, basis, 5)
    rng = SplitMix64(7)
    for _ in range(200):
        prof = random_ic(coeffs, 0.04, rng, basis)
        drawn = ic_coefficients(prof, basis, 5)
        assert np.all(np.abs(drawn - coeffs) <= 0.04 + 1e-9)


def test_legendre_eval_basics():
    basis = LegendreTensorBasis([(-0.65, 0.65), (-0.1, 0.1)], 4)
    center = np.array([0.0, 0.0])
    assert basis.eval((0, 0), center) == pytest.approx(1.0)
    assert basis.eval((1, 0), center) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ParameterError):
        basis.eval((1, 0), np.array([1.0, 0.0]))


def test_legendre_self_product_matches_closed_form():
    box = [(-0.65, 0.65), (-0.1, 0.1)]
    basis = LegendreTensorBasis(box, 4)
    nodes, wts = basis.gauss_nodes(8)
    vals = basis.eval((2, 0), nodes)
    got = np.sum(wts * vals ** 2)
    # product of 1-D norms: (hi-lo)/2 * 2/(2 d + 1) per axis
    want = (1.3 / 2) * (2 / 5) * (0.2 / 2) * 2.0
    assert got == pytest.approx(want, abs=1e-10)


def test_legendre_orthogonality_within_tolerance():
    basis = LegendreTensorBasis([(-0.65, 0.65), (-0.1, 0.1)], 5)
    nodes, wts = basis.gauss_nodes(10)
    vals = np.array([np.atleast_1d(basis.eval(q, nodes)) for q in basis.multi_indices])
    gram = (vals * wts) @ vals.T
    off = gram - np.diag(np.diag(gram))
    assert np.max(np.abs(off)) <= 1e-8


def test_legendre_gradient_matches_finite_difference():
    basis = LegendreTensorBasis([(-0.65, 0.65), (-0.1, 0.1)], 5)
    rng = np.random.default_rng(3)
    for _ in range(10):
        w = np.array([rng.uniform(-0.5, 0.5), rng.uniform(-0.08, 0.08)])
        q = (3, 2)
        grad = basis.grad(q, w)
        for j, h in ((0, 1e-6), (1, 1e-7)):
            e = np.zeros(2)
            e[j] = h
            fd = (basis.eval(q, w + e) - basis.eval(q, w - e)) / (2 * h)
            assert grad[j] == pytest.approx(fd, rel=1e-5, abs=1e-6)


def test_profile_roundtrip(tmp_path, grid):
    g = make_ic_g(0.8, 0.42, 2.0 / 3.0, grid)
    path = tmp_path / "profile.dat"
    save_profile(path, g)
    back = load_profile(path, grid)
    assert np.array_equal(back.values, g.values)
    first = path.read_text().splitlines()[0].split()
    assert len(first) == 2 and float(first[0]) == 0.0
