import numpy as np
import pytest

from koopstab.polynomial import Poly, eval_many, jacobian, monomials_upto


def test_monomials_ordering():
    mono = monomials_upto(2, 3)
    assert mono[0] == (0, 0)
    degrees = [sum(e) for e in mono]
    assert degrees == sorted(degrees)
    assert len(mono) == 10
    assert monomials_upto(2, 3, d_min=2) == [e for e in mono if sum(e) >= 2]


def test_arithmetic_and_diff():
    x, y = Poly.var(2, 0), Poly.var(2, 1)
    p = (x + 2.0 * y) * (x - y) + 3.0
    # x^2 + x y - 2 y^2 + 3
    assert p.coeffs == {(2, 0): 1.0, (1, 1): 1.0, (0, 2): -2.0, (0, 0): 3.0}
    assert p.diff(0).coeffs == {(1, 0): 2.0, (0, 1): 1.0}
    assert p.degree() == 2
    assert p.homogeneous_part(2).coeffs == {(2, 0): 1.0, (1, 1): 1.0, (0, 2): -2.0}
    assert p.truncated(1).coeffs == {(0, 0): 3.0}


def test_eval_scalar_and_batch():
    x, y = Poly.var(2, 0), Poly.var(2, 1)
    p = x * x + 2.0 * y
    assert p.eval(np.array([3.0, 1.0])) == pytest.approx(11.0)
    pts = np.array([[0.0, 0.0], [1.0, 2.0], [-1.0, 0.5]])
    assert np.allclose(p.eval(pts), [0.0, 5.0, 2.0])
    stacked = eval_many([p, x], pts)
    assert stacked.shape == (3, 2)


def test_compose_linear_matches_pointwise():
    rng = np.random.default_rng(2)
    x, y = Poly.var(2, 0), Poly.var(2, 1)
    p = 0.3 * x * x * y - 1.2 * y * y + 0.7 * x + 0.1
    t_mat = rng.normal(size=(2, 2))
    q = p.compose_linear(t_mat)
    for _ in range(8):
        v = rng.normal(size=2)
        assert q.eval(v) == pytest.approx(p.eval(t_mat @ v), rel=1e-12, abs=1e-12)


def test_jacobian_shape():
    x, y = Poly.var(2, 0), Poly.var(2, 1)
    jac = jacobian([x * y, y * y])
    assert jac[0][0].coeffs == {(0, 1): 1.0}
    assert jac[1][0].coeffs == {}
    assert jac[1][1].coeffs == {(0, 1): 2.0}
