"""Small dense multivariate polynomial arithmetic used by the synthesis stage.

Coefficients are held in a dict keyed by exponent tuples. Sizes here are tiny
(n = 2..4 variables, total degree <= 15 or so), so clarity beats asymptotics.
"""

import numpy as np


def monomials_upto(n, d_max, d_min=0):
    """Exponent tuples with d_min <= total degree <= d_max, sorted (degree, lex)."""
    out = []

    def rec(prefix, left):
        if left == 0:
            d = sum(prefix)
            if d_min <= d <= d_max:
                out.append(tuple(prefix))
            return
        for e in range(d_max - sum(prefix) + 1):
            rec(prefix + [e], left - 1)

    rec([], n)
    out.sort(key=lambda t: (sum(t), t))
    return out


class Poly:
    """Polynomial in n variables with float coefficients."""

    __slots__ = ("n", "coeffs")

    def __init__(self, n, coeffs=None):
        self.n = n
        self.coeffs = dict(coeffs) if coeffs else {}

    @staticmethod
    def zero(n):
        return Poly(n)

    @staticmethod
    def const(n, value):
        return Poly(n, {(0,) * n: float(value)}) if value else Poly(n)

    @staticmethod
    def var(n, j):
        e = tuple(1 if i == j else 0 for i in range(n))
        return Poly(n, {e: 1.0})

    @staticmethod
    def from_coeffs(n, exps, values):
        return Poly(n, {e: float(v) for e, v in zip(exps, values) if v != 0.0})

    def copy(self):
        return Poly(self.n, self.coeffs)

    def __add__(self, other):
        if np.isscalar(other):
            other = Poly.const(self.n, other)
        out = dict(self.coeffs)
        for e, v in other.coeffs.items():
            out[e] = out.get(e, 0.0) + v
        return Poly(self.n, {e: v for e, v in out.items() if v != 0.0})

    def __sub__(self, other):
        if np.isscalar(other):
            other = Poly.const(self.n, other)
        return self + other * (-1.0)

    def __mul__(self, other):
        if np.isscalar(other):
            if other == 0:
                return Poly(self.n)
            return Poly(self.n, {e: v * other for e, v in self.coeffs.items()})
        out = {}
        for e1, v1 in self.coeffs.items():
            for e2, v2 in other.coeffs.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0.0) + v1 * v2
        return Poly(self.n, {e: v for e, v in out.items() if v != 0.0})

    __rmul__ = __mul__
    __radd__ = __add__

    def diff(self, j):
        out = {}
        for e, v in self.coeffs.items():
            if e[j] > 0:
                ee = list(e)
                ee[j] -= 1
                out[tuple(ee)] = out.get(tuple(ee), 0.0) + v * e[j]
        return Poly(self.n, out)

    def degree(self):
        return max((sum(e) for e in self.coeffs), default=0)

    def homogeneous_part(self, d):
        return Poly(self.n, {e: v for e, v in self.coeffs.items() if sum(e) == d})

    def truncated(self, d_max):
        return Poly(self.n, {e: v for e, v in self.coeffs.items() if sum(e) <= d_max})

    def max_abs_coeff(self, d=None):
        vals = [abs(v) for e, v in self.coeffs.items() if d is None or sum(e) == d]
        return max(vals, default=0.0)

    def __call__(self, points):
        return self.eval(points)

    def eval(self, points):
        """Evaluate at one point (shape (n,)) or many (shape (m, n))."""
        pts = np.atleast_2d(np.asarray(points, float))
        out = np.zeros(pts.shape[0])
        for e, v in self.coeffs.items():
            term = np.full(pts.shape[0], v)
            for j, p in enumerate(e):
                if p:
                    term = term * pts[:, j] ** p
            out += term
        return out if out.size > 1 else float(out[0])

    def compose_linear(self, t_mat):
        """Polynomial q(v) = self(T v) for a linear substitution w = T v."""
        t_mat = np.asarray(t_mat, float)
        lin = [Poly(self.n, {tuple(1 if i == j else 0 for i in range(self.n)): t_mat[r, j]
                             for j in range(self.n) if t_mat[r, j] != 0.0})
               for r in range(self.n)]
        out = Poly(self.n)
        for e, v in self.coeffs.items():
            term = Poly.const(self.n, v)
            for j, p in enumerate(e):
                for _ in range(p):
                    term = term * lin[j]
            out = out + term
        return out


def eval_many(polys, points):
    """Stack evaluations of several polynomials, shape (m, len(polys))."""
    pts = np.atleast_2d(np.asarray(points, float))
    return np.column_stack([np.atleast_1d(p.eval(pts)) for p in polys])


def jacobian(polys):
    """Jacobian matrix of a polynomial map as nested lists of Poly."""
    n = polys[0].n
    return [[p.diff(j) for j in range(n)] for p in polys]
