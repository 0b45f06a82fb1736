"""Spatial grid, quadrature, basis functions, and initial-condition synthesis.

The domain is z in [0, 1] on a uniform grid with composite-Simpson weights
(node count odd). All profile data in the package lives on one such grid.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError, ParameterError
from .rng import SplitMix64


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [0, 1] with composite Simpson quadrature weights."""

    n: int
    nodes: np.ndarray = field(repr=False, default=None)
    weights: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.n < 11 or self.n % 2 == 0:
            raise ParameterError(f"grid size must be odd and >= 11, got {self.n}")
        z = np.linspace(0.0, 1.0, self.n)
        h = z[1] - z[0]
        w = np.ones(self.n)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        w *= h / 3.0
        object.__setattr__(self, "nodes", z)
        object.__setattr__(self, "weights", w)

    @property
    def h(self):
        return self.nodes[1] - self.nodes[0]

    def quad(self, values):
        """Simpson quadrature of nodal values over [0, 1]."""
        return float(np.dot(self.weights, values))


@dataclass(frozen=True)
class StateProfile:
    """A spatial function x(.) sampled on a Grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n,):
            raise GridMismatchError(
                f"profile has {vals.shape} values for a grid of {self.grid.n} nodes")
        if not np.all(np.isfinite(vals)):
            raise ParameterError("profile contains non-finite values")
        object.__setattr__(self, "values", vals)

    def __mul__(self, c):
        return StateProfile(self.grid, c * self.values)

    __rmul__ = __mul__

    def max_norm(self):
        return float(np.max(np.abs(self.values)))

    def l2_norm(self):
        return float(np.sqrt(self.grid.quad(self.values ** 2)))


def inner_product(a, b):
    """L2(0,1) inner product of two same-grid sampled functions.

    Accepts StateProfile or raw nodal arrays; arrays are assumed to live on
    the profile's grid (checked by length).
    """
    if isinstance(a, StateProfile) and isinstance(b, StateProfile):
        if a.grid is not b.grid and not np.array_equal(a.grid.nodes, b.grid.nodes):
            raise GridMismatchError("inner product of profiles on different grids")
        return a.grid.quad(a.values * b.values)
    if isinstance(a, StateProfile):
        a, grid = a.values, a.grid
        b = np.asarray(b, float)
    elif isinstance(b, StateProfile):
        grid, b = b.grid, b.values
        a = np.asarray(a, float)
    else:
        raise GridMismatchError("at least one argument must be a StateProfile")
    if a.shape != b.shape:
        raise GridMismatchError("sampled functions have different lengths")
    return grid.quad(a * b)


class CosineBasis:
    """Neumann cosine family: f_1 = 1, f_i = sqrt(2) cos((i-1) pi z), i >= 2.

    Orthonormal in L2(0,1); the index convention keeps f_i aligned with the
    i-th Neumann mode so a linear functional <f_i, x> reads off the (i-1)-th
    spatial frequency.
    """

    def __init__(self, count, grid):
        self.count = count
        self.grid = grid
        z = grid.nodes
        rows = [np.ones_like(z)]
        for i in range(2, count + 1):
            rows.append(np.sqrt(2.0) * np.cos((i - 1) * np.pi * z))
        self.sampled = np.array(rows)

    def function(self, i):
        """Nodal samples of f_i (1-based index)."""
        return self.sampled[i - 1]

    def value_at_right(self, i):
        """f_i(1) in closed form."""
        if i == 1:
            return 1.0
        return float(np.sqrt(2.0) * np.cos((i - 1) * np.pi))

    def gram(self):
        """Gram matrix under the grid quadrature (identity up to quadrature error)."""
        w = self.grid.weights
        return (self.sampled * w) @ self.sampled.T


def make_ic_g(amp, freq, phase, grid):
    """Closed-form initial-condition generator g(z).

    g is built so that g'(0) = g'(1) = 0, which makes it compatible with the
    plant's Neumann boundary conditions.
    """
    if freq == 0:
        raise ParameterError("ic generator requires freq != 0")
    z = grid.nodes
    a, w, p0 = float(amp), float(freq), float(phase)
    arg = w * np.pi * z + np.pi * p0
    vals = -(a / (np.pi * w) ** 3) * (
        ((w * np.pi) ** 2 * (z - 1.0) * z - 2.0) * np.sin(arg)
        + w * np.pi * (2.0 * z - 1.0) * np.cos(arg)
    )
    return StateProfile(grid, vals)


def ic_coefficients(profile, basis, count):
    """Projections g_i = <g, h_i> onto the first `count` cosine functions."""
    return np.array([inner_product(profile, basis.function(i + 1)) for i in range(count)])


def random_ic(g_coeffs, half_width, seed, basis):
    """Random initial profile sum_i c_i h_i with c_i uniform in [g_i +- half_width].

    Deterministic for a fixed seed (splitmix64 stream). With half_width = 0 the
    profile is exactly the projected nominal profile.
    """
    if half_width < 0:
        raise ParameterError("half_width must be >= 0")
    rng = seed if isinstance(seed, SplitMix64) else SplitMix64(seed)
    g_coeffs = np.asarray(g_coeffs, float)
    coefs = np.array([rng.uniform(g - half_width, g + half_width) for g in g_coeffs])
    vals = coefs @ basis.sampled[: len(coefs)]
    return StateProfile(basis.grid, vals)


def _legendre_val_der(d, x):
    """Legendre P_d and P_d' at x (scalar or array) via the three-term recurrence."""
    x = np.asarray(x, float)
    p_prev, p = np.ones_like(x), x.copy()
    if d == 0:
        return np.ones_like(x), np.zeros_like(x)
    for m in range(2, d + 1):
        p_prev, p = p, ((2 * m - 1) * x * p - (m - 1) * p_prev) / m
    # derivative from (x^2 - 1) P_d' = d (x P_d - P_{d-1})
    der = np.where(np.abs(x) == 1.0,
                   0.5 * d * (d + 1) * np.sign(x) ** (d + 1),
                   d * (x * p - p_prev) / np.where(np.abs(x) == 1.0, 1.0, x * x - 1.0))
    return p, der


def _monomials_upto(n, d_max, d_min=0):
    """Multi-indices with d_min <= total degree <= d_max, sorted (degree, lex)."""
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


class LegendreTensorBasis:
    """Tensor products of Legendre polynomials on an axis-aligned box."""

    def __init__(self, box, d_max):
        self.box = [(float(lo), float(hi)) for lo, hi in box]
        for lo, hi in self.box:
            if not lo < hi:
                raise ParameterError(f"degenerate box interval [{lo}, {hi}]")
        self.n = len(self.box)
        self.d_max = int(d_max)
        self.multi_indices = _monomials_upto(self.n, self.d_max)

    def _to_reference(self, w):
        w = np.atleast_2d(np.asarray(w, float))
        lo = np.array([b[0] for b in self.box])
        hi = np.array([b[1] for b in self.box])
        return (2.0 * w - (hi + lo)) / (hi - lo)

    def contains(self, w, rtol=1e-12):
        xi = self._to_reference(w)
        return bool(np.all(np.abs(xi) <= 1.0 + rtol))

    def eval(self, multi_index, w):
        """Value of the tensor Legendre function at points w inside the box."""
        if not self.contains(w):
            raise ParameterError(f"point {w} outside box {self.box}")
        xi = self._to_reference(w)
        out = np.ones(xi.shape[0])
        for j, d in enumerate(multi_index):
            out *= _legendre_val_der(d, xi[:, j])[0]
        return out if out.size > 1 else float(out[0])

    def grad(self, multi_index, w):
        """Analytic gradient of the tensor Legendre function at points w."""
        if not self.contains(w):
            raise ParameterError(f"point {w} outside box {self.box}")
        xi = self._to_reference(w)
        vals = []
        ders = []
        for j, d in enumerate(multi_index):
            v, dv = _legendre_val_der(d, xi[:, j])
            vals.append(v)
            ders.append(dv)
        out = np.empty_like(xi)
        for j in range(self.n):
            col = np.ones(xi.shape[0])
            for j2 in range(self.n):
                col *= ders[j2] if j2 == j else vals[j2]
            lo, hi = self.box[j]
            out[:, j] = col * 2.0 / (hi - lo)
        return out if out.shape[0] > 1 else out[0]

    def gauss_nodes(self, q):
        """Tensor Gauss-Legendre nodes and weights on the box, q points per axis."""
        x, w = np.polynomial.legendre.leggauss(q)
        axes, wts = [], []
        for lo, hi in self.box:
            axes.append(0.5 * (hi - lo) * x + 0.5 * (hi + lo))
            wts.append(0.5 * (hi - lo) * w)
        mesh = np.meshgrid(*axes, indexing="ij")
        nodes = np.stack([m.ravel() for m in mesh], axis=1)
        weights = np.prod(np.stack(
            [m.ravel() for m in np.meshgrid(*wts, indexing="ij")], axis=1), axis=1)
        return nodes, weights


def save_profile(path, profile):
    """Write a profile as two-column text (z, value)."""
    data = np.column_stack([profile.grid.nodes, profile.values])
    np.savetxt(path, data, fmt="%.17g")


def load_profile(path, grid):
    data = np.loadtxt(path)
    if data.shape[0] != grid.n:
        raise GridMismatchError(f"profile file has {data.shape[0]} rows, grid has {grid.n}")
    return StateProfile(grid, data[:, 1])
