"""Observable dictionary: products psi_[ikl][x] = <f_i, x^k>^l.

Each observable is a scalar functional of the state profile. The closed-form
chain rule for this family gives the boundary variational derivative and the
exact pairing with a state time derivative, both used by the lifting stage.
"""

import warnings
from typing import NamedTuple

import numpy as np

from .spatial import CosineBasis, StateProfile, inner_product


class ObservableSpec(NamedTuple):
    i: int  # basis function index (1-based)
    k: int  # pointwise power of the state
    l: int  # outer power of the inner product


def cube_triples(top=3):
    """The default dictionary: all (i, k, l) with entries in 1..top."""
    r = range(1, top + 1)
    return [ObservableSpec(i, k, l) for i in r for k in r for l in r]


class Dictionary:
    """Ordered observable dictionary over a cosine basis on one grid."""

    def __init__(self, triples, basis):
        triples = [ObservableSpec(*t) for t in triples]
        if len(set(triples)) != len(triples):
            raise ValueError("duplicate observable triple")
        for t in triples:
            if min(t) < 1:
                raise ValueError(f"observable indices must be >= 1, got {t}")
        self.triples = triples
        self.basis = basis
        self.grid = basis.grid
        self._imax = max(t.i for t in triples)
        self._kmax = max(t.k for t in triples)
        if self._imax > basis.count:
            raise ValueError("dictionary needs more basis functions than supplied")
        # weighted basis rows so that <f_i, v> = wf[i-1] @ v
        self._wf = basis.sampled[: self._imax] * self.grid.weights
        self._f_at_1 = np.array([basis.value_at_right(i) for i in range(1, self._imax + 1)])
        self._iarr = np.array([t.i - 1 for t in triples])
        self._karr = np.array([t.k for t in triples])
        self._larr = np.array([t.l for t in triples])
        self.linear_indices = [j for j, t in enumerate(triples) if t.k == 1 and t.l == 1]

    @property
    def size(self):
        return len(self.triples)

    def _powers_table(self, values):
        """t[i-1, k-1] = <f_i, x^k> for all needed i, k."""
        pows = np.vstack([values ** k for k in range(1, self._kmax + 1)])
        return self._wf @ pows.T  # (imax, kmax)

    def feature_map(self, x):
        """Feature vector psi[x] of length L."""
        t = self._powers_table(x.values if isinstance(x, StateProfile) else x)
        base = t[self._iarr, self._karr - 1]
        return base ** self._larr

    def feature_matrix(self, states):
        """Feature vectors for a batch of nodal state rows, shape (L, M)."""
        states = np.asarray(states, float)
        return np.column_stack([self.feature_map(s) for s in states])

    def variational_row(self, x):
        """Per-observable boundary variational derivative (delta psi_j [x])(1)."""
        vals = x.values if isinstance(x, StateProfile) else x
        t = self._powers_table(vals)
        base = t[self._iarr, self._karr - 1]
        x1 = vals[-1]
        return (self._larr * base ** (self._larr - 1)
                * self._karr * self._f_at_1[self._iarr]
                * x1 ** (self._karr - 1))

    def boundary_variational_derivative(self, weights, x):
        """(delta_x theta[x])(1) for theta = weights . psi (no rho factor)."""
        return float(np.dot(weights, self.variational_row(x)))

    def time_derivative_row(self, x, xdot):
        """Per-observable d/dt psi_j given the state derivative, via the chain rule."""
        vals = x.values if isinstance(x, StateProfile) else x
        dvals = xdot.values if isinstance(xdot, StateProfile) else xdot
        t = self._powers_table(vals)
        # td[i-1, k-1] = k <f_i, x^(k-1) xdot>
        pows = np.vstack([k * vals ** (k - 1) * dvals for k in range(1, self._kmax + 1)])
        td = self._wf @ pows.T
        base = t[self._iarr, self._karr - 1]
        return self._larr * base ** (self._larr - 1) * td[self._iarr, self._karr - 1]

    def linear_part(self, weights):
        """Nodal samples of delta_x theta at x = 0 (only k = l = 1 terms survive)."""
        out = np.zeros(self.grid.n)
        for j in self.linear_indices:
            out += weights[j] * self.basis.function(self.triples[j].i)
        return out


def feature_map(dictionary, x):
    return dictionary.feature_map(x)


def boundary_variational_derivative(dictionary, weights, x):
    return dictionary.boundary_variational_derivative(weights, x)


def observable_time_derivative(dictionary, weights, trajectory, t0,
                               target_rel_error=1e-5):
    """d/dt of theta[x(t)] at t0 by central differencing along a trajectory.

    Uses the trajectory's dense output; falls back to a one-sided difference
    with a warning when t0 sits at the span boundary.
    """
    t_lo, t_hi = trajectory.times[0], trajectory.times[-1]
    if not (t_lo <= t0 <= t_hi):
        raise ValueError(f"t0 = {t0} outside trajectory span [{t_lo}, {t_hi}]")

    def theta_at(t):
        return float(np.dot(weights, dictionary.feature_map(trajectory.state_at(t))))

    span = t_hi - t_lo
    dt = min(1e-3, span / 8)
    if t0 - dt < t_lo or t0 + dt > t_hi:
        warnings.warn("t0 at trajectory boundary; using one-sided difference")
        if t0 + dt <= t_hi:
            return (theta_at(t0 + dt) - theta_at(t0)) / dt
        return (theta_at(t0) - theta_at(t0 - dt)) / dt
    prev = None
    for _ in range(6):
        d_full = (theta_at(t0 + dt) - theta_at(t0 - dt)) / (2 * dt)
        d_half = (theta_at(t0 + dt / 2) - theta_at(t0 - dt / 2)) / dt
        scale = max(1.0, abs(d_half))
        if abs(d_half - d_full) / 3.0 / scale <= target_rel_error:
            return d_half
        prev = d_half
        dt /= 2.0
        if t0 - dt < t_lo or t0 + dt > t_hi:
            break
    warnings.warn("observable differencing did not reach the requested accuracy")
    return prev
