"""Lifted bilinear control model: diffusion estimate, input-map fit, diagnostics.

The lifted dynamics are d/dt phi = Lambda phi + rho (delta_x phi)(1) u. The
state-dependent input gain is approximated by the affine form b + N phi;
the Frobenius norm of the fit defect over the snapshots is the reported
model error.
"""

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EstimateError, NumericalError, ParameterError
from .rng import SplitMix64
from .spatial import StateProfile


@dataclass
class BilinearModel:
    lam: np.ndarray            # principal continuous eigenvalues, descending
    b: np.ndarray
    n_mat: np.ndarray
    rho: float
    fit_error: float
    weights: np.ndarray        # n x L weight rows of the principal functionals
    triples: list              # dictionary spec that the weights refer to

    def __post_init__(self):
        if self.rho <= 0:
            raise ParameterError(f"estimated diffusion must be positive, got {self.rho}")
        if np.any(np.diff(self.lam) > 0):
            raise ParameterError("principal eigenvalues must be sorted descending")
        if self.fit_error < 0:
            raise ParameterError("fit error cannot be negative")

    @property
    def n(self):
        return len(self.lam)

    @property
    def lam_diag(self):
        return np.diag(self.lam)

    def lift(self, dictionary, x):
        """Evaluate the principal eigenfunctionals at a profile."""
        return self.weights @ dictionary.feature_map(x)

    def input_gain(self, dictionary, x):
        """rho * (delta_x phi)(1), the exact lifted input vector at x."""
        row = dictionary.variational_row(x)
        return self.rho * (self.weights @ row)


@dataclass
class CylinderConfig:
    """Monte Carlo quadrature setup for the Gramian bilinearization."""

    m: int
    box: list                  # m intervals for the modal coefficients
    samples: int = 20000
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or len(self.box) != self.m:
            raise ParameterError("cylinder box must list one interval per mode")
        for lo, hi in self.box:
            if not np.isfinite([lo, hi]).all() or not lo < hi:
                raise ParameterError("cylinder box must be bounded and non-degenerate")


def rho_estimate(dictionary, weights, lams, deriv_x, deriv_xdot, u0,
                 tol_denominator=1e-6, average=False):
    """Diffusion estimate from one state-derivative sample under constant input.

    For an eigenpair (lambda, theta), d/dt theta = lambda theta +
    rho (delta theta)(1) u0 along the flow, so rho follows by solving for it.
    The time derivative of theta comes from pairing the functional's chain
    rule with xdot, not from re-differencing. By default the eigenpair with
    the largest boundary sensitivity |delta theta(1)| is used; with
    `average=True` all pairs above the denominator tolerance contribute and
    the spread is reported.
    """
    if u0 == 0:
        raise EstimateError("rho estimate needs a nonzero constant input")
    weights = np.atleast_2d(weights)
    lams = np.atleast_1d(lams)
    feats = dictionary.feature_map(deriv_x)
    var_row = dictionary.variational_row(deriv_x)
    dt_row = dictionary.time_derivative_row(deriv_x, deriv_xdot)
    estimates, sensitivities = [], []
    for wrow, lam in zip(weights, lams):
        den = float(wrow @ var_row) * u0
        if abs(den) < tol_denominator:
            continue
        num = float(wrow @ dt_row) - float(np.real(lam)) * float(wrow @ feats)
        estimates.append(num / den)
        sensitivities.append(abs(float(wrow @ var_row)))
    if not estimates:
        raise EstimateError(
            "all boundary sensitivities below tolerance; try another eigenpair")
    if average:
        spread = float(np.max(estimates) - np.min(estimates)) if len(estimates) > 1 else 0.0
        return float(np.mean(estimates)), spread
    return estimates[int(np.argmax(sensitivities))], 0.0


def fit_bN(dictionary, dataset, weights, rho_hat, rcond=1e-12):
    """Least-squares affine fit of the lifted input gain over the snapshots.

    Returns (b, N, ||E_u||_F) where the columns of the data matrix are
    rho * (delta phi)(1) at each snapshot and the regressors are (1, phi).
    """
    weights = np.atleast_2d(weights)
    n = weights.shape[0]
    m = dataset.m
    if m < n + 1:
        raise ParameterError(f"need at least n+1 = {n + 1} snapshots, got {m}")
    d_mat = np.empty((n, m))
    f_mat = np.empty((n + 1, m))
    f_mat[0] = 1.0
    for col in range(m):
        x = dataset.x[col]
        d_mat[:, col] = rho_hat * (weights @ dictionary.variational_row(x))
        f_mat[1:, col] = weights @ dictionary.feature_map(x)
    if np.linalg.matrix_rank(f_mat, tol=rcond * np.linalg.norm(f_mat, 2)) < n + 1:
        warnings.warn("regressor matrix (1, phi) is rank deficient; "
                      "the snapshot set does not separate the functionals")
    b_n = d_mat @ np.linalg.pinv(f_mat, rcond=rcond)
    residual = float(np.linalg.norm(d_mat - b_n @ f_mat))
    return b_n[:, 0], b_n[:, 1:], residual


def gramian_bilinearize(dictionary, weights, rho_hat, cylinder, strict=False):
    """Gramian-based bilinearization over cylinder coordinates.

    The functionals are restricted to profiles x = sum_i xi_i theta_i with the
    first m cosine basis functions, and the L2 pairing over the (compact) box
    is estimated by Monte Carlo. Returns (b, N) = R G^+ (or G^-1 when G is
    well conditioned and `strict` uniqueness is requested).
    """
    weights = np.atleast_2d(weights)
    n = weights.shape[0]
    if cylinder.m < n:
        raise ParameterError("cylinder truncation must be at least the model order")
    basis = dictionary.basis
    if cylinder.m > basis.count:
        raise ParameterError("cylinder truncation exceeds available basis functions")
    rng = SplitMix64(cylinder.seed)
    grid = dictionary.grid
    gram = np.zeros((n + 1, n + 1))
    cross = np.zeros((n, n + 1))
    for _ in range(cylinder.samples):
        xi = np.array([rng.uniform(lo, hi) for lo, hi in cylinder.box])
        x = StateProfile(grid, xi @ basis.sampled[:cylinder.m])
        phi_bar = np.concatenate([[1.0], weights @ dictionary.feature_map(x)])
        g = rho_hat * (weights @ dictionary.variational_row(x))
        gram += np.outer(phi_bar, phi_bar)
        cross += np.outer(g, phi_bar)
    gram /= cylinder.samples
    cross /= cylinder.samples
    cond = np.linalg.cond(gram)
    if strict:
        if cond > 1e12:
            raise NumericalError(f"Gramian numerically singular (cond = {cond:.2e})")
        b_n = cross @ np.linalg.inv(gram)
    else:
        b_n = cross @ np.linalg.pinv(gram, rcond=1e-12)
    return b_n[:, 0], b_n[:, 1:]


def lifting_defect(model, dictionary, trajectory):
    """Defect time series || d/dt phi - Lambda phi - (b + N phi) u || along a run.

    The derivative of the lifted state is a central difference of the lifted
    series (one-sided at the ends), so the diagnostic needs a reasonably
    dense trajectory.
    """
    t = trajectory.times
    if len(t) < 3:
        raise ParameterError("trajectory too short to difference")
    phis = np.array([model.lift(dictionary, StateProfile(trajectory.grid, s))
                     for s in trajectory.states])
    dphi = np.gradient(phis, t, axis=0, edge_order=2)
    rhs = phis @ model.lam_diag.T + (model.b[None, :]
                                     + phis @ model.n_mat.T) * trajectory.inputs[:, None]
    defect = np.linalg.norm(dphi - rhs, axis=1)
    return t, defect, float(np.max(defect)), float(np.mean(defect))
