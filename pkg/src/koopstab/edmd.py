"""Generalized eDMD over functional observables.

Regresses a finite Koopman matrix from snapshot pairs in feature space,
extracts left eigenpairs, converts discrete to continuous eigenvalues, scores
eigenpairs against a test trajectory, and selects the principal ones.
"""

import warnings
from dataclasses import dataclass, field
from itertools import product
from typing import List, Optional

import numpy as np
import scipy.linalg as sla

from .errors import DataError, NumericalError, SelectionError


def build_data_matrices(dictionary, dataset):
    """Feature matrices Psi(x) and Psi(x+), each L x M."""
    if dataset.m < 1:
        raise DataError("empty snapshot dataset")
    psi = dictionary.feature_matrix(dataset.x)
    psip = dictionary.feature_matrix(dataset.xplus)
    for name, mat in (("x", psi), ("x+", psip)):
        bad = np.where(~np.isfinite(mat))
        if bad[0].size:
            raise DataError(f"non-finite feature in block {name}, sample {bad[1][0]}")
    if dataset.m < dictionary.size:
        warnings.warn(f"fewer snapshots ({dataset.m}) than observables ({dictionary.size})")
    rank = np.linalg.matrix_rank(psi, tol=1e-10 * np.linalg.norm(psi, 2))
    if rank < dictionary.size:
        warnings.warn(f"feature matrix numerical rank {rank} < L = {dictionary.size}; "
                      "observables look linearly dependent on this data")
    return psi, psip


def koopman_matrix(psi, psip, rank_tol=1e-6):
    """Least-squares Koopman matrix via an SVD-truncated pseudoinverse.

    Singular directions of Psi below rank_tol * sigma_max carry integrator
    noise rather than signal and are discarded; the result is the minimum
    Frobenius-norm solution restricted to the resolved row space.
    """
    if not np.any(psi):
        raise DataError("feature matrix is identically zero")
    u, s, vt = np.linalg.svd(psi, full_matrices=False)
    r = int(np.sum(s > rank_tol * s[0]))
    if r == 0:
        raise DataError("no singular value above the rank tolerance")
    k_hat = psip @ vt[:r].T @ np.diag(1.0 / s[:r]) @ u[:, :r].T
    residual = float(np.linalg.norm(k_hat @ psi - psip))
    return k_hat, residual, r


@dataclass
class Eigenfunctional:
    """theta[x] = weights . psi[x] with its continuous-time eigenvalue."""

    weights: np.ndarray
    lam: complex
    mu: complex = None

    def __call__(self, dictionary, x):
        return complex(np.dot(self.weights, dictionary.feature_map(x)))


@dataclass
class KoopmanModel:
    k_hat: np.ndarray
    t_s: float
    mu: np.ndarray                 # discrete eigenvalues
    lam: np.ndarray                # ln(mu)/t_s, principal log branch
    w: np.ndarray                  # left eigenvectors as rows, unit 2-norm
    nonphysical: np.ndarray        # log branch left the real axis
    regression_residual: float = 0.0
    rank: int = 0
    validation: Optional[np.ndarray] = None
    principal: Optional[List[int]] = None
    principal_weights: Optional[np.ndarray] = None   # after scaling, n x L

    @property
    def size(self):
        return self.k_hat.shape[0]

    def linear_ratios(self, dictionary):
        lin = np.asarray(self.w[:, dictionary.linear_indices])
        return np.linalg.norm(lin, axis=1)


def spectrum(k_hat, t_s, regression_residual=0.0, rank=0):
    """Left eigen-decomposition with continuous-time eigenvalues.

    Eigenpairs are sorted by descending real part of lambda; conjugate pairs
    stay adjacent by construction. Eigenvalues with non-positive-real mu get
    a complex lambda on the principal log branch and a non-physical flag.
    """
    k_hat = np.asarray(k_hat, float)
    if k_hat.shape[0] != k_hat.shape[1]:
        raise NumericalError("Koopman matrix must be square")
    try:
        mu, v = sla.eig(k_hat.T)
    except sla.LinAlgError as exc:
        raise NumericalError(f"eigen-decomposition failed: {exc}") from exc
    w = v.T  # rows: w_i^T K = mu_i w_i^T
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.where(mu != 0, np.log(mu.astype(complex)) / t_s, -np.inf)
    nonphys = (np.abs(mu.imag) > 1e-12 * np.maximum(np.abs(mu), 1e-300)) | (mu.real <= 0)
    # canonical orientation: unit norm, largest-magnitude entry positive real
    wn = np.empty_like(w)
    for j in range(len(mu)):
        row = w[j] / np.linalg.norm(w[j])
        piv = row[np.argmax(np.abs(row))]
        wn[j] = row * (abs(piv) / piv)
    order = np.argsort(-np.where(np.isfinite(lam.real), lam.real, -np.inf))
    return KoopmanModel(k_hat=k_hat, t_s=t_s, mu=mu[order], lam=lam[order],
                        w=wn[order], nonphysical=nonphys[order],
                        regression_residual=regression_residual, rank=rank)


def eigen_residuals(model):
    """Per-pair left-eigenvector defect, relative to the matrix norm."""
    k_norm = np.linalg.norm(model.k_hat)
    return np.array([
        np.linalg.norm(model.w[j] @ model.k_hat - model.mu[j] * model.w[j]) / k_norm
        for j in range(model.size)])


def predict_observable(weights, lam, dictionary, trajectory):
    """(t, predicted, actual) of theta along a trajectory from theta[x(0)]."""
    feats = np.array([dictionary.feature_map(s) for s in trajectory.states])
    actual = feats @ np.asarray(weights)
    predicted = np.exp(lam * trajectory.times) * actual[0]
    return trajectory.times, predicted, actual


def validate_eigenpair(weights, lam, dictionary, trajectory, horizon=None):
    """Discrete L2-in-time norm of e^(lam t) theta[x(0)] - theta[x(t)]."""
    t, pred, act = predict_observable(weights, lam, dictionary, trajectory)
    if horizon is not None:
        keep = t <= horizon + 1e-12
        t, pred, act = t[keep], pred[keep], act[keep]
    defect = np.abs(pred - act)
    return float(np.sqrt(np.trapezoid(defect ** 2, t)))


def score_eigenpairs(model, dictionary, trajectory, horizon=0.6, efold=3.0):
    """Relative prediction defect per eigenpair on a decay-adapted window.

    For stable eigenvalues the window is clipped to `efold` e-folding times so
    the score compares the defect against the functional while it is alive,
    not against its numerical tail.
    """
    feats = np.array([dictionary.feature_map(s) for s in trajectory.states])
    t = trajectory.times
    scores = np.full(model.size, np.inf)
    for j in range(model.size):
        lam = model.lam[j]
        if not np.isfinite(lam.real) or abs(model.mu[j]) < 1e-14:
            continue
        t_max = horizon if lam.real >= 0 else min(horizon, efold / abs(lam.real))
        keep = t <= t_max + 1e-12
        phi = feats[keep] @ model.w[j]
        ideal = np.exp(lam * t[keep]) * phi[0]
        num = np.sqrt(np.trapezoid(np.abs(ideal - phi) ** 2, t[keep]))
        den = np.sqrt(np.trapezoid(np.abs(ideal) ** 2, t[keep]))
        scores[j] = num / max(den, 1e-300)
    model.validation = scores
    return scores


def _is_integer_combo(value, selected_vals, tol, max_total):
    for total in range(2, max_total + 1):
        for ps in product(range(total + 1), repeat=len(selected_vals)):
            if sum(ps) != total:
                continue
            if abs(value - sum(p * s for p, s in zip(ps, selected_vals))) <= tol:
                return True
    return False


def _is_shifted_copy(value, selected_vals, deeper_vals, tol, max_total):
    """value = deeper candidate + nonneg-integer combo of selected eigenvalues."""
    for dv in deeper_vals:
        for total in range(1, max_total + 1):
            for ps in product(range(total + 1), repeat=len(selected_vals)):
                if sum(ps) != total:
                    continue
                if abs(value - (dv + sum(p * s for p, s in zip(ps, selected_vals)))) <= tol:
                    return True
    return False


def select_principal(model, n, integer_tol=0.15, max_multiple=12, score_tol=0.5,
                     manual=None, sieve=True):
    """Choose n principal eigenpairs.

    Heuristic (documented; the operator can always override with `manual`):
    candidates are real positive-mu pairs whose relative validation score is
    below `score_tol`. The smallest positive eigenvalue is taken first, and
    all larger positive ones are treated as its integer multiples. Remaining
    slots are filled scanning downward in Re(lambda), discarding values that
    are nonneg-integer combinations of already selected eigenvalues or such a
    combination shifted off a deeper surviving candidate.
    """
    if manual is not None:
        if len(manual) != n:
            raise SelectionError(f"manual override has {len(manual)} indices, n = {n}")
        sel = list(manual)
        model.principal = sel
        return sel
    if n > model.size:
        raise SelectionError(f"n = {n} exceeds dictionary size {model.size}")
    scores = model.validation
    if scores is None:
        raise SelectionError("score_eigenpairs must run before selection")
    cands = [j for j in range(model.size)
             if not model.nonphysical[j]
             and np.isfinite(model.lam[j].real)
             and scores[j] <= score_tol]
    if not sieve:
        sel = cands[:n]
        if len(sel) < n:
            raise SelectionError(f"only {len(sel)} candidates available")
        model.principal = sel
        return sel
    lam = {j: model.lam[j].real for j in cands}
    positives = sorted((j for j in cands if lam[j] > 0), key=lambda j: lam[j])
    sel = [positives[0]] if positives else []
    rest = sorted((j for j in cands if not (lam[j] > 0)), key=lambda j: -lam[j])
    for j in rest:
        if len(sel) >= n:
            break
        sel_vals = [lam[s] for s in sel]
        deeper = [lam[j2] for j2 in rest
                  if lam[j2] < lam[j] - 0.25 and j2 not in sel]
        if sel_vals and _is_integer_combo(lam[j], sel_vals, integer_tol, max_multiple):
            continue
        if sel_vals and _is_shifted_copy(lam[j], sel_vals, deeper, integer_tol, max_multiple):
            continue
        sel.append(j)
    if len(sel) < n:
        cand_list = [(j, lam[j], scores[j]) for j in cands]
        raise SelectionError(
            f"only {len(sel)} principal candidates survive the sieve; "
            f"candidates (index, lambda, score): {cand_list}")
    sel.sort(key=lambda j: -lam[j])
    model.principal = sel
    return sel


def scale_principal(model, dictionary, normalization="pair"):
    """Fix the scale of the selected principal eigenfunctionals.

    "unit": keep unit weight-vector norm. "linear": rescale each pair so its
    linear functional part (the k = l = 1 weights) has unit L2 norm, with the
    dominant linear coefficient positive. "pair": linear scaling for unstable
    pairs (Re lambda > 0, whose linear content is well resolved on this data)
    and unit norm for stable ones. Downstream synthesis is covariant under
    these rescalings; the choice only sets the units of the lifted state.
    """
    if model.principal is None:
        raise SelectionError("select_principal must run first")
    for j in model.principal:
        if model.nonphysical[j] or abs(model.lam[j].imag) > 1e-9:
            raise NumericalError(
                f"selected principal eigenvalue {model.lam[j]} is not real; "
                "this pipeline requires a real principal spectrum")
    rows = []
    for j in model.principal:
        wrow = np.real(model.w[j]).copy()
        lin = wrow[dictionary.linear_indices]
        lin_norm = np.linalg.norm(lin)
        use_linear = normalization == "linear" or (
            normalization == "pair" and model.lam[j].real > 0)
        if use_linear:
            if lin_norm < 1e-10:
                raise NumericalError(
                    "cannot normalize by a vanishing linear part; "
                    "use normalization='unit' or a manual override")
            piv = lin[np.argmax(np.abs(lin))]
            wrow = wrow * (np.sign(piv) / lin_norm)
        rows.append(wrow)
    model.principal_weights = np.array(rows)
    return model.principal_weights


def export_spectrum(path, model, errors=None):
    """Spectrum dump: index, Re mu, Im mu, Re lambda, Im lambda, error, principal."""
    principal = set(model.principal or [])
    if errors is not None:
        scores = np.asarray(errors)
    elif model.validation is not None:
        scores = model.validation
    else:
        scores = np.full(model.size, np.nan)
    with open(path, "w") as fh:
        fh.write("index,re_mu,im_mu,re_lambda,im_lambda,validation_error,principal_flag\n")
        for j in range(model.size):
            lam = model.lam[j]
            fh.write(f"{j},{model.mu[j].real:.17g},{model.mu[j].imag:.17g},"
                     f"{lam.real:.17g},{lam.imag:.17g},"
                     f"{scores[j]:.17g},{int(j in principal)}\n")
