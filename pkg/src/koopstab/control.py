"""Feedback-linearizing synthesis for the lifted bilinear model.

Pole placement fixes the target matrix A~ = Lambda - b k^T; the linearizing
map Phi solves the singular first-order PDE

    dPhi/dw (Lambda w + (b + N w)(alpha(w) - k^T Phi(w))) = A~ Phi(w)

degree by degree as a power series (linear algebra only), optionally polished
by a Gauss-Newton Galerkin pass that minimizes the L2 defect on the working
box. The controller is u = alpha(w) - k^T Phi(w) with w the lifted state.
"""

import warnings
from dataclasses import dataclass, field
from itertools import product
from typing import List, Optional

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from .errors import (IntegrationError, NumericalError, ParameterError,
                     ResonanceError, SynthesisError)
from .polynomial import Poly, eval_many, jacobian, monomials_upto
from .spatial import LegendreTensorBasis

_OVERFLOW_GUARD = 1e50


@dataclass(frozen=True)
class TargetSpec:
    """Desired closed-loop eigenvalues: real, distinct, negative."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.sort(np.asarray(self.values, float))[::-1]
        if np.any(vals >= 0):
            raise ParameterError("target eigenvalues must be negative")
        if np.any(np.diff(vals) == 0):
            raise ParameterError("target eigenvalues must be distinct")
        object.__setattr__(self, "values", vals)


@dataclass
class LinearizingMap:
    k: np.ndarray
    a_target: np.ndarray
    phi: List[Poly]
    box: list
    residual_norm: float = np.inf
    d_max: int = 0
    alpha: Optional[Poly] = None

    @property
    def n(self):
        return len(self.k)

    def phi_eval(self, w):
        """Phi at one point (n,) or many (m, n)."""
        out = eval_many(self.phi, w)
        return out[0] if np.asarray(w).ndim == 1 else out

    def alpha_eval(self, w):
        if self.alpha is None:
            return 0.0 if np.asarray(w).ndim == 1 else np.zeros(np.atleast_2d(w).shape[0])
        out = self.alpha.eval(w)
        return out

    def control(self, w):
        """u = alpha(w) - k^T Phi(w) for a single lifted state."""
        return float(self.alpha_eval(w) - self.k @ self.phi_eval(np.asarray(w, float)))

    def control_linear(self, w):
        """Comparison controller u = -k^T w."""
        return float(-self.k @ np.asarray(w, float))


def controllability_matrix(a_mat, b):
    n = len(b)
    cols = [b]
    for _ in range(n - 1):
        cols.append(a_mat @ cols[-1])
    return np.column_stack(cols)


def place_poles(lam, b, targets):
    """Single-input Ackermann placement: spectrum of Lambda - b k^T = targets."""
    lam_mat = np.diag(np.asarray(lam, float)) if np.ndim(lam) == 1 else np.asarray(lam, float)
    b = np.asarray(b, float)
    targets = TargetSpec(np.asarray(targets, float)).values
    n = len(b)
    if targets.size != n:
        raise SynthesisError(f"{targets.size} targets for an order-{n} model")
    ctrb = controllability_matrix(lam_mat, b)
    rank = np.linalg.matrix_rank(ctrb)
    if rank < n:
        raise SynthesisError(
            f"(Lambda, b) not controllable: controllability rank {rank} < {n}")
    char = np.real(np.poly(targets))
    p_of_a = np.zeros((n, n))
    for c in char:
        p_of_a = p_of_a @ lam_mat + c * np.eye(n)
    e_last = np.zeros(n)
    e_last[-1] = 1.0
    k = np.linalg.solve(ctrb.T, e_last) @ p_of_a
    a_target = lam_mat - np.outer(b, k)
    obs = controllability_matrix(a_target.T, k)
    if np.linalg.matrix_rank(obs) < n:
        warnings.warn("(k^T, A~) not observable; Phi may fail to be a "
                      "change of coordinates")
    return k, a_target


def check_nonresonance(lam_open, targets, max_degree, tol_res=1e-6):
    """Exhaustively test lambda_i != p . lambda~ for 2 <= sum(p) <= max_degree."""
    lam_open = np.asarray(lam_open, float)
    targets = np.asarray(targets, float)
    if max_degree < 2:
        raise ParameterError("resonance check needs max_degree >= 2")
    n = len(targets)
    for total in range(2, max_degree + 1):
        for ps in product(range(total + 1), repeat=n):
            if sum(ps) != total:
                continue
            combo = float(np.dot(ps, targets))
            for i, li in enumerate(lam_open):
                if abs(li - combo) < tol_res:
                    return False, (i, ps, combo)
    return True, None


def _validate_alpha(alpha, n):
    if alpha is None:
        return None
    if alpha.n != n:
        raise ParameterError("alpha has the wrong number of variables")
    if alpha.max_abs_coeff(0) != 0.0 or alpha.max_abs_coeff(1) != 0.0:
        raise ParameterError("alpha must vanish to second order at the origin")
    return alpha


def pde_defect(phi, lam, b, n_mat, k, a_target, alpha=None):
    """The polynomial defect of the singular PDE for a candidate map."""
    n = len(b)
    u = alpha.copy() if alpha is not None else Poly(n)
    for i in range(n):
        u = u - float(k[i]) * phi[i]
    gain = []
    for i in range(n):
        gi = Poly.const(n, b[i])
        for j in range(n):
            if n_mat[i, j]:
                gi = gi + float(n_mat[i, j]) * Poly.var(n, j)
        gain.append(gi)
    lam_mat = np.diag(np.asarray(lam, float)) if np.ndim(lam) == 1 else np.asarray(lam)
    vfield = []
    for i in range(n):
        vi = gain[i] * u
        for j in range(n):
            if lam_mat[i, j]:
                vi = vi + float(lam_mat[i, j]) * Poly.var(n, j)
        vfield.append(vi)
    jac = jacobian(phi)
    out = []
    for i in range(n):
        d = Poly(n)
        for j in range(n):
            d = d + jac[i][j] * vfield[j]
        for j in range(n):
            d = d - float(a_target[i, j]) * phi[j]
        out.append(d)
    return out


def solve_singular_pde(lam, b, n_mat, k, a_target, d_max, tol_res=1e-6, alpha=None):
    """Power-series solution of the singular PDE, degree by degree.

    Each homogeneous degree solves a linear homological system in the
    eigenbasis of A~; the divisor for output component i and multi-index p is
    sum_j p_j lambda~_j - lambda_i, nonzero under the non-resonance condition.
    The linear part of Phi is the identity by the construction of A~.
    """
    lam = np.asarray(lam, float)
    b = np.asarray(b, float)
    n = len(b)
    alpha = _validate_alpha(alpha, n)
    lt, t_mat = np.linalg.eig(np.asarray(a_target, float))
    if np.max(np.abs(lt.imag)) > 1e-10 * np.max(np.abs(lt)):
        raise NumericalError("complex target spectrum is unsupported here")
    lt = lt.real
    if np.min(np.abs(np.subtract.outer(lt, lt) + np.eye(n))) < 1e-10:
        raise NumericalError("target matrix must have distinct eigenvalues")
    t_mat = np.real(t_mat)
    t_inv = np.linalg.inv(t_mat)
    phi = [Poly.var(n, i) for i in range(n)]
    for d in range(2, d_max + 1):
        defect = pde_defect(phi, lam, b, n_mat, k, a_target, alpha)
        r_parts = [p.homogeneous_part(d) * (-1.0) for p in defect]
        r_hat = [r.compose_linear(t_mat) for r in r_parts]
        correction = []
        for i in range(n):
            q = Poly(n)
            for exps, value in r_hat[i].coeffs.items():
                divisor = float(np.dot(exps, lt)) - lam[i]
                if abs(divisor) < tol_res:
                    raise ResonanceError(
                        f"resonant divisor {divisor:.2e} for component {i}, "
                        f"multi-index {exps}", component=i, multi_index=exps)
                q.coeffs[exps] = value / divisor
            correction.append(q.compose_linear(t_inv))
        phi = [phi[i] + correction[i] for i in range(n)]
        growth = max(p.max_abs_coeff(d) for p in phi)
        if growth > _OVERFLOW_GUARD:
            warnings.warn(f"power series coefficients exceeded {_OVERFLOW_GUARD:g} "
                          f"at degree {d}; truncating there")
            break
    return phi


def pde_residual(phi, lam, b, n_mat, k, a_target, box, quad_order=None, alpha=None):
    """L2 norm over the box of the stacked PDE defect (tensor Gauss-Legendre)."""
    d_max = max(p.degree() for p in phi)
    if quad_order is None:
        quad_order = 2 * d_max + 2
    if quad_order < d_max + 1:
        raise ParameterError("quadrature order below d_max + 1")
    defect = pde_defect(phi, lam, b, n_mat, k, a_target, alpha)
    basis = LegendreTensorBasis(box, 1)
    nodes, wts = basis.gauss_nodes(quad_order)
    total = 0.0
    for dp in defect:
        vals = np.atleast_1d(dp.eval(nodes))
        total += float(np.sum(wts * vals ** 2))
    return float(np.sqrt(total))


def _legendre_1d_coeffs(d, lo, hi):
    """Coefficients (ascending powers of w) of Legendre P_d mapped to [lo, hi]."""
    ref = np.polynomial.legendre.leg2poly([0.0] * d + [1.0])
    a = 2.0 / (hi - lo)
    c = -(hi + lo) / (hi - lo)
    out = np.zeros(d + 1)
    from math import comb
    for p, coef in enumerate(ref):
        if coef == 0.0:
            continue
        for j in range(p + 1):
            out[j] += coef * comb(p, j) * (a ** j) * (c ** (p - j))
    return out


def _legendre_tensor_polys(box, d_max, d_min=2):
    """Poly objects for tensor-Legendre functions, flattened at the origin.

    Each function has its value and gradient at 0 removed so any combination
    keeps Phi(0) = 0 and the identity linear part intact.
    """
    n = len(box)
    one_d = [[_legendre_1d_coeffs(d, lo, hi) for d in range(d_max + 1)]
             for lo, hi in box]
    polys = []
    exps_list = monomials_upto(n, d_max, d_min)
    for exps in exps_list:
        p = Poly.const(n, 1.0)
        for j, d in enumerate(exps):
            pj = Poly(n, {tuple(e if jj == j else 0 for jj in range(n)): float(cf)
                          for e, cf in enumerate(one_d[j][d]) if cf != 0.0})
            p = p * pj
        flat = dict(p.coeffs)
        flat.pop((0,) * n, None)
        for j in range(n):
            flat.pop(tuple(1 if jj == j else 0 for jj in range(n)), None)
        polys.append(Poly(n, flat))
    return exps_list, polys


def galerkin_refine(lin_map, lam, b, n_mat, max_iters=30, quad_order=None, tol=1e-9):
    """Gauss-Newton polish of Phi minimizing the PDE defect on the box.

    Parametrized over tensor-Legendre coefficients with the linear part held
    at the identity. Returns a map whose residual never exceeds the
    initializer's; on stagnation or divergence the best iterate (possibly the
    initializer itself) is returned with a warning.
    """
    n = lin_map.n
    box = lin_map.box
    d_max = lin_map.d_max or max(p.degree() for p in lin_map.phi)
    if quad_order is None:
        quad_order = 2 * d_max + 2
    nodes, wts = LegendreTensorBasis(box, 1).gauss_nodes(quad_order)
    sqw = np.sqrt(wts)
    n_q = nodes.shape[0]
    exps_list, bases = _legendre_tensor_polys(box, d_max)
    n_basis = len(bases)
    b_vals = np.array([np.atleast_1d(p.eval(nodes)) for p in bases])        # (B, Q)
    b_grad = np.array([[np.atleast_1d(p.diff(j).eval(nodes)) for j in range(n)]
                       for p in bases])                                     # (B, n, Q)
    alpha_vals = np.atleast_1d(lin_map.alpha.eval(nodes)) if lin_map.alpha is not None \
        else np.zeros(n_q)
    k = lin_map.k
    a_t = lin_map.a_target
    lam_mat = np.diag(np.asarray(lam, float)) if np.ndim(lam) == 1 else np.asarray(lam)
    gain = np.asarray(b, float)[:, None] + np.asarray(n_mat, float) @ nodes.T  # (n, Q)
    lam_w = lam_mat @ nodes.T

    # initial coefficients: project the initializer's high-degree part onto the basis
    weighted = (b_vals * sqw).T                                             # (Q, B)
    coeffs = np.empty((n, n_basis))
    for i in range(n):
        hi_part = lin_map.phi[i].truncated(d_max).copy()
        hi_part.coeffs.pop(tuple(1 if j == i else 0 for j in range(n)), None)
        hi_part.coeffs.pop((0,) * n, None)
        target = np.atleast_1d(hi_part.eval(nodes)) * sqw
        coeffs[i], *_ = np.linalg.lstsq(weighted, target, rcond=None)

    def residual_vec(c):
        phi_v = nodes.T + c @ b_vals                                        # (n, Q)
        u = alpha_vals - k @ phi_v
        vfield = lam_w + gain * u
        grads = np.zeros((n, n, n_q))
        for m in range(n):
            for j in range(n):
                grads[m, j] = (1.0 if m == j else 0.0) + c[m] @ b_grad[:, j]
        r = np.einsum("mjq,jq->mq", grads, vfield) - a_t @ phi_v
        return (r * sqw).ravel(), phi_v, vfield, grads

    def build_phi(c):
        phi = []
        for i in range(n):
            p = Poly.var(n, i)
            for t in range(n_basis):
                if c[i, t]:
                    p = p + float(c[i, t]) * bases[t]
            phi.append(p)
        return phi

    init_res = lin_map.residual_norm if np.isfinite(lin_map.residual_norm) else \
        pde_residual(lin_map.phi, lam, b, n_mat, k, a_t, box, quad_order, lin_map.alpha)
    if init_res <= tol:
        return lin_map
    r_vec, *_ = residual_vec(coeffs)
    best_res = float(np.linalg.norm(r_vec))
    best_c = coeffs.copy()
    improved_any = best_res < init_res
    for _ in range(max_iters):
        if best_res <= tol:
            break
        r_vec, phi_v, vfield, grads = residual_vec(best_c)
        gg = np.einsum("mjq,jq->mq", grads, gain)
        jac = np.zeros((n * n_q, n * n_basis))
        t1 = np.einsum("tjq,jq->tq", b_grad, vfield)
        for i in range(n):
            cstart = i * n_basis
            jac[i * n_q:(i + 1) * n_q, cstart:cstart + n_basis] += (t1 * sqw).T
            for m in range(n):
                block = (-k[i]) * gg[m][None, :] * b_vals - a_t[m, i] * b_vals
                jac[m * n_q:(m + 1) * n_q, cstart:cstart + n_basis] += (block * sqw).T
        step_dir, *_ = np.linalg.lstsq(jac, -r_vec, rcond=None)
        step_dir = step_dir.reshape(n, n_basis)
        step = 1.0
        moved = False
        for _ in range(25):
            cand = best_c + step * step_dir
            r_new, *_ = residual_vec(cand)
            r_norm = float(np.linalg.norm(r_new))
            if r_norm < best_res:
                best_c, best_res, moved = cand, r_norm, True
                improved_any = True
                break
            step *= 0.5
        if not moved:
            break
    if not improved_any and best_res >= init_res:
        warnings.warn("Galerkin refinement did not improve the residual; "
                      "returning the initializer")
        return lin_map
    phi = build_phi(best_c)
    res = pde_residual(phi, lam, b, n_mat, k, a_t, box, quad_order, lin_map.alpha)
    if res > init_res:
        warnings.warn("refined residual exceeds the initializer's; keeping initializer")
        return lin_map
    return LinearizingMap(k=k, a_target=a_t, phi=phi, box=box, residual_norm=res,
                          d_max=d_max, alpha=lin_map.alpha)


@dataclass
class FeedbackController:
    """State-feedback closure u(x) = alpha(w) - k^T Phi(w), w = phi_n[x]."""

    lin_map: LinearizingMap
    weights: np.ndarray
    dictionary: object
    linear_mode: bool = False

    def lift(self, x):
        return self.weights @ self.dictionary.feature_map(x)

    def __call__(self, x):
        w = self.lift(x)
        if self.linear_mode:
            return self.lin_map.control_linear(w)
        return self.lin_map.control(w)

    def linear_variant(self):
        return FeedbackController(self.lin_map, self.weights, self.dictionary,
                                  linear_mode=True)


def make_controller(lin_map, weights, dictionary):
    weights = np.atleast_2d(weights)
    if weights.shape[0] != lin_map.n:
        raise ParameterError("map order and functional count disagree")
    return FeedbackController(lin_map, weights, dictionary)


@dataclass
class LiftedTrajectory:
    times: np.ndarray
    states: np.ndarray      # (len(times), n)
    inputs: np.ndarray
    blowup: Optional[float] = None
    _sol: object = field(default=None, repr=False)

    def state_at(self, t):
        if self._sol is None:
            raise IntegrationError("lifted trajectory stored without dense output")
        return self._sol(np.asarray(t))


def simulate_bilinear(lam, b, n_mat, control_w, w0, t_final, t_eval=None,
                      rtol=1e-8, atol=1e-10, blowup_threshold=1e3, dense=False):
    """Closed- or open-loop solve of dw/dt = Lambda w + (b + N w) u(w)."""
    if t_final <= 0:
        raise ParameterError("horizon must be positive")
    lam_mat = np.diag(np.asarray(lam, float)) if np.ndim(lam) == 1 else np.asarray(lam)
    b = np.asarray(b, float)
    n_mat = np.asarray(n_mat, float)
    if control_w is None:
        u_of = lambda w: 0.0
    elif np.isscalar(control_w):
        u_of = lambda w, _u=float(control_w): _u
    else:
        u_of = control_w

    def rhs(t, w):
        return lam_mat @ w + (b + n_mat @ w) * u_of(w)

    event = lambda t, w: blowup_threshold - np.max(np.abs(w))
    event.terminal = True
    event.direction = -1
    sol = solve_ivp(rhs, (0.0, t_final), np.asarray(w0, float), method="LSODA",
                    t_eval=t_eval, rtol=rtol, atol=atol, events=event,
                    dense_output=dense)
    if sol.status == -1:
        raise IntegrationError(f"bilinear integration failed: {sol.message}")
    blowup = float(sol.t_events[0][0]) if sol.status == 1 else None
    states = sol.y.T
    inputs = np.array([u_of(w) for w in states])
    return LiftedTrajectory(sol.t, states, inputs, blowup=blowup,
                            _sol=sol.sol if dense else None)


def simulate_linear_target(a_target, w0, times):
    """w~(t) = expm(A~ t) w~(0) evaluated at the output times."""
    a_target = np.asarray(a_target, float)
    w0 = np.asarray(w0, float)
    times = np.asarray(times, float)
    return np.array([sla.expm(a_target * t) @ w0 for t in times])
