"""Ground-truth simulator of the boundary-controlled reaction-diffusion plant.

The identification and control pipeline never reads the coefficients stored
here; they exist only to generate data and to evaluate closed-loop runs.

Semi-discretization: second-order central differences with ghost points for
the Neumann conditions x'(0) = 0 and x'(1) = u; the input enters the last
node's update as rho * 2u/h. Time stepping is scipy's adaptive LSODA, which
switches to BDF on the stiff diffusive part.
"""

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import BlowUpError, IntegrationError, ParameterError
from .spatial import Grid, StateProfile


@dataclass(frozen=True)
class PlantSpec:
    """Diffusion rho, reaction coefficient a(z), nonlinearity f(z, x).

    f must vanish with zero slope at x = 0 so the origin is an equilibrium.
    """

    rho: float
    a: Callable[[np.ndarray], np.ndarray]
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dfdx: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.rho <= 0:
            raise ParameterError(f"diffusion must be positive, got {self.rho}")

    @staticmethod
    def reaction_diffusion(rho=1.0, a=0.5, quad=0.5):
        """The running example: a(z) constant, f(z, x) = quad * x^2."""
        return PlantSpec(
            rho=rho,
            a=lambda z: np.full_like(z, a),
            f=lambda z, x: quad * x * x,
            dfdx=lambda z, x: 2.0 * quad * x,
        )

    @staticmethod
    def linear(rho=1.0, a=0.0):
        return PlantSpec(
            rho=rho,
            a=lambda z: np.full_like(z, a),
            f=lambda z, x: np.zeros_like(x),
            dfdx=lambda z, x: np.zeros_like(x),
        )


@dataclass
class Trajectory:
    """Output-time samples of one simulation, truncated at blow-up if any."""

    grid: Grid
    times: np.ndarray
    states: np.ndarray          # (len(times), grid.n)
    inputs: np.ndarray          # u at output times
    blowup: Optional[float] = None
    _sol: object = field(default=None, repr=False)

    @property
    def profiles(self):
        return [StateProfile(self.grid, s) for s in self.states]

    def profile(self, k):
        return StateProfile(self.grid, self.states[k])

    def state_at(self, t):
        """Dense-output state at an arbitrary time inside the integrated span."""
        if self._sol is None:
            raise IntegrationError("trajectory was stored without dense output")
        return StateProfile(self.grid, self._sol(t))

    def export(self, path):
        """Text matrix: first row = times, first column = z nodes, corner 0."""
        body = np.empty((self.grid.n + 1, len(self.times) + 1))
        body[0, 0] = 0.0
        body[0, 1:] = self.times
        body[1:, 0] = self.grid.nodes
        body[1:, 1:] = self.states.T
        np.savetxt(path, body, fmt="%.17g")


@dataclass
class SnapshotDataset:
    """M open-loop snapshot pairs plus one optional derivative sample."""

    grid: Grid
    x: np.ndarray               # (M, grid.n)
    xplus: np.ndarray           # (M, grid.n)
    t_s: float
    deriv_x: Optional[np.ndarray] = None      # x(., t0)
    deriv_xdot: Optional[np.ndarray] = None   # xdot(., t0)
    deriv_u0: Optional[float] = None
    deriv_t0: Optional[float] = None

    def __post_init__(self):
        if self.t_s < 0:
            raise ParameterError("sampling time must be >= 0")
        if self.x.shape != self.xplus.shape:
            raise ParameterError("snapshot blocks have mismatched shapes")

    @property
    def m(self):
        return self.x.shape[0]

    def pair(self, i):
        return StateProfile(self.grid, self.x[i]), StateProfile(self.grid, self.xplus[i])

    def derivative_profiles(self):
        return (StateProfile(self.grid, self.deriv_x),
                StateProfile(self.grid, self.deriv_xdot))


def _resolve_input(control):
    """Normalize the control argument to a callable (t, profile) -> u."""
    if control is None:
        return lambda t, p: 0.0
    if np.isscalar(control):
        u0 = float(control)
        return lambda t, p: u0
    return lambda t, p: float(control(p))


def simulate(plant, x0, control, t_final, t_eval=None, rtol=1e-8, atol=1e-10,
             blowup_threshold=1e3, dense=False):
    """Method-of-lines solve of the plant under a constant or feedback input.

    `control` may be None (u = 0), a number (constant input), or a callable
    StateProfile -> u evaluated at every right-hand-side evaluation. Returns
    a Trajectory; if the sup-norm crosses `blowup_threshold` the trajectory is
    truncated there and `blowup` records the detector time.
    """
    if t_final < 0:
        raise ParameterError("horizon must be >= 0")
    grid = x0.grid
    z = grid.nodes
    h = grid.h
    a_vals = np.asarray(plant.a(z), float)
    if not np.allclose(plant.f(z, np.zeros_like(z)), 0.0, atol=1e-14):
        raise ParameterError("nonlinearity must vanish at x = 0")
    u_of = _resolve_input(control)
    c = plant.rho / h / h
    two_u_fac = 2.0 * plant.rho / h
    f = plant.f

    def rhs(t, x):
        d = np.empty_like(x)
        d[1:-1] = (x[:-2] - 2.0 * x[1:-1] + x[2:]) * c
        d[0] = 2.0 * (x[1] - x[0]) * c
        d[-1] = 2.0 * (x[-2] - x[-1]) * c
        d[-1] += two_u_fac * u_of(t, StateProfile(grid, x))
        return d + a_vals * x + f(z, x)

    if t_final == 0.0:
        times = np.array([0.0])
        states = x0.values[None, :].copy()
        u0 = u_of(0.0, x0)
        return Trajectory(grid, times, states, np.array([u0]))

    event = lambda t, x: blowup_threshold - np.max(np.abs(x))
    event.terminal = True
    event.direction = -1

    kwargs = {}
    feedback = callable(control)
    if not feedback:
        kwargs["lband"] = 1
        kwargs["uband"] = 1
    if t_eval is not None:
        t_eval = np.asarray(t_eval, float)

    sol = solve_ivp(rhs, (0.0, t_final), x0.values, method="LSODA",
                    t_eval=t_eval, rtol=rtol, atol=atol, events=event,
                    dense_output=dense, **kwargs)
    if sol.status == -1:
        raise IntegrationError(f"integration failed: {sol.message}",
                               last_time=sol.t[-1] if sol.t.size else 0.0,
                               last_state=sol.y[:, -1] if sol.t.size else x0.values)
    blowup = None
    times = np.asarray(sol.t, float)
    if sol.status == 1:
        blowup = float(sol.t_events[0][0])
    if times.size == 0:
        # blow-up before the first requested output time
        times = np.array([0.0])
        states = x0.values[None, :].copy()
    else:
        states = np.asarray(sol.y).T
    inputs = np.array([u_of(t, StateProfile(grid, s)) for t, s in zip(times, states)])
    return Trajectory(grid, times, states.copy(), inputs, blowup=blowup,
                      _sol=sol.sol if dense else None)


def collect_snapshots(plant, ic_sampler, m, t_s, rtol=1e-8, atol=1e-10,
                      blowup_threshold=1e3):
    """M open-loop pairs (x_i, x_i advanced by t_s) under u = 0.

    `ic_sampler` maps the sample index to a StateProfile. A blow-up before
    t_s aborts the collection and names the offending sample.
    """
    if m < 1:
        raise ParameterError("need at least one snapshot pair")
    grid = None
    xs, xps = [], []
    for i in range(m):
        x0 = ic_sampler(i)
        grid = x0.grid
        if t_s == 0.0:
            xs.append(x0.values.copy())
            xps.append(x0.values.copy())
            continue
        traj = simulate(plant, x0, None, t_s, t_eval=[t_s], rtol=rtol, atol=atol,
                        blowup_threshold=blowup_threshold)
        if traj.blowup is not None:
            raise BlowUpError(f"sample {i} blew up at t = {traj.blowup:.4g} < t_s",
                              blowup_time=traj.blowup, sample=i)
        xs.append(x0.values.copy())
        xps.append(traj.states[-1].copy())
    return SnapshotDataset(grid, np.array(xs), np.array(xps), t_s)


def derivative_sample(plant, x0, u0, t0, target_error=1e-6, rtol=1e-10, atol=1e-12):
    """State and time derivative at t0 under the constant input u0.

    The derivative is a central finite difference whose step is halved until
    a Richardson comparison estimates the differencing error below
    `target_error` (relative to the derivative's sup-norm).
    """
    if t0 < 0:
        raise ParameterError("t0 must be >= 0")
    dt = min(1e-2, t0 / 2) if t0 > 0 else 1e-2
    grid = x0.grid
    best = None
    for _ in range(8):
        if t0 > 0:
            te = [t0 - dt, t0 - dt / 2, t0, t0 + dt / 2, t0 + dt]
        else:
            te = [t0 + dt / 4, t0 + dt / 2, t0 + dt]
        traj = simulate(plant, x0, u0, t0 + dt, t_eval=te, rtol=rtol, atol=atol)
        if traj.blowup is not None:
            raise BlowUpError("derivative sample simulation blew up",
                              blowup_time=traj.blowup)
        if t0 > 0:
            xm, xm2, xc, xp2, xp = traj.states
            d_full = (xp - xm) / (2.0 * dt)
            d_half = (xp2 - xm2) / dt
        else:
            # second-order one-sided differences at the left end of the run
            xq, xh, xf = traj.states
            xc = x0.values
            d_full = (-3.0 * xc + 4.0 * xh - xf) / dt
            d_half = (-3.0 * xc + 4.0 * xq - xh) / (dt / 2.0)
        scale = max(1.0, np.max(np.abs(d_half)))
        err = np.max(np.abs(d_half - d_full)) / 3.0 / scale
        best = (StateProfile(grid, xc), StateProfile(grid, d_half))
        if err <= target_error:
            return best
        dt /= 2.0
    warnings.warn(f"derivative step refinement stalled (estimated error {err:.2e})")
    return best
