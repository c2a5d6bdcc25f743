"""Two-state reductions: first integral, quadrature formulas, shooting.

On a two-point state space the full game system collapses to a planar
Hamiltonian system in x = p_1 and y = Phi_1 - Phi_2 with

    dx/ds =  h theta(x) H'(h y),
    dy/ds = -H(h y) theta'(x) - Fbar'(x),        h = sqrt(w_12),

conserving  script_H(x, y) = H(h y) theta(x) + Fbar(x).  The conserved value
H0 turns boundary-value problems into algebraic equations solved here by
safeguarded Newton iterations, and transport distances into explicit
quadratures.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadExponent,
    MidpointDivergence,
    NewtonFailure,
    NoMonotonePath,
    OutOfDomain,
    QuadratureFailure,
    WrongStateCount,
)
from .quadrature import adaptive_simpson, adaptive_simpson_sqrt_ends

QUAD_TOL = 1e-10
BOUNDARY_SNAP = 1e-8


@dataclass(frozen=True)
class TwoPointProblem:
    """Reduced two-state problem data.

    ``theta``/``theta_prime``/``F_bar``/``F_bar_prime``/``G_diff`` are
    vectorized callables of x in [0, 1]; ``pair`` supplies H, H', H^-1.
    ``source`` optionally keeps the unreduced problem for lifting.
    """

    h: float
    theta: callable
    theta_prime: callable
    pair: object
    F_bar: callable
    F_bar_prime: callable
    G_diff: callable
    horizon: tuple = (0.0, 1.0)
    source: object = field(default=None, repr=False)

    def __post_init__(self):
        if not self.h > 0.0:
            raise ValueError("h must be positive")
        xs = np.linspace(0.05, 0.95, 19)
        if np.min(np.asarray(self.theta(xs), dtype=float)) <= 0.0:
            raise ValueError("theta must be positive on (0, 1)")
        step = 1e-4
        fd = (np.asarray(self.F_bar(xs + step)) - np.asarray(self.F_bar(xs - step))) / (
            2.0 * step
        )
        gap = np.max(np.abs(fd - np.asarray(self.F_bar_prime(xs), dtype=float)))
        scale = 1.0 + float(np.max(np.abs(np.asarray(self.F_bar_prime(xs)))))
        if gap > 1e-6 * scale:
            raise ValueError(f"F_bar' disagrees with F_bar by {gap:.3e}")


@dataclass(frozen=True)
class ReducedTrajectory:
    """Time grid, reduced state x, adjoint difference y, Hamiltonian trace."""

    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    hamiltonian: np.ndarray


@dataclass(frozen=True)
class PlanningSolution:
    h0: float
    trajectory: ReducedTrajectory
    iterations: int


@dataclass(frozen=True)
class GameSolution:
    x_terminal: float
    h0: float
    trajectory: ReducedTrajectory
    iterations: int
    residuals: tuple
    note: str = ""


def _hermite_antiderivative(fprime, n=2001):
    """Antiderivative of fprime on [0, 1] with F(0) = 0.

    Cumulative Simpson on a uniform grid followed by cubic Hermite evaluation
    (the exact derivative is known at the nodes), giving ~1e-13 accuracy for
    smooth integrands.
    """
    xs = np.linspace(0.0, 1.0, n)
    h = xs[1] - xs[0]
    fp = np.array([float(fprime(x)) for x in xs])
    fmid = np.array([float(fprime(x + h / 2.0)) for x in xs[:-1]])
    incr = h / 6.0 * (fp[:-1] + 4.0 * fmid + fp[1:])
    vals = np.concatenate([[0.0], np.cumsum(incr)])

    def F(x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(xs, x) - 1, 0, n - 2)
        t = (x - xs[idx]) / h
        h00 = (1 + 2 * t) * (1 - t) ** 2
        h10 = t * (1 - t) ** 2
        h01 = t * t * (3 - 2 * t)
        h11 = t * t * (t - 1)
        return (
            h00 * vals[idx]
            + h10 * h * fp[idx]
            + h01 * vals[idx + 1]
            + h11 * h * fp[idx + 1]
        )

    return F


def reduce(prob):
    """Collapse a two-state problem to its (x, y) reduction.

    theta(x) is the edge activation at p = (x, 1-x); Fbar integrates
    F_1 - F_2 with the gauge Fbar(0) = 0 (only Fbar' enters the dynamics).
    """
    g = prob.graph
    if g.n != 2:
        raise WrongStateCount(f"two-point reduction needs n = 2, got n = {g.n}")
    h = float(g.sqrt_w[0])
    act = prob.activation
    pi0, pi1 = float(g.pi[0]), float(g.pi[1])

    def theta(x):
        x = np.asarray(x, dtype=float)
        return np.asarray(act.theta(x / pi0, (1.0 - x) / pi1), dtype=float)

    def theta_prime(x):
        x = np.asarray(x, dtype=float)
        a = x / pi0
        b = (1.0 - x) / pi1
        return (
            np.asarray(act.theta_dx(a, b), dtype=float) / pi0
            - np.asarray(act.theta_dy(a, b), dtype=float) / pi1
        )

    def fbar_prime_scalar(x):
        f = prob.F(np.array([x, 1.0 - x]))
        return float(f[0] - f[1])

    F_bar_prime = np.vectorize(fbar_prime_scalar, otypes=[float])
    F_bar = _hermite_antiderivative(fbar_prime_scalar)

    def G_diff(x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            gv = prob.G(np.array([float(x), 1.0 - float(x)]))
            return float(gv[0] - gv[1])
        return np.array([G_diff(float(v)) for v in x])

    return TwoPointProblem(
        h=h,
        theta=theta,
        theta_prime=theta_prime,
        pair=prob.lagrangian,
        F_bar=F_bar,
        F_bar_prime=F_bar_prime,
        G_diff=G_diff,
        horizon=prob.horizon,
        source=prob,
    )


def reduced_hamiltonian(tp, x, y):
    """script_H(x, y) = H(h y) theta(x) + Fbar(x); conserved along orbits."""
    if not 0.0 < x < 1.0:
        raise OutOfDomain(f"x = {x} outside (0, 1)")
    return float(
        np.asarray(tp.pair.H(tp.h * y)) * np.asarray(tp.theta(x)) + np.asarray(tp.F_bar(x))
    )


def _rhs(tp, x, y):
    dx = tp.h * float(tp.theta(x)) * float(tp.pair.H_prime(tp.h * y))
    dy = -float(tp.pair.H(tp.h * y)) * float(tp.theta_prime(x)) - float(tp.F_bar_prime(x))
    return dx, dy


def integrate_reduced(tp, x0, y0, t_end, dt):
    """Implicit-midpoint integration of the reduced Hamiltonian system.

    Symplectic, so the Hamiltonian drift is O(dt^2) uniformly on [0, t_end].
    The inner midpoint equation is solved by fixed-point iteration (50-sweep
    cap); x leaving (0, 1) raises OutOfDomain.
    """
    if not 0.0 < x0 < 1.0:
        raise OutOfDomain(f"x0 = {x0} outside (0, 1)")
    n_steps = max(1, int(np.ceil(t_end / dt - 1e-12)))
    step = t_end / n_steps
    times = np.linspace(0.0, t_end, n_steps + 1)
    xs = np.empty(n_steps + 1)
    ys = np.empty(n_steps + 1)
    xs[0], ys[0] = x0, y0
    x, y = float(x0), float(y0)
    for k in range(n_steps):
        xn, yn = x, y
        converged = False
        for _ in range(50):
            xm = 0.5 * (x + xn)
            ym = 0.5 * (y + yn)
            xm = min(max(xm, 1e-15), 1.0 - 1e-15)
            dx, dy = _rhs(tp, xm, ym)
            xn2 = x + step * dx
            yn2 = y + step * dy
            if abs(xn2 - xn) + abs(yn2 - yn) < 1e-14 * (1.0 + abs(xn) + abs(yn)):
                xn, yn = xn2, yn2
                converged = True
                break
            xn, yn = xn2, yn2
        if not converged:
            raise MidpointDivergence(f"midpoint iteration stalled at t = {times[k]:.6g}")
        if not 0.0 < xn < 1.0:
            raise OutOfDomain(f"x = {xn:.6g} left (0, 1) at t = {times[k + 1]:.6g}")
        x, y = xn, yn
        xs[k + 1], ys[k + 1] = x, y
    ham = np.array([reduced_hamiltonian(tp, xv, yv) for xv, yv in zip(xs, ys)])
    return ReducedTrajectory(times=times, x=xs, y=ys, hamiltonian=ham)


def wasserstein_alpha(tp, p0, p1, alpha, quad_tol=QUAD_TOL):
    """Transport distance (1/h) |integral of theta(x)^(-1/beta) dx|.

    beta is the conjugate exponent of alpha. Symmetric in (p0, p1) by
    construction (the integral always runs from min to max) and zero iff the
    endpoints coincide. Endpoints within 1e-8 of the simplex corners trigger
    the square-root endpoint substitution that tames theta -> 0 there.
    """
    if not alpha > 1.0:
        raise BadExponent(f"alpha must exceed 1, got {alpha}")
    if not (0.0 <= p0 <= 1.0 and 0.0 <= p1 <= 1.0):
        raise OutOfDomain("endpoints must lie in [0, 1]")
    if p0 == p1:
        return 0.0
    beta = alpha / (alpha - 1.0)
    lo, hi = (p0, p1) if p0 < p1 else (p1, p0)

    def integrand(x):
        th = np.asarray(tp.theta(x), dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(th > 0.0, th ** (-1.0 / beta), np.inf)

    near_corner = lo < BOUNDARY_SNAP or hi > 1.0 - BOUNDARY_SNAP
    if near_corner:
        val = adaptive_simpson_sqrt_ends(integrand, lo, hi, tol=quad_tol)
    else:
        val = adaptive_simpson(integrand, lo, hi, tol=quad_tol)
    return abs(val) / tp.h


def _quad_tol_for(tol):
    """Quadrature tolerance for the shooting residuals.

    Tracks the Newton tolerance but stays above 1e-10: square-root endpoint
    integrands carry cancellation noise that caps their certifiable
    accuracy near that level.
    """
    return min(1e-7, max(1e-10, 0.1 * tol))


def _speed_sq(tp, x, h0):
    """2 (H0 - Fbar(x)) theta(x), the squared reduced speed over h."""
    x = np.asarray(x, dtype=float)
    return 2.0 * (h0 - np.asarray(tp.F_bar(x), dtype=float)) * np.asarray(
        tp.theta(x), dtype=float
    )


def _travel_time(tp, a, b, h0, quad_tol=QUAD_TOL):
    """(1/h) |integral dx / sqrt(2 (H0 - Fbar) theta)| for the quadratic pair.

    Returns inf when the path is infeasible (the radicand turns nonpositive
    strictly inside the interval) or the quadrature cannot converge.
    """
    if a == b:
        return 0.0
    lo, hi = (a, b) if a < b else (b, a)
    probe = lo + (hi - lo) * np.linspace(1e-6, 1.0 - 1e-6, 257)
    if np.min(_speed_sq(tp, probe, h0)) <= 0.0:
        return np.inf

    def integrand(x):
        v = _speed_sq(tp, x, h0)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = 1.0 / np.sqrt(np.maximum(v, 0.0))
        return np.where(v > 0.0, out, np.inf)

    try:
        val = adaptive_simpson_sqrt_ends(integrand, lo, hi, tol=quad_tol)
    except QuadratureFailure:
        return np.inf
    return val / tp.h


def _fbar_max(tp, a, b):
    lo, hi = (a, b) if a <= b else (b, a)
    xs = np.linspace(lo, hi, 1025)
    return float(np.max(np.asarray(tp.F_bar(xs), dtype=float)))


def solve_planning(tp, p0, p1, t_horizon, tol=1e-10, n_steps=1024):
    """Fixed-endpoint problem: find H0 with travel time p0 -> p1 equal to T - t.

    Quadratic pair only. The scalar time equation is solved by a Newton
    iteration with secant slope and bisection fallback on the bracket
    (max Fbar, 1e6]; travel time is strictly decreasing in H0, so the
    bracket is preserved. The trajectory is rebuilt by integrating the
    first-order equation dx/ds = sign(p1 - p0) h sqrt(2 (H0 - Fbar) theta).
    """
    if not tp.pair.is_quadratic:
        raise BadExponent("planning requires the quadratic pair (alpha = 2)")
    if p0 == p1:
        raise NoMonotonePath("endpoints coincide; no transport needed")
    if not (0.0 < p0 < 1.0 and 0.0 < p1 < 1.0):
        raise OutOfDomain("endpoints must lie strictly inside (0, 1)")
    fmax = _fbar_max(tp, p0, p1)
    lo = fmax + max(1e-13, 1e-12 * abs(fmax))
    quad_tol = _quad_tol_for(tol)
    t_lo = _travel_time(tp, p0, p1, lo, quad_tol=quad_tol)
    if t_lo < t_horizon:
        raise NoMonotonePath(
            "even the slowest monotone path is faster than the horizon; "
            "a turning-point solution would be required"
        )
    hi = max(1.0, 2.0 * abs(fmax) + 1.0)
    while _travel_time(tp, p0, p1, hi, quad_tol=quad_tol) > t_horizon:
        hi *= 4.0
        if hi > 1e6:
            raise NewtonFailure("no H0 <= 1e6 reaches the horizon", iterate=hi)

    g_lo = t_lo - t_horizon
    g_hi = _travel_time(tp, p0, p1, hi, quad_tol=quad_tol) - t_horizon
    h0 = 0.5 * (lo + hi) if not np.isfinite(g_lo) else lo + (hi - lo) * 0.5
    g_cur = _travel_time(tp, p0, p1, h0, quad_tol=quad_tol) - t_horizon
    prev, g_prev = hi, g_hi
    iterations = 0
    for iterations in range(1, 201):
        if abs(g_cur) <= tol:
            break
        # maintain the sign bracket: g decreases in H0
        if g_cur > 0.0:
            lo, g_lo = h0, g_cur
        else:
            hi, g_hi = h0, g_cur
        step = None
        if np.isfinite(g_prev) and g_prev != g_cur:
            slope = (g_cur - g_prev) / (h0 - prev)
            if slope != 0.0 and np.isfinite(slope):
                cand = h0 - g_cur / slope
                if lo < cand < hi:
                    step = cand
        if step is None:
            step = 0.5 * (lo + hi)
        prev, g_prev = h0, g_cur
        h0 = step
        g_cur = _travel_time(tp, p0, p1, h0, quad_tol=quad_tol) - t_horizon
    else:
        raise NewtonFailure(
            "time equation did not converge", iterate=h0, residuals=(g_cur,)
        )

    traj = _monotone_trajectory(tp, p0, p1, h0, t_horizon, n_steps)
    return PlanningSolution(h0=float(h0), trajectory=traj, iterations=iterations)


def _monotone_trajectory(tp, p0, p1, h0, t_horizon, n_steps):
    sgn = 1.0 if p1 >= p0 else -1.0

    def speed(x):
        x = min(max(float(x), 1e-15), 1.0 - 1e-15)
        return sgn * tp.h * np.sqrt(max(float(_speed_sq(tp, np.array(x), h0)), 0.0))

    dt = t_horizon / n_steps
    times = np.linspace(0.0, t_horizon, n_steps + 1)
    xs = np.empty(n_steps + 1)
    xs[0] = p0
    x = float(p0)
    for k in range(n_steps):
        k1 = speed(x)
        k2 = speed(x + 0.5 * dt * k1)
        k3 = speed(x + 0.5 * dt * k2)
        k4 = speed(x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        xs[k + 1] = x
    ys = y_of_x(tp, xs, h0, sgn)
    ham = np.array(
        [reduced_hamiltonian(tp, min(max(xv, 1e-12), 1 - 1e-12), yv) for xv, yv in zip(xs, ys)]
    )
    return ReducedTrajectory(times=times, x=xs, y=ys, hamiltonian=ham)


def y_of_x(tp, x, h0, direction):
    """Adjoint difference along a monotone orbit at energy h0.

    y(x) = direction * H^-1((H0 - Fbar(x))/theta(x)) / h, the first-integral
    branch with the sign of the motion (H' is odd).
    """
    x = np.asarray(x, dtype=float)
    ratio = (h0 - np.asarray(tp.F_bar(x), dtype=float)) / np.asarray(
        tp.theta(x), dtype=float
    )
    return direction * np.asarray(tp.pair.h_inverse_nonneg(np.maximum(ratio, 0.0))) / tp.h


def game_root(tp, p0, t_horizon, tol=1e-8, max_iter=120, guess=None):
    """Algebraic core of the potential-game solve: (x_T, H0, iters, res, note).

    Solves   time(p0 -> x_T; H0) = T - t
             theta(x_T) H(h G(x_T)) + Fbar(x_T) = H0
    by damped two-dimensional Newton with a finite-difference Jacobian (step
    halving up to 30, iterates kept inside x_T in [1e-8, 1 - 1e-8],
    |H0| <= 1e6). The initial x_T guess runs explicit Euler on the reduced
    system from (p0, G(p0)) unless ``guess`` supplies one (grid fills warm
    start from neighbor solutions). Roots with G(x_T) ~ 0 sit on the
    feasibility boundary where the 2D Jacobian degenerates; those fall back
    to the scalar time equation with the terminal-energy relation
    substituted, the same reduction the one-equation closed form uses.
    """
    if not tp.pair.is_quadratic:
        raise BadExponent("the game shooting solver requires the quadratic pair")
    if not 0.0 < p0 < 1.0:
        raise OutOfDomain("p0 must lie strictly inside (0, 1)")
    quad_tol = _quad_tol_for(tol)

    # stationary equilibrium: zero reduced velocity and zero adjoint drift
    # at p0 with the terminal map already satisfied (y = G(p0) = 0)
    y0 = float(tp.G_diff(p0))
    dx0, dy0 = _rhs(tp, p0, y0)
    if abs(dx0) <= 1e-14 and abs(dy0) <= 1e-13 and abs(y0) <= 1e-13:
        h0 = reduced_hamiltonian(tp, p0, y0)
        return float(p0), h0, 0, (0.0, 0.0), "stationary"

    if guess is None:
        # explicit-Euler warm start from the terminal-map reading at p0
        x, y = float(p0), y0
        n_guess = 256
        dt_g = t_horizon / n_guess
        with np.errstate(over="ignore"):
            for _ in range(n_guess):
                dx, dy = _rhs(tp, min(max(x, 1e-6), 1 - 1e-6), y)
                x += dt_g * dx
                y += dt_g * dy
                x = min(max(x, 1e-6), 1.0 - 1e-6)
                y = min(max(y, -1e3), 1e3)
        xt_guess = min(max(x, 1e-4), 1.0 - 1e-4)
    else:
        xt_guess = min(max(float(guess), 1e-4), 1.0 - 1e-4)

    def residual(z):
        xt_z, h0_z = z
        if not 1e-8 <= xt_z <= 1.0 - 1e-8 or abs(h0_z) > 1e6:
            return np.array([np.inf, np.inf])
        r1 = _travel_time(tp, p0, xt_z, h0_z, quad_tol=quad_tol) - t_horizon
        r2 = _terminal_energy(tp, xt_z) - h0_z
        return np.array([r1, r2])

    try:
        z, r, iterations = _newton_2d(residual, tp, xt_guess, tol, max_iter)
        _monotone_checks(tp, p0, float(z[0]), float(z[1]))
    except (NewtonFailure, NoMonotonePath):
        z, r, iterations = _substituted_1d(
            residual, tp, p0, xt_guess, tol, max_iter,
            accept=lambda xt_c, h0_c: _monotone_checks(tp, p0, xt_c, h0_c),
        )

    xt, h0 = float(z[0]), float(z[1])
    return xt, h0, iterations, (float(r[0]), float(r[1])), (
        "first converged root; uniqueness not guaranteed"
    )


def _monotone_checks(tp, p0, xt, h0):
    """Reject roots whose orbit cannot be monotone; raises NoMonotonePath."""
    sgn = 0.0 if abs(xt - p0) < 1e-14 else (1.0 if xt > p0 else -1.0)
    g_t = float(tp.G_diff(xt))
    if sgn != 0.0 and g_t * sgn < -1e-9 * (1.0 + abs(g_t)):
        raise NoMonotonePath("terminal adjoint points against the direction of motion")
    interior = p0 + (xt - p0) * np.linspace(1e-4, 1.0 - 1e-4, 201)
    if sgn != 0.0 and np.min(_speed_sq(tp, interior, h0)) <= 0.0:
        raise NoMonotonePath("the reduced speed vanishes strictly inside the path")


def solve_potential_game(tp, p0, t_horizon, tol=1e-8, n_steps=1024, max_iter=120):
    """Free-endpoint game solve returning the full reduced trajectory.

    Finds (x_T, H0) via ``game_root`` and re-integrates the Hamiltonian
    system from (p0, y(p0; H0)) with the implicit midpoint rule, so the
    returned path conserves the Hamiltonian to O(dt^2) and its endpoint is
    an independent consistency check on the algebraic solve. The first
    converged root is returned and flagged in ``note``.
    """
    xt, h0, iterations, residuals, note = game_root(
        tp, p0, t_horizon, tol=tol, max_iter=max_iter
    )
    if note == "stationary":
        times = np.linspace(0.0, t_horizon, n_steps + 1)
        y_const = float(tp.G_diff(p0))
        return GameSolution(
            x_terminal=xt,
            h0=h0,
            trajectory=ReducedTrajectory(
                times=times,
                x=np.full(n_steps + 1, p0),
                y=np.full(n_steps + 1, y_const),
                hamiltonian=np.full(n_steps + 1, h0),
            ),
            iterations=iterations,
            residuals=residuals,
            note=note,
        )
    sgn = 1.0 if xt >= p0 else -1.0
    y0 = float(y_of_x(tp, np.array(p0), h0, sgn))
    traj = integrate_reduced(tp, p0, y0, t_horizon, t_horizon / n_steps)
    return GameSolution(
        x_terminal=xt,
        h0=h0,
        trajectory=traj,
        iterations=iterations,
        residuals=residuals,
        note=note,
    )


def _terminal_energy(tp, xt):
    """theta(x_T) H(h G(x_T)) + Fbar(x_T): the conserved value read at T."""
    return float(
        np.asarray(tp.theta(xt)) * np.asarray(tp.pair.H(tp.h * tp.G_diff(xt)))
        + np.asarray(tp.F_bar(xt))
    )


def _newton_2d(residual, tp, xt_guess, tol, max_iter):
    """Damped 2D Newton on (x_T, H0) with finite-difference Jacobian."""
    z = np.array([xt_guess, _terminal_energy(tp, xt_guess)])
    r = residual(z)
    if not np.all(np.isfinite(r)):
        raise NewtonFailure(
            "infeasible shooting initialization", iterate=tuple(z), residuals=tuple(r)
        )
    iterations = 0
    for iterations in range(1, max_iter + 1):
        if np.max(np.abs(r)) <= tol:
            return z, r, iterations
        jac = _fd_jacobian(residual, z, r)
        try:
            delta = np.linalg.solve(jac, r)
        except np.linalg.LinAlgError:
            raise NewtonFailure(
                "singular shooting Jacobian", iterate=tuple(z), residuals=tuple(r)
            ) from None
        lam = 1.0
        base = np.max(np.abs(r))
        accepted = False
        for _ in range(30):
            znew = z - lam * delta
            znew[0] = min(max(znew[0], 1e-8), 1.0 - 1e-8)
            rnew = residual(znew)
            if np.all(np.isfinite(rnew)) and np.max(np.abs(rnew)) < 0.9 * base:
                z, r = znew, rnew
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            raise NewtonFailure(
                "shooting step rejected after 30 halvings",
                iterate=tuple(z),
                residuals=tuple(r),
            )
    raise NewtonFailure(
        f"no convergence in {max_iter} iterations", iterate=tuple(z), residuals=tuple(r)
    )


def _substituted_1d(residual, tp, p0, xt_guess, tol, max_iter, accept=None):
    """Scalar fallback: H0 = terminal energy, solve the time equation in x_T.

    Along the substituted curve the travel time is smooth in x_T even when
    the terminal speed vanishes. Every sign-change bracket of the residual
    on a scan grid is polished (nearest the warm start first) by a
    safeguarded secant iteration; ``accept`` may veto a root (monotonicity
    checks), in which case the next bracket is tried.
    """

    def g(xc):
        return residual(np.array([xc, _terminal_energy(tp, xc)]))[0]

    def full_scan():
        grid = np.unique(
            np.clip(
                np.concatenate(
                    [np.linspace(1e-4, 1.0 - 1e-4, 61), [xt_guess, p0 + 1e-4, p0 - 1e-4]]
                ),
                1e-6,
                1.0 - 1e-6,
            )
        )
        vals = np.array([g(xc) for xc in grid])
        finite = np.isfinite(vals)
        found = []
        for k in range(len(grid) - 1):
            if finite[k] and finite[k + 1] and vals[k] * vals[k + 1] <= 0.0:
                dist = min(abs(grid[k] - xt_guess), abs(grid[k + 1] - xt_guess))
                found.append((dist, grid[k], vals[k], grid[k + 1], vals[k + 1]))
        return sorted(found)

    last_veto = None
    seen_any = False
    for phase in (_local_bracket(g, xt_guess), None):
        brackets = full_scan() if phase is None else phase
        for _, a, ga, b, gb in brackets:
            seen_any = True
            try:
                xc, gc, iterations = _secant_in_bracket(g, a, ga, b, gb, tol, max_iter)
            except NewtonFailure as exc:
                last_veto = exc
                continue
            h0c = _terminal_energy(tp, xc)
            if accept is not None:
                try:
                    accept(xc, h0c)
                except NoMonotonePath as exc:
                    last_veto = exc
                    continue
            return np.array([xc, h0c]), np.array([gc, 0.0]), iterations
    if last_veto is not None:
        raise last_veto
    raise NewtonFailure(
        "no sign change of the substituted time equation",
        iterate=xt_guess,
        residuals=(np.inf,) if not seen_any else (np.nan,),
    )


def _local_bracket(g, x0, step=0.015, levels=7):
    """Expand outward from x0 until the residual changes sign (cheap path)."""
    x0 = min(max(x0, 1e-6), 1.0 - 1e-6)
    g0 = g(x0)
    if not np.isfinite(g0):
        # infeasible center: walk outward for a finite anchor first
        for probe in (0.03, -0.03, 0.12, -0.12, 0.4, -0.4):
            xp = min(max(x0 + probe, 1e-6), 1.0 - 1e-6)
            gp = g(xp)
            if np.isfinite(gp):
                x0, g0 = xp, gp
                break
        else:
            return []
    for side in (1.0, -1.0):
        xa, ga = x0, g0
        width = step
        for _ in range(levels):
            xb = min(max(x0 + side * width, 1e-6), 1.0 - 1e-6)
            gb = g(xb)
            if np.isfinite(gb):
                if ga * gb <= 0.0:
                    lo, glo, hi, ghi = (xa, ga, xb, gb) if xa < xb else (xb, gb, xa, ga)
                    return [(0.0, lo, glo, hi, ghi)]
                xa, ga = xb, gb
            if xb in (1e-6, 1.0 - 1e-6):
                break
            width *= 2.0
    return []


def _secant_in_bracket(g, a, ga, b, gb, tol, max_iter):
    xc, gc = a, ga
    for iterations in range(1, max_iter + 1):
        if abs(gc) <= tol:
            return xc, gc, iterations
        if gb != ga:
            cand = b - gb * (b - a) / (gb - ga)
        else:
            cand = 0.5 * (a + b)
        if not a < cand < b and not b < cand < a:
            cand = 0.5 * (a + b)
        gcand = g(cand)
        if not np.isfinite(gcand):
            cand = 0.5 * (a + b)
            gcand = g(cand)
            if not np.isfinite(gcand):
                raise NewtonFailure(
                    "substituted time equation became infeasible inside the bracket",
                    iterate=cand,
                )
        if ga * gcand <= 0.0:
            b, gb = cand, gcand
        else:
            a, ga = cand, gcand
        xc, gc = cand, gcand
    raise NewtonFailure(
        f"substituted solve: no convergence in {max_iter} iterations",
        iterate=xc,
        residuals=(gc,),
    )


def _fd_jacobian(residual, z, r0):
    """Forward/backward finite-difference Jacobian robust to infeasible sides."""
    jac = np.zeros((2, 2))
    steps = (1e-7, 1e-7 * max(1.0, abs(z[1])))
    for col, dz in enumerate(steps):
        zp = z.copy()
        zp[col] += dz
        rp = residual(zp)
        if np.all(np.isfinite(rp)) and np.all(np.isfinite(r0)):
            jac[:, col] = (rp - r0) / dz
            continue
        zm = z.copy()
        zm[col] -= dz
        rm = residual(zm)
        if np.all(np.isfinite(rp)) and np.all(np.isfinite(rm)):
            jac[:, col] = (rp - rm) / (2.0 * dz)
        elif np.all(np.isfinite(rm)) and np.all(np.isfinite(r0)):
            jac[:, col] = (r0 - rm) / dz
        else:
            raise NewtonFailure(
                "cannot form a finite Jacobian column", iterate=tuple(z), residuals=tuple(r0)
            )
    return jac


def lift_to_solution(prob, traj):
    """Lift a reduced trajectory to a full (p, Phi, v) solution of ``prob``.

    p_k = (x_k, 1 - x_k). The reduction only tracks y = Phi_1 - Phi_2, so
    the second component is reconstructed by integrating its own adjoint
    equation dPhi_2/ds = -H(h y) dtheta/dp_2 - F_2(p) backward from
    G_2(p_T) (trapezoid); a bare (y, 0) gauge would leave a spurious
    common-mode drift in the adjoint residual.
    """
    from .activation import dtheta_edges
    from .mfg import MFGSolution, hamiltonian_value

    g = prob.graph
    if g.n != 2:
        raise WrongStateCount("lifting requires the two-state problem")
    n = len(traj.times)
    p = np.column_stack([traj.x, 1.0 - traj.x])
    rhs2 = np.empty(n)
    for k in range(n):
        _, dj = dtheta_edges(prob.activation, g, p[k])
        hval = float(prob.lagrangian.H(g.sqrt_w[0] * traj.y[k]))
        rhs2[k] = -hval * dj[0] - float(prob.F(p[k])[1])
    phi2 = np.empty(n)
    phi2[-1] = float(prob.G(p[-1])[1])
    dt = traj.times[1] - traj.times[0]
    for k in range(n - 2, -1, -1):
        phi2[k] = phi2[k + 1] - 0.5 * dt * (rhs2[k] + rhs2[k + 1])
    phi = np.column_stack([phi2 + traj.y, phi2])
    v = np.empty((n, 1))
    for k in range(n):
        v[k, 0] = float(prob.lagrangian.H_prime(g.sqrt_w[0] * (phi[k, 1] - phi[k, 0])))
    trace = None
    if prob.is_potential:
        trace = np.array([hamiltonian_value(prob, p[k], phi[k]) for k in range(n)])
    return MFGSolution(
        times=np.asarray(traj.times) if traj.times[0] == prob.horizon[0] else prob.horizon[0] + np.asarray(traj.times),
        p=p,
        phi=phi,
        v=v,
        hamiltonian_trace=trace,
        value=None,
        diagnostics={"lifted": True},
    )
