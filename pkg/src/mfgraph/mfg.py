"""Finite-state mean field games: convex and fixed-point solvers.

The potential solver maximizes the time-discretized payoff over edge fluxes
m with densities eliminated through the explicit-Euler continuity constraint
p_{k+1} = p_k - dt * div(m_k); densities are affine in the fluxes, so with a
concave activation and concave potentials the reduced objective is concave
and plain gradient ascent (adjoint-sweep gradients, Barzilai-Borwein step
guess, Armijo backtracking) converges globally. The adjoint variables of the
final gradient evaluation are exactly the discrete policy multipliers Phi.

The fixed-point solver iterates damped forward/backward explicit-Euler
sweeps of the coupled system and needs no potential structure.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .activation import CONCAVE_KINDS, dtheta_edges, theta_edges
from .errors import (
    NoPotentialStructure,
    NonConstantHamiltonian,
    NonConvergence,
    NotConcave,
    PositivityLoss,
)
from .graph import check_density

DENSITY_FLOOR = 1e-10
_CHECK_SEED = 20240517


@dataclass(frozen=True)
class MFGProblem:
    """Full problem data: graph, activation, conjugate pair, payoffs, horizon.

    ``F`` and ``G`` map a density to the length-n payoff-rate and terminal
    vectors. When the game is potential, ``F_potential``/``G_potential``
    carry the scalar functionals whose gradients they are; consistency is
    spot-checked tangentially at construction ((d_i - d_j) of the scalar
    against F_i - F_j, since only simplex directions are meaningful).
    """

    graph: object
    activation: object
    lagrangian: object
    F: callable
    G: callable
    p0: np.ndarray
    horizon: tuple = (0.0, 1.0)
    F_potential: callable = None
    G_potential: callable = None
    diagnostics: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        check_density(self.graph, self.p0)
        t0, t1 = self.horizon
        if not t0 < t1:
            raise ValueError(f"horizon must satisfy t < T, got {self.horizon}")
        rng = np.random.default_rng(_CHECK_SEED)
        for scalar, vector, label in (
            (self.F_potential, self.F, "F"),
            (self.G_potential, self.G, "G"),
        ):
            if scalar is None:
                continue
            for _ in range(10):
                p = rng.random(self.graph.n) + 0.2
                p /= p.sum()
                i, j = rng.choice(self.graph.n, size=2, replace=False)
                d = np.zeros(self.graph.n)
                d[i], d[j] = 1.0, -1.0
                eps = 1e-5
                fd = (scalar(p + eps * d) - scalar(p - eps * d)) / (2.0 * eps)
                vec = vector(p)
                if abs(fd - (vec[i] - vec[j])) > 1e-6 * (1.0 + abs(fd)):
                    raise ValueError(
                        f"{label} is not the gradient of its scalar potential "
                        f"(tangential mismatch {abs(fd - (vec[i] - vec[j])):.3e})"
                    )

    @property
    def is_potential(self):
        return self.F_potential is not None and self.G_potential is not None

    def restarted(self, p, t):
        """Same game viewed from state p at time t (used by characteristics)."""
        return replace(self, p0=np.asarray(p, dtype=float), horizon=(float(t), self.horizon[1]))


@dataclass(frozen=True)
class MFGSolution:
    """Uniform-grid trajectory (p, Phi, v) with diagnostics.

    ``v[k]`` holds the optimal velocity H'((grad_w Phi_k)_e) per stored edge;
    ``hamiltonian_trace`` and ``value`` are None for non-potential games.
    """

    times: np.ndarray
    p: np.ndarray
    phi: np.ndarray
    v: np.ndarray
    hamiltonian_trace: np.ndarray | None
    value: float | None
    diagnostics: dict


# ---------------------------------------------------------------------------
# Hamiltonian and payoff functionals


def hamiltonian_value(prob, p, phi):
    """script_H(p, Phi) = sum_edges H((grad_w Phi)_e) theta_e(p) + F_pot(p).

    Gauge-invariant: Phi enters only through edge differences.
    """
    if prob.F_potential is None:
        raise NoPotentialStructure("hamiltonian_value needs the scalar potential")
    g = prob.graph
    phi = np.asarray(phi, dtype=float)
    grad = g.sqrt_w * (phi[g.edge_j] - phi[g.edge_i])
    th = theta_edges(prob.activation, g, np.maximum(p, 1e-300))
    return float(np.sum(np.asarray(prob.lagrangian.H(grad)) * th) + prob.F_potential(p))


def value_of_trajectory(prob, sol):
    """Trapezoid payoff G_pot(p_T) - int (sum theta L(v) - F_pot) ds."""
    if not prob.is_potential:
        raise NoPotentialStructure("value_of_trajectory needs scalar potentials")
    g = prob.graph
    integrand = np.empty(len(sol.times))
    for k, t in enumerate(sol.times):
        th = theta_edges(prob.activation, g, np.maximum(sol.p[k], 1e-300))
        integrand[k] = float(
            np.sum(th * np.asarray(prob.lagrangian.L(sol.v[k])))
        ) - prob.F_potential(sol.p[k])
    return float(prob.G_potential(sol.p[-1]) - np.trapezoid(integrand, sol.times))


def homogeneous_value(prob, sol, beta=None):
    """Value via the homogeneity shortcut for H of degree beta.

    G_pot(p_T) - (beta - 1) (T - t) H0 + beta * int F_pot(p_s) ds, with H0
    the mean Hamiltonian trace, which must be constant to 1e-4. The horizon
    factor makes the identity exact for every T - t, not just unit horizons.
    """
    if not prob.is_potential:
        raise NoPotentialStructure("homogeneous_value needs scalar potentials")
    if beta is None:
        beta = prob.lagrangian.homogeneity_degree
    trace = sol.hamiltonian_trace
    h0 = float(np.mean(trace))
    drift = float(np.max(np.abs(trace - h0)))
    if drift > 1e-4:
        raise NonConstantHamiltonian(f"Hamiltonian trace drifts by {drift:.3e}")
    fvals = np.array([prob.F_potential(row) for row in sol.p])
    span = sol.times[-1] - sol.times[0]
    return float(
        prob.G_potential(sol.p[-1]) - (beta - 1.0) * span * h0 + beta * np.trapezoid(fvals, sol.times)
    )


# ---------------------------------------------------------------------------
# shared sweep machinery


def _forward_states(prob, m, n_t, dt):
    """Run the explicit-Euler continuity constraint; None when infeasible."""
    g = prob.graph
    p = np.empty((n_t + 1, g.n))
    th = np.empty((n_t, g.n_edges))
    p[0] = prob.p0
    for k in range(n_t):
        th[k] = theta_edges(prob.activation, g, np.maximum(p[k], 1e-300))
        p[k + 1] = p[k] - dt * (g.incidence @ m[k])
        if np.min(p[k + 1]) < DENSITY_FLOOR:
            return None, None
    return p, th


def _objective(prob, m, p, th, n_t, dt):
    run = 0.0
    for k in range(n_t):
        v = m[k] / th[k]
        run += float(np.sum(th[k] * np.asarray(prob.lagrangian.L(v)))) - prob.F_potential(p[k])
    return float(prob.G_potential(p[-1]) - dt * run)


def _adjoint(prob, m, p, th, n_t, dt):
    """Backward sweep: multipliers lam and the scaled flux gradient.

    grad[k] = (grad_w lam_{k+1})_e - L'(m_k/theta_k), i.e. dJ/dm / dt; its
    sup-norm is the optimality residual reported as convergence metric.
    """
    g = prob.graph
    lam = np.empty((n_t + 1, g.n))
    grad = np.empty((n_t, g.n_edges))
    lam[n_t] = prob.G(p[-1])
    for k in range(n_t - 1, -1, -1):
        v = m[k] / th[k]
        b = np.asarray(prob.lagrangian.L_prime(v), dtype=float)
        w = v * b - np.asarray(prob.lagrangian.L(v), dtype=float)
        di, dj = dtheta_edges(prob.activation, g, np.maximum(p[k], 1e-300))
        bump = np.zeros(g.n)
        np.add.at(bump, g.edge_i, di * w)
        np.add.at(bump, g.edge_j, dj * w)
        lam[k] = lam[k + 1] + dt * (bump + np.asarray(prob.F(p[k]), dtype=float))
        grad[k] = -(g.incidence.T @ lam[k + 1]) - b
    return lam, grad


def _check_tangential_concavity(fn, n, label):
    rng = np.random.default_rng(_CHECK_SEED + 1)
    for _ in range(10):
        p = rng.random(n) + 0.2
        p /= p.sum()
        i, j = rng.choice(n, size=2, replace=False)
        d = np.zeros(n)
        d[i], d[j] = 1.0, -1.0
        eps = 1e-4
        second = (fn(p + eps * d) - 2.0 * fn(p) + fn(p - eps * d)) / (eps * eps)
        if second > 1e-8:
            raise NotConcave(f"{label} has positive tangential curvature {second:.3e}")


def _spot_check_theta_concave(act):
    rng = np.random.default_rng(_CHECK_SEED + 2)
    pts = rng.uniform(0.2, 3.0, size=(50, 2))
    h = 1e-4
    for x, y in pts:
        fxx = float(act.theta(x + h, y) - 2 * act.theta(x, y) + act.theta(x - h, y)) / h**2
        fyy = float(act.theta(x, y + h) - 2 * act.theta(x, y) + act.theta(x, y - h)) / h**2
        fxy = float(
            act.theta(x + h, y + h)
            - act.theta(x + h, y - h)
            - act.theta(x - h, y + h)
            + act.theta(x - h, y - h)
        ) / (4 * h * h)
        eig = np.linalg.eigvalsh(np.array([[fxx, fxy], [fxy, fyy]]))
        if eig[-1] > 1e-5:
            raise NotConcave(f"theta fails the concavity spot check (eig {eig[-1]:.3e})")


def _package(prob, times, p, phi, diagnostics, value=None):
    g = prob.graph
    v = np.empty((len(times), g.n_edges))
    for k in range(len(times)):
        grad = g.sqrt_w * (phi[k][g.edge_j] - phi[k][g.edge_i])
        v[k] = np.asarray(prob.lagrangian.H_prime(grad), dtype=float)
    trace = None
    if prob.is_potential:
        trace = np.array([hamiltonian_value(prob, p[k], phi[k]) for k in range(len(times))])
    sol = MFGSolution(
        times=times, p=p, phi=phi, v=v, hamiltonian_trace=trace, value=value, diagnostics=diagnostics
    )
    if prob.is_potential and value is None:
        sol = MFGSolution(
            times=times,
            p=p,
            phi=phi,
            v=v,
            hamiltonian_trace=trace,
            value=value_of_trajectory(prob, sol),
            diagnostics=diagnostics,
        )
    return sol


# ---------------------------------------------------------------------------
# solvers


def solve_potential_convex(prob, n_t, tol=1e-8, max_iter=100_000, m0=None,
                           monotonicity_check=False):
    """Maximize the discrete payoff over fluxes; returns the full solution.

    Requires potential structure with tangentially concave potentials and a
    concave activation kind. Converged when the flux-gradient sup-norm
    (per unit time) drops to ``tol``. The line search rejects any step
    driving a density below 1e-10. Raises NonConvergence at the iteration
    cap with the last residual attached, and PositivityLoss when no feasible
    ascent step exists.
    """
    if not prob.is_potential:
        raise NoPotentialStructure("the convex solver needs scalar potentials")
    if prob.activation.kind not in CONCAVE_KINDS:
        _spot_check_theta_concave(prob.activation)
    _check_tangential_concavity(prob.F_potential, prob.graph.n, "F_potential")
    _check_tangential_concavity(prob.G_potential, prob.graph.n, "G_potential")

    g = prob.graph
    t0, t1 = prob.horizon
    dt = (t1 - t0) / n_t
    times = t0 + dt * np.arange(n_t + 1)
    m = np.zeros((n_t, g.n_edges)) if m0 is None else np.array(m0, dtype=float)

    p, th = _forward_states(prob, m, n_t, dt)
    if p is None:
        raise PositivityLoss("initial flux iterate already exits the simplex")
    j_cur = _objective(prob, m, p, th, n_t, dt)
    lam, grad = _adjoint(prob, m, p, th, n_t, dt)
    res = float(np.max(np.abs(grad)))
    step = 1.0
    prev_m = None
    prev_grad = None
    iterations = 0
    best_res, since_best = res, 0
    j_history = [j_cur]
    while res > tol:
        iterations += 1
        if iterations > max_iter:
            raise NonConvergence(
                "convex ascent hit the iteration cap",
                residual=res,
                iterations=iterations,
                solution=_package(prob, times, p, lam, {"residual": res, "converged": False}),
            )
        if prev_m is not None:
            s = m - prev_m
            yv = grad - prev_grad
            denom = -float(np.sum(s * yv))
            if denom > 1e-300:
                step = float(np.sum(s * s)) / denom
            step = min(max(step, 1e-12), 1e12)
        gnorm2 = float(np.sum(grad * grad))
        prev_m, prev_grad = m, grad
        accepted = False
        infeasible_only = True
        trial = step
        # near the optimum the true ascent increment drops below one ulp of
        # the objective; the roundoff allowance lets the (locally reliable)
        # Barzilai-Borwein step through so the gradient can keep shrinking
        slack = 4e-16 * (1.0 + abs(j_cur))
        for _ in range(70):
            m_try = m + trial * grad
            p_try, th_try = _forward_states(prob, m_try, n_t, dt)
            if p_try is None:
                trial *= 0.5
                continue
            infeasible_only = False
            j_try = _objective(prob, m_try, p_try, th_try, n_t, dt)
            if j_try >= j_cur + 1e-4 * trial * dt * gnorm2 - slack:
                m, p, th, j_cur = m_try, p_try, th_try, j_try
                accepted = True
                break
            trial *= 0.5
        if not accepted:
            if infeasible_only:
                raise PositivityLoss("line search cannot keep densities interior")
            raise NonConvergence(
                "line search stalled before reaching tolerance",
                residual=res,
                iterations=iterations,
                solution=_package(prob, times, p, lam, {"residual": res, "converged": False}),
            )
        j_history.append(j_cur)
        lam, grad = _adjoint(prob, m, p, th, n_t, dt)
        res = float(np.max(np.abs(grad)))
        if res < best_res * (1.0 - 1e-3):
            best_res, since_best = res, 0
        else:
            since_best += 1
            if since_best >= 100:
                raise NonConvergence(
                    "ascent stalled at the floating-point residual floor",
                    residual=res,
                    iterations=iterations,
                    solution=_package(
                        prob, times, p, lam, {"residual": res, "converged": False}
                    ),
                )

    diagnostics = {
        "iterations": iterations,
        "residual": res,
        "converged": True,
        "objective": j_cur,
        "objective_history": j_history,
        "method": "convex",
    }
    if monotonicity_check:
        diagnostics["lasry_lions"] = lasry_lions_monotonicity(prob)
    # the discrete objective is what the adjoint differentiates exactly,
    # so report it as the value rather than a re-quadrature of the path
    return _package(prob, times, p, lam, diagnostics, value=j_cur)


def solve_mfg_fixedpoint(prob, n_t, damping=0.5, tol=1e-8, max_sweeps=10_000,
                         monotonicity_check=False):
    """Damped Picard iteration on the forward-backward system.

    Forward explicit Euler propagates p under the current policy (fluxes read
    Phi at the right endpoint, matching the convex discretization); backward
    explicit Euler rebuilds Phi from the refreshed terminal coupling
    Phi_T = G(p_T). Works for general (non-potential) F and G; convergence
    is not guaranteed for long horizons and NonConvergence is a first-class
    outcome carrying the last iterate.
    """
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    g = prob.graph
    t0, t1 = prob.horizon
    dt = (t1 - t0) / n_t
    times = t0 + dt * np.arange(n_t + 1)

    def forward(policy):
        p = np.empty((n_t + 1, g.n))
        p[0] = prob.p0
        for k in range(n_t):
            th = theta_edges(prob.activation, g, np.maximum(p[k], 1e-300))
            grad = g.sqrt_w * (policy[k + 1][g.edge_j] - policy[k + 1][g.edge_i])
            flux = th * np.asarray(prob.lagrangian.H_prime(grad), dtype=float)
            p[k + 1] = p[k] - dt * (g.incidence @ flux)
            # interiority floor keeps the backward sweep well posed
            # (d theta/d p is unbounded at the boundary for entropy kinds)
            if not np.all(np.isfinite(p[k + 1])) or np.min(p[k + 1]) < DENSITY_FLOOR:
                return None
        return p

    def backward(p):
        phi_new = np.empty((n_t + 1, g.n))
        phi_new[n_t] = prob.G(p[-1])
        # overflow here means a diverging iterate; the caller detects the
        # resulting non-finite policy and reports NonConvergence
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(n_t - 1, -1, -1):
                grad = g.sqrt_w * (phi_new[k + 1][g.edge_j] - phi_new[k + 1][g.edge_i])
                hval = np.asarray(prob.lagrangian.H(grad), dtype=float)
                di, dj = dtheta_edges(prob.activation, g, np.maximum(p[k], 1e-300))
                bump = np.zeros(g.n)
                np.add.at(bump, g.edge_i, di * hval)
                np.add.at(bump, g.edge_j, dj * hval)
                phi_new[k] = phi_new[k + 1] + dt * (
                    bump + np.asarray(prob.F(p[k]), dtype=float)
                )
        return phi_new

    # zero initial policy: the first forward sweep parks p at p0, and the
    # damped updates blend in the terminal coupling gradually
    phi = np.zeros((n_t + 1, g.n))
    p = forward(phi)
    res = np.inf
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        phi_hat = backward(p)
        if not np.all(np.isfinite(phi_hat)):
            raise NonConvergence(
                "backward sweep diverged (non-finite policy)",
                residual=np.inf,
                iterations=sweeps,
            )
        res = float(np.max(np.abs(phi_hat - phi)))
        if res > 1e8:
            raise NonConvergence(
                "fixed-point iteration is diverging", residual=res, iterations=sweeps
            )
        if res <= tol:
            phi = phi_hat
            break
        lam = damping
        accepted = False
        for _ in range(14):
            phi_try = phi + lam * (phi_hat - phi)
            p_try = forward(phi_try)
            if p_try is not None:
                phi, p = phi_try, p_try
                accepted = True
                break
            # an update that exits the simplex is retried closer to the
            # last feasible policy rather than reported immediately
            lam *= 0.5
        if not accepted:
            raise PositivityLoss(
                f"forward sweep leaves the simplex for every damping down to "
                f"{lam:.2e} (sweep {sweeps})"
            )
    else:
        raise NonConvergence(
            "fixed-point iteration hit the sweep cap",
            residual=res,
            iterations=sweeps,
            solution=_package(
                prob, times, p, phi, {"residual": res, "converged": False, "method": "fixedpoint"}
            ),
        )
    diagnostics = {
        "iterations": sweeps,
        "residual": res,
        "converged": True,
        "method": "fixedpoint",
    }
    if monotonicity_check:
        diagnostics["lasry_lions"] = lasry_lions_monotonicity(prob)
    return _package(prob, times, p, phi, diagnostics)


def solve(prob, n_t, tol=1e-8, **kwargs):
    """Route to the convex solver for potential games, else fixed point."""
    if prob.is_potential:
        return solve_potential_convex(prob, n_t, tol=tol, **kwargs)
    return solve_mfg_fixedpoint(prob, n_t, tol=tol, **kwargs)


# ---------------------------------------------------------------------------
# diagnostics


def euler_lagrange_residual(prob, sol):
    """Sup-norm central-difference residuals of the coupled system.

    Returns (continuity residual, adjoint residual) over interior grid
    times; both are O(dt) for converged first-order solutions.
    """
    g = prob.graph
    times = sol.times
    dt = times[1] - times[0]
    r_p = 0.0
    r_phi = 0.0
    for k in range(1, len(times) - 1):
        th = theta_edges(prob.activation, g, np.maximum(sol.p[k], 1e-300))
        grad = g.sqrt_w * (sol.phi[k][g.edge_j] - sol.phi[k][g.edge_i])
        flux = th * np.asarray(prob.lagrangian.H_prime(grad), dtype=float)
        cont = (sol.p[k + 1] - sol.p[k - 1]) / (2.0 * dt) + g.incidence @ flux
        hval = np.asarray(prob.lagrangian.H(grad), dtype=float)
        di, dj = dtheta_edges(prob.activation, g, np.maximum(sol.p[k], 1e-300))
        bump = np.zeros(g.n)
        np.add.at(bump, g.edge_i, di * hval)
        np.add.at(bump, g.edge_j, dj * hval)
        adj = (sol.phi[k + 1] - sol.phi[k - 1]) / (2.0 * dt) + bump + np.asarray(
            prob.F(sol.p[k]), dtype=float
        )
        r_p = max(r_p, float(np.max(np.abs(cont))))
        r_phi = max(r_phi, float(np.max(np.abs(adj))))
    return r_p, r_phi


def lasry_lions_monotonicity(prob, samples=200, seed=_CHECK_SEED + 3):
    """Sampled check of sum (F_i(p) - F_i(q))(p_i - q_i) <= 0 and same for G.

    The condition guarantees uniqueness of the equilibrium; it is reported
    as a diagnostic (worst sampled value per map), never enforced. Pass
    ``monotonicity_check=True`` to the solvers to attach the result.
    """
    rng = np.random.default_rng(seed)
    n = prob.graph.n
    worst = {"F": -np.inf, "G": -np.inf}
    for _ in range(samples):
        p = rng.dirichlet(np.ones(n))
        q = rng.dirichlet(np.ones(n))
        for label, fn in (("F", prob.F), ("G", prob.G)):
            val = float(np.dot(np.asarray(fn(p)) - np.asarray(fn(q)), p - q))
            worst[label] = max(worst[label], val)
    return {
        "monotone": bool(worst["F"] <= 1e-12 and worst["G"] <= 1e-12),
        "worst_F": worst["F"],
        "worst_G": worst["G"],
    }


def value_function(prob, p, t, n_t=256, tol=1e-8):
    """U(p, t): the optimal payoff of the game restarted from (p, t)."""
    sol = solve_potential_convex(prob.restarted(p, t), n_t, tol=tol)
    return sol.value


def hje_residual(prob, p, t, dt_fd=1e-4, dp_fd=1e-3, n_t=256, tol=1e-8):
    """|d_t U + script_H(p, grad U)| with all derivatives by differences.

    d_t is a central difference of re-solved values; grad U enters only
    through tangential differences (d_j - d_i) U along e_j - e_i, which is
    all the graph gradient reads. Expensive: each probe is a full solve.
    """
    if prob.F_potential is None:
        raise NoPotentialStructure("hje_residual needs the scalar potential")
    g = prob.graph
    p = np.asarray(p, dtype=float)
    du_dt = (
        value_function(prob, p, t + dt_fd, n_t=n_t, tol=tol)
        - value_function(prob, p, t - dt_fd, n_t=n_t, tol=tol)
    ) / (2.0 * dt_fd)
    th = theta_edges(prob.activation, g, p)
    ham = float(prob.F_potential(p))
    for e, (i, j) in enumerate(prob.graph.edges):
        d = np.zeros(g.n)
        d[j], d[i] = 1.0, -1.0
        diff = (
            value_function(prob, p + dp_fd * d, t, n_t=n_t, tol=tol)
            - value_function(prob, p - dp_fd * d, t, n_t=n_t, tol=tol)
        ) / (2.0 * dp_fd)
        ham += float(prob.lagrangian.H(g.sqrt_w[e] * diff)) * th[e]
    return abs(du_dt + ham)
