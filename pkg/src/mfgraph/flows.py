"""Gradient-flow forms of the reversible forward equation.

The Kolmogorov forward equation dp/dt = Q^T p can be recast as an Onsager
flow dp/dt = -K(p) grad D_phi(p|pi) with K_ij = -w_ij theta_ij(p), or as a
generalized flow driven by a dissipation function psi*. With matched
(theta, phi, psi*) all three right-hand sides coincide; the integrators here
make that equivalence testable and monitor the free-energy decay.
"""

from dataclasses import dataclass

import numpy as np

from .activation import theta_edges
from .errors import DimensionMismatch, InconsistentTriple, PositivityLoss
from .graph import EdgeField, check_density, divergence, weighted_gradient

MAX_HALVINGS = 20


@dataclass(frozen=True)
class FlowTrajectory:
    """Time grid, densities (one row per time) and free-energy trace."""

    times: np.ndarray
    densities: np.ndarray
    dissipation: np.ndarray

    def final(self):
        return self.densities[-1]


def phi_divergence(g, gen, p):
    """Free energy D_phi(p | pi) = sum_i phi(p_i / pi_i) pi_i.

    Nonnegative with equality iff p = pi whenever phi >= 0 and phi(1) = 0.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (g.n,):
        raise DimensionMismatch(f"density has shape {p.shape}, expected ({g.n},)")
    return float(np.sum(np.asarray(gen.phi(p / g.pi), dtype=float) * g.pi))


def onsager_matrix(g, act, p):
    """Response matrix K(p): K_ij = -w_ij theta_ij(p), rows summing to zero.

    Symmetric positive semidefinite; for theta == 1 it is the negated weight
    Laplacian matrix.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (g.n,):
        raise DimensionMismatch(f"density has shape {p.shape}, expected ({g.n},)")
    th = theta_edges(act, g, p)
    k = np.zeros((g.n, g.n))
    k[g.edge_i, g.edge_j] = -g.edge_w * th
    k[g.edge_j, g.edge_i] = -g.edge_w * th
    np.fill_diagonal(k, -k.sum(axis=1))
    return k


def _onsager_rhs(g, act, gen, p):
    r = np.asarray(gen.phi_prime(p / g.pi), dtype=float)
    flux = g.edge_w * theta_edges(act, g, p) * (r[g.edge_j] - r[g.edge_i])
    rhs = np.zeros(g.n)
    np.add.at(rhs, g.edge_i, flux)
    np.add.at(rhs, g.edge_j, -flux)
    return rhs


def _generalized_rhs(g, act, gen, psi, p):
    r = np.asarray(gen.phi_prime(p / g.pi), dtype=float)
    rate = np.asarray(psi.psi_star_prime(r[g.edge_i] - r[g.edge_j]), dtype=float)
    flux = g.edge_w * theta_edges(act, g, p) * rate
    rhs = np.zeros(g.n)
    np.add.at(rhs, g.edge_i, -flux)
    np.add.at(rhs, g.edge_j, flux)
    return rhs


def forward_rhs(g, p):
    """Raw linear forward equation dp/dt = Q^T p."""
    return g.q.T @ np.asarray(p, dtype=float)


def _rk4_step(rhs, p, dt):
    k1 = rhs(p)
    k2 = rhs(p + 0.5 * dt * k1)
    k3 = rhs(p + 0.5 * dt * k2)
    k4 = rhs(p + dt * k3)
    return p + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _integrate(rhs, g, gen, p0, t_end, dt):
    """Fixed-grid RK4 with positivity enforced by step rejection.

    A macro step that would push an entry below -1e-12 is re-taken as 2, 4,
    ... substeps (up to 2^20); if that still exits the simplex the integrator
    halts with PositivityLoss. No clipping: clipping would silently break
    mass conservation and the dissipation monotonicity.
    """
    p = check_density(g, p0).copy()
    if np.min(p) <= 0.0:
        raise PositivityLoss("initial density must be interior")
    if dt <= 0.0 or t_end < 0.0:
        raise ValueError("dt must be positive and t_end nonnegative")
    n_steps = max(1, int(np.ceil(t_end / dt - 1e-12)))
    step = t_end / n_steps
    times = np.linspace(0.0, t_end, n_steps + 1)
    out = np.empty((n_steps + 1, g.n))
    out[0] = p
    for k in range(n_steps):
        sub = 1
        for _ in range(MAX_HALVINGS + 1):
            q = p
            ok = True
            for _ in range(sub):
                q = _rk4_step(rhs, q, step / sub)
                if np.min(q) < -1e-12:
                    ok = False
                    break
            if ok:
                break
            sub *= 2
        else:
            raise PositivityLoss(
                f"step at t={times[k]:.6g} exits the simplex after {MAX_HALVINGS} halvings"
            )
        p = q
        out[k + 1] = p
    diss = np.array([phi_divergence(g, gen, row) for row in out])
    return FlowTrajectory(times=times, densities=out, dissipation=diss)


def integrate_onsager(g, act, gen, p0, t_end, dt):
    """Integrate dp/dt = -K(p) grad_p D_phi(p|pi) from an interior density.

    With theta generated by the same phi this reproduces the linear forward
    equation exactly (up to integrator order). Mass is conserved to rounding
    because the right-hand side is an antisymmetric edge accumulation.
    """
    return _integrate(lambda p: _onsager_rhs(g, act, gen, p), g, gen, p0, t_end, dt)


def integrate_generalized(g, act, gen, psi, p0, t_end, dt):
    """Integrate the generalized flow driven by the dissipation psi*.

    Requires the (theta, phi, psi*) triple to satisfy its defining identity
    (psi*)'(phi'(x) - phi'(y)) * theta(x, y) = x - y, checked at p0; raises
    InconsistentTriple otherwise.
    """
    p0 = check_density(g, p0)
    r = p0 / g.pi
    x, y = r[g.edge_i], r[g.edge_j]
    d = np.asarray(gen.phi_prime(x) - gen.phi_prime(y), dtype=float)
    lhs = np.asarray(psi.psi_star_prime(d), dtype=float) * np.asarray(
        act.theta(x, y), dtype=float
    )
    gap = np.max(np.abs(lhs - (x - y))) if lhs.size else 0.0
    if gap > 1e-8 * max(1.0, float(np.max(np.abs(x - y))) if lhs.size else 1.0):
        raise InconsistentTriple(
            f"(theta, phi, psi*) identity fails at p0 by {gap:.3e}"
        )
    return _integrate(
        lambda p: _generalized_rhs(g, act, gen, psi, p), g, gen, p0, t_end, dt
    )


def integrate_forward(g, p0, t_end, dt):
    """Integrate the raw linear forward equation dp/dt = Q^T p (RK4).

    Dissipation is reported as the KL divergence trace for reference.
    """
    from .activation import PHI_ENTROPY

    return _integrate(lambda p: forward_rhs(g, p), g, PHI_ENTROPY, p0, t_end, dt)


def flux_form_check(g, act, gen, psi, p):
    """Sup-norm gap between the continuity-equation and gradient-flow forms.

    Builds the velocity v = -grad_w phi'(p/pi) (or its psi* variant when
    ``psi`` is given), pushes it through the graph divergence, and compares
    with the direct gradient-flow right-hand side. The two are algebraically
    identical, so the gap is pure rounding.
    """
    p = check_density(g, p)
    r = np.asarray(gen.phi_prime(p / g.pi), dtype=float)
    th = theta_edges(act, g, p)
    if psi is None:
        v = EdgeField(g, -weighted_gradient(g, r).values)
        direct = _onsager_rhs(g, act, gen, p)
    else:
        rate = np.asarray(psi.psi_star_prime(r[g.edge_i] - r[g.edge_j]), dtype=float)
        v = EdgeField(g, g.sqrt_w * rate)
        direct = _generalized_rhs(g, act, gen, psi, p)
    continuity = -divergence(g, EdgeField(g, th * v.values))
    return float(np.max(np.abs(continuity - direct)))
