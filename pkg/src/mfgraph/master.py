"""Master-equation values by the method of characteristics.

The vector value u(p, t) solves the master equation on the probability
simplex; along any game trajectory started from (p, t) it coincides with the
policy, u(p, t) = Phi_t. Each point query is therefore one game solve, and
the two-state field w(x, t) = u_1 - u_2 is filled by shooting solves on a
grid. No off-simplex extension of u is ever needed, which is the reason to
prefer characteristics over direct PDE stepping here.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import mfg as mfg_mod
from . import twopoint as tp_mod
from .errors import MFGraphError


@dataclass(frozen=True)
class MasterField:
    """Table w(x, t) = u_1 - u_2 on a grid, with a per-node failure map.

    ``w[it, ix]`` matches ``t_grid[it]`` and ``x_grid[ix]``; failed nodes
    hold NaN and an entry in ``failures`` (never silently interpolated).
    """

    x_grid: np.ndarray
    t_grid: np.ndarray
    w: np.ndarray
    failures: dict = field(default_factory=dict)


def u_at(prob, p, t, n_t=256, tol=1e-8):
    """u(p, t): the policy vector of the game restarted from (p, t).

    The characteristic construction: solve the coupled system from (p, t)
    and read Phi at the initial time. The vector is canonical (terminal data
    pins the level; no gauge freedom).
    """
    sol = mfg_mod.solve(prob.restarted(p, t), n_t, tol=tol)
    return sol.phi[0].copy()


def semigroup_check(prob, p, t, r, n_t=256, tol=1e-8):
    """Consistency of u along its own characteristics.

    Solve from (p, t); read the state p_r and policy Phi_r at the interior
    time r; re-derive u(p_r, r) from a fresh solve and return the sup-norm
    gap. Bounded by solver tolerances plus O(dt).
    """
    t0, t1 = prob.horizon
    if not t0 <= t < r < t1:
        raise ValueError("need t < r < T strictly inside the horizon")
    sol = mfg_mod.solve(prob.restarted(p, t), n_t, tol=tol)
    p_r = _interp_rows(sol.times, sol.p, r)
    phi_r = _interp_rows(sol.times, sol.phi, r)
    n_t2 = max(8, int(round(n_t * (t1 - r) / (t1 - t))))
    u2 = u_at(prob, p_r, r, n_t=n_t2, tol=tol)
    return float(np.max(np.abs(u2 - phi_r)))


def _interp_rows(times, rows, t):
    k = int(np.clip(np.searchsorted(times, t) - 1, 0, len(times) - 2))
    lam = (t - times[k]) / (times[k + 1] - times[k])
    return (1.0 - lam) * rows[k] + lam * rows[k + 1]


def mixed_value(prob, q, p, t, n_t=256, tol=1e-8):
    """U(q, p, t) = sum_i q_i u_i(p, t): an individual with state mix q
    inside population p. Linear in q; at t = T it equals sum q_i G_i(p)."""
    u = u_at(prob, p, t, n_t=n_t, tol=tol)
    return float(np.dot(np.asarray(q, dtype=float), u))


def reduced_master_grid(tp, x_grid, t_grid, tol=1e-8, threads=1):
    """Fill w(x, t) on a grid by per-node shooting solves.

    Every node is an independent game solve from (x, t); rows sweep in x so
    each node warm starts from its neighbor's terminal point. The terminal
    row is the exact boundary data w(x, T) = G(x). Nodes whose solve fails
    are recorded in the failure map and left NaN, never interpolated.
    """
    x_grid = np.asarray(x_grid, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    t_end = tp.horizon[1]
    w = np.full((len(t_grid), len(x_grid)), np.nan)
    failures = {}

    def fill_row(it):
        t = t_grid[it]
        if abs(t - t_end) < 1e-14:
            w[it, :] = np.asarray(tp.G_diff(x_grid), dtype=float)
            return
        horizon = t_end - t
        shift = None
        for ix, x in enumerate(x_grid):
            # warm start: translate the neighbor's displacement x_T - x
            guess = None if shift is None else float(np.clip(x + shift, 1e-4, 1 - 1e-4))
            try:
                xt, h0, _, _, note = tp_mod.game_root(
                    tp, float(x), horizon, tol=tol, guess=guess
                )
                if note == "stationary":
                    w[it, ix] = float(tp.G_diff(x))
                else:
                    sgn = 1.0 if xt >= x else -1.0
                    w[it, ix] = float(tp_mod.y_of_x(tp, np.array(x), h0, sgn))
                shift = xt - float(x)
            except MFGraphError as exc:
                failures[(int(it), int(ix))] = f"{type(exc).__name__}: {exc}"
                shift = None

    rows = [it for it in range(len(t_grid))]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill_row, rows))
    else:
        for it in rows:
            fill_row(it)
    return MasterField(x_grid=x_grid, t_grid=t_grid, w=w, failures=failures)


def master_pde_residual(tp, fld):
    """Sup-norm residual of the reduced master PDE over interior grid nodes.

    The two-state master equation collapses on the simplex to
        d_t w + theta'(x) H(h w) + Fbar'(x) + h theta(x) H'(h w) d_x w = 0
    with w(x, T) = G(x); time and space derivatives are taken by central
    differences of the filled table, so the residual is O(dx + dt) plus the
    per-node solver tolerance.
    """
    w = fld.w
    dx = fld.x_grid[1] - fld.x_grid[0]
    dt = fld.t_grid[1] - fld.t_grid[0]
    worst = 0.0
    for it in range(1, len(fld.t_grid) - 1):
        for ix in range(1, len(fld.x_grid) - 1):
            if np.isnan(w[it - 1 : it + 2, ix]).any() or np.isnan(w[it, ix - 1 : ix + 2]).any():
                continue
            x = fld.x_grid[ix]
            wv = w[it, ix]
            dwdt = (w[it + 1, ix] - w[it - 1, ix]) / (2.0 * dt)
            dwdx = (w[it, ix + 1] - w[it, ix - 1]) / (2.0 * dx)
            res = (
                dwdt
                + float(tp.theta_prime(x)) * float(tp.pair.H(tp.h * wv))
                + float(tp.F_bar_prime(x))
                + tp.h * float(tp.theta(x)) * float(tp.pair.H_prime(tp.h * wv)) * dwdx
            )
            worst = max(worst, abs(res))
    return worst
