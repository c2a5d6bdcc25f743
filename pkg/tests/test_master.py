import numpy as np
import pytest

from conftest import mild_potential_problem
from mfgraph import activation as act
from mfgraph import lagrangian as lag
from mfgraph import master, mfg, twopoint as tp


def symmetric_problem(g):
    """Invariant under swapping the two states."""
    target = np.array([0.5, 0.5])
    return mfg.MFGProblem(
        graph=g,
        activation=act.builtin("log_mean"),
        lagrangian=lag.make_power(2.0),
        F=lambda p: -0.4 * (p - target),
        G=lambda p: -0.8 * (p - target),
        F_potential=lambda p: -0.2 * float(np.sum((p - target) ** 2)),
        G_potential=lambda p: -0.4 * float(np.sum((p - target) ** 2)),
        p0=np.array([0.5, 0.5]),
        horizon=(0.0, 0.5),
    )


def monotone_master_instance(g):
    """All characteristics move right: F' > 0 and G > 0 vanishing at x = 1."""
    w = np.array([[0.3, 0.0], [0.0, 0.0]])
    b = np.array([0.4, 0.0])
    v = np.array([[-0.3, 0.0], [0.0, 0.0]])
    c = np.array([0.3, 0.0])
    return mfg.MFGProblem(
        graph=g,
        activation=act.builtin("log_mean"),
        lagrangian=lag.make_power(2.0),
        F=lambda p: w @ p + b,
        G=lambda p: v @ p + c,
        F_potential=lambda p: 0.5 * float(p @ w @ p) + float(b @ p),
        G_potential=lambda p: 0.5 * float(p @ v @ p) + float(c @ p),
        p0=np.array([0.3, 0.7]),
        horizon=(0.0, 0.4),
    )


class TestPointValues:
    def test_zero_game_value_vanishes(self, two_state_unit):
        prob = mfg.MFGProblem(
            graph=two_state_unit,
            activation=act.builtin("quadratic"),
            lagrangian=lag.make_power(2.0),
            F=lambda p: np.zeros(2),
            G=lambda p: np.zeros(2),
            F_potential=lambda p: 0.0,
            G_potential=lambda p: 0.0,
            p0=np.array([0.4, 0.6]),
        )
        u = master.u_at(prob, np.array([0.4, 0.6]), 0.3, n_t=32)
        assert np.max(np.abs(u)) == 0.0

    def test_terminal_condition(self, two_state_unit):
        prob = mild_potential_problem(two_state_unit)
        p = np.array([0.42, 0.58])
        u = master.u_at(prob, p, 0.5 - 1e-12, n_t=8)
        assert np.max(np.abs(u - prob.G(p))) <= 1e-10

    def test_swap_symmetry(self, two_state_unit):
        prob = symmetric_problem(two_state_unit)
        p = np.array([0.37, 0.63])
        u = master.u_at(prob, p, 0.1, n_t=128, tol=1e-9)
        u_swapped = master.u_at(prob, p[::-1].copy(), 0.1, n_t=128, tol=1e-9)
        assert u[0] == pytest.approx(u_swapped[1], abs=1e-8)
        assert u[1] == pytest.approx(u_swapped[0], abs=1e-8)


class TestSemigroup:
    def test_stationary_instance(self, two_state_unit):
        prob = mfg.MFGProblem(
            graph=two_state_unit,
            activation=act.builtin("quadratic"),
            lagrangian=lag.make_power(2.0),
            F=lambda p: np.zeros(2),
            G=lambda p: np.zeros(2),
            F_potential=lambda p: 0.0,
            G_potential=lambda p: 0.0,
            p0=np.array([0.4, 0.6]),
        )
        assert master.semigroup_check(prob, prob.p0, 0.0, 0.5) <= 1e-14

    def test_small_on_potential_instance(self, two_state_unit):
        prob = mild_potential_problem(two_state_unit)
        for r in (0.125, 0.25, 0.375):
            assert master.semigroup_check(prob, prob.p0, 0.0, r, n_t=256, tol=1e-8) <= 1e-3

    def test_decreases_with_time_refinement(self, two_state_unit):
        prob = mild_potential_problem(two_state_unit)
        r = 0.2468 * 0.5  # deliberately off-grid so interpolation error shows
        coarse = master.semigroup_check(prob, prob.p0, 0.0, r, n_t=32, tol=1e-10)
        fine = master.semigroup_check(prob, prob.p0, 0.0, r, n_t=128, tol=1e-10)
        assert fine < coarse


class TestMixedValue:
    def test_basis_vector_reads_component(self, two_state_unit):
        prob = mild_potential_problem(two_state_unit)
        u = master.u_at(prob, prob.p0, 0.1, n_t=64)
        got = master.mixed_value(prob, np.array([1.0, 0.0]), prob.p0, 0.1, n_t=64)
        assert got == pytest.approx(u[0], abs=1e-14)

    def test_terminal_data(self, two_state_unit):
        prob = mild_potential_problem(two_state_unit)
        q = np.array([0.3, 0.7])
        p = np.array([0.55, 0.45])
        got = master.mixed_value(prob, q, p, 0.5 - 1e-12, n_t=8)
        assert got == pytest.approx(float(q @ prob.G(p)), abs=1e-10)

    def test_convex_combination_identity(self, two_state_unit):
        prob = mild_potential_problem(two_state_unit)
        q1 = np.array([0.7, 0.3])
        q2 = np.array([0.2, 0.8])
        lam = 0.37
        mixed = master.mixed_value(prob, lam * q1 + (1 - lam) * q2, prob.p0, 0.1, n_t=64)
        split = lam * master.mixed_value(prob, q1, prob.p0, 0.1, n_t=64) + (
            1 - lam
        ) * master.mixed_value(prob, q2, prob.p0, 0.1, n_t=64)
        assert mixed == pytest.approx(split, abs=1e-14)


class TestReducedGrid:
    def test_zero_data_gives_zero_field(self, two_state_unit):
        prob = mfg.MFGProblem(
            graph=two_state_unit,
            activation=act.builtin("log_mean"),
            lagrangian=lag.make_power(2.0),
            F=lambda p: np.zeros(2),
            G=lambda p: np.zeros(2),
            F_potential=lambda p: 0.0,
            G_potential=lambda p: 0.0,
            p0=np.array([0.4, 0.6]),
            horizon=(0.0, 0.4),
        )
        red = tp.reduce(prob)
        fld = master.reduced_master_grid(
            red, np.linspace(0.1, 0.9, 9), np.linspace(0.0, 0.4, 5), tol=1e-8
        )
        assert not fld.failures
        assert np.max(np.abs(fld.w)) <= 1e-10

    def test_terminal_row_exact(self, two_state_unit):
        red = tp.reduce(monotone_master_instance(two_state_unit))
        xg = np.linspace(0.05, 0.95, 9)
        fld = master.reduced_master_grid(red, xg, np.linspace(0.0, 0.4, 5), tol=1e-6)
        assert np.max(np.abs(fld.w[-1] - red.G_diff(xg))) == 0.0

    def test_characteristic_identity(self, two_state_unit):
        # w(x_s, s) read from a fresh solve equals y_s along the orbit
        red = tp.reduce(monotone_master_instance(two_state_unit))
        game = tp.solve_potential_game(red, 0.3, 0.4, tol=1e-9)
        mid = len(game.trajectory.times) // 2
        xs = float(game.trajectory.x[mid])
        ts = float(game.trajectory.times[mid])
        xt, h0, _, _, _ = tp.game_root(red, xs, 0.4 - ts, tol=1e-9)
        w_mid = float(tp.y_of_x(red, np.array(xs), h0, 1.0 if xt >= xs else -1.0))
        assert w_mid == pytest.approx(float(game.trajectory.y[mid]), abs=1e-7)

    def test_pde_residual_and_refinement(self, two_state_unit):
        red = tp.reduce(monotone_master_instance(two_state_unit))

        def run(n):
            xg = np.linspace(0.05, 0.95, n)
            tg = np.linspace(0.0, 0.4, n)
            fld = master.reduced_master_grid(red, xg, tg, tol=1e-6)
            assert not fld.failures
            return master.master_pde_residual(red, fld)

        coarse = run(11)
        fine = run(21)
        assert fine <= 0.05
        assert fine <= 0.8 * coarse

    def test_threaded_fill_matches_serial(self, two_state_unit):
        red = tp.reduce(monotone_master_instance(two_state_unit))
        xg = np.linspace(0.05, 0.95, 7)
        tg = np.linspace(0.0, 0.4, 5)
        serial = master.reduced_master_grid(red, xg, tg, tol=1e-8, threads=1)
        threaded = master.reduced_master_grid(red, xg, tg, tol=1e-8, threads=3)
        assert np.array_equal(serial.w, threaded.w)

    def test_turning_points_recorded_not_fatal(self, two_state_unit):
        # equilibrium rest region inside the grid produces genuinely
        # non-monotone characteristics; those nodes must be recorded as
        # failures and left NaN, never interpolated
        prob = mild_potential_problem(two_state_unit)
        red = tp.reduce(prob)
        fld = master.reduced_master_grid(
            red, np.linspace(0.3, 0.8, 11), np.linspace(0.0, 0.5, 5), tol=1e-6
        )
        assert fld.failures
        for (it, ix) in fld.failures:
            assert np.isnan(fld.w[it, ix])
        # solved nodes are still filled
        assert np.isfinite(fld.w).sum() > fld.w.size / 2


class TestMasterEquationResiduals:
    def _component_residuals(self, prob, p, t, eps=1e-3, dt_fd=1e-3, n_t=192, tol=1e-9):
        """FD residuals of the vector master equation at one (p, t) point."""
        from mfgraph.activation import dtheta_edges, theta_edges

        g = prob.graph
        d = np.array([1.0, -1.0])
        u0 = master.u_at(prob, p, t, n_t=n_t, tol=tol)
        u_tp = master.u_at(prob, p, t + dt_fd, n_t=n_t, tol=tol)
        u_tm = master.u_at(prob, p, t - dt_fd, n_t=n_t, tol=tol)
        u_pp = master.u_at(prob, p + eps * d, t, n_t=n_t, tol=tol)
        u_pm = master.u_at(prob, p - eps * d, t, n_t=n_t, tol=tol)
        du_dt = (u_tp - u_tm) / (2.0 * dt_fd)
        # tangential derivative (d_1 - d_2) u_i for each component i
        du_tan = (u_pp - u_pm) / (2.0 * eps)
        th = theta_edges(prob.activation, g, p)[0]
        di, dj = dtheta_edges(prob.activation, g, p)
        h = g.sqrt_w[0]
        grad_u = h * (u0[1] - u0[0])
        hval = float(prob.lagrangian.H(grad_u))
        hp = float(prob.lagrangian.H_prime(grad_u))
        fvec = np.asarray(prob.F(p), dtype=float)
        res = np.empty(2)
        for i in range(2):
            dtheta_i = di[0] if i == 0 else dj[0]
            transport = hp * h * (-du_tan[i]) * th  # (d_2 - d_1) u_i = -du_tan
            res[i] = du_dt[i] + hval * dtheta_i + fvec[i] + transport
        return res

    def test_component_and_mixed_residuals(self, two_state_unit):
        prob = mild_potential_problem(two_state_unit)
        p = np.array([0.45, 0.55])
        res = self._component_residuals(prob, p, 0.2)
        assert np.max(np.abs(res)) <= 5e-2
        # the mixed equation is the q-weighted assembly of the component
        # equations, so its residual is bounded by n * max component residual
        rng = np.random.default_rng(8)
        for _ in range(10):
            q = rng.dirichlet(np.ones(2))
            mixed = float(np.dot(q, res))
            assert abs(mixed) <= 2.0 * np.max(np.abs(res)) + 1e-15

    def test_tangential_gradient_consistency(self, two_state_unit):
        # u_1 - u_2 equals the tangential derivative of the value function
        prob = mild_potential_problem(two_state_unit)
        p = np.array([0.45, 0.55])
        u = master.u_at(prob, p, 0.1, n_t=256, tol=1e-9)
        eps = 1e-3
        d = np.array([1.0, -1.0])
        fd = (
            mfg.value_function(prob, p + eps * d, 0.1, n_t=256, tol=1e-9)
            - mfg.value_function(prob, p - eps * d, 0.1, n_t=256, tol=1e-9)
        ) / (2.0 * eps)
        assert abs((u[0] - u[1]) - fd) <= 1e-3
