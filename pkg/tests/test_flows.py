import numpy as np
import pytest
from scipy.linalg import expm

from conftest import interior_density
from mfgraph import activation as act
from mfgraph import flows, spectral_gap
from mfgraph.errors import DimensionMismatch, InconsistentTriple, PositivityLoss

TRIPLES = [
    ("arithmetic", act.PSI_ARITHMETIC),
    ("geometric", act.PSI_GEOMETRIC),
    ("harmonic", act.PSI_HARMONIC),
]


class TestPhiDivergence:
    def test_zero_at_invariant_measure(self, ring5):
        assert flows.phi_divergence(ring5, act.PHI_ENTROPY, ring5.pi) == pytest.approx(0.0, abs=1e-15)

    def test_kl_of_point_mass(self, two_state):
        assert flows.phi_divergence(
            two_state, act.PHI_ENTROPY, np.array([1.0, 0.0])
        ) == pytest.approx(np.log(2.0), abs=1e-12)

    def test_quadratic_divergence_by_direct_sum(self, two_state):
        got = flows.phi_divergence(two_state, act.PHI_QUADRATIC, np.array([0.75, 0.25]))
        # brute-force loop oracle
        ref = sum(
            0.5 * (p / q) ** 2 * q for p, q in zip([0.75, 0.25], two_state.pi)
        )
        assert got == pytest.approx(ref, abs=1e-15)
        assert got == pytest.approx(0.625)

    def test_dimension_mismatch(self, two_state):
        with pytest.raises(DimensionMismatch):
            flows.phi_divergence(two_state, act.PHI_ENTROPY, np.array([1.0, 0.0, 0.0]))


class TestOnsagerMatrix:
    def test_quadratic_theta_gives_negated_weight_laplacian(self, ring5):
        from mfgraph import laplacian_matrix

        k = flows.onsager_matrix(ring5, act.builtin("quadratic"), interior_density(ring5, 0))
        assert np.max(np.abs(k + laplacian_matrix(ring5))) <= 1e-14

    def test_at_invariant_measure(self, two_state):
        k = flows.onsager_matrix(two_state, act.builtin("log_mean"), two_state.pi)
        assert k[0, 1] == pytest.approx(-two_state.omega[0, 1])

    def test_positive_semidefinite_on_random_densities(self, ring5):
        a = act.builtin("log_mean")
        for seed in range(30):
            k = flows.onsager_matrix(ring5, a, interior_density(ring5, seed))
            assert np.min(np.linalg.eigvalsh(k)) >= -1e-10
            assert np.max(np.abs(k.sum(axis=1))) <= 1e-14


class TestIntegrators:
    def test_equilibrium_is_stationary(self, ring5):
        traj = flows.integrate_onsager(
            ring5, act.builtin("log_mean"), act.PHI_ENTROPY, ring5.pi, 1.0, 1e-2
        )
        assert np.max(np.abs(traj.densities - ring5.pi)) <= 1e-13

    def test_two_state_linear_closed_form(self, two_state):
        # symmetric chain: p_1(t) = (1 + e^(-2t))/2 from p_1(0) = 1
        p0 = np.array([1.0 - 1e-9, 1e-9])
        traj = flows.integrate_onsager(
            two_state, act.builtin("quadratic"), act.PHI_QUADRATIC, p0, 1.0, 1e-3
        )
        exact = 0.5 * (1.0 + np.exp(-2.0 * traj.times))
        assert np.max(np.abs(traj.densities[:, 0] - exact)) <= 1e-8
        assert traj.densities[-1, 0] == pytest.approx(0.5676676416183064, abs=1e-8)

    def test_onsager_log_mean_matches_linear_equation(self, ring5):
        p0 = interior_density(ring5, 1)
        t1 = flows.integrate_onsager(
            ring5, act.builtin("log_mean"), act.PHI_ENTROPY, p0, 1.0, 1e-3
        )
        # independent oracle: matrix exponential of the generator
        for k in (250, 500, 1000):
            exact = expm(ring5.q.T * t1.times[k]) @ p0
            assert np.max(np.abs(t1.densities[k] - exact)) <= 1e-9

    @pytest.mark.parametrize("kind,psi", TRIPLES)
    def test_generalized_matches_linear_equation(self, two_state, kind, psi):
        p0 = np.array([0.9, 0.1])
        traj = flows.integrate_generalized(
            two_state, act.builtin(kind), act.PHI_ENTROPY, psi, p0, 1.0, 1e-3
        )
        ref = flows.integrate_forward(two_state, p0, 1.0, 1e-3)
        assert np.max(np.abs(traj.densities - ref.densities)) <= 10.0 * 1e-3**2

    def test_inconsistent_triple_detected(self, two_state):
        with pytest.raises(InconsistentTriple):
            flows.integrate_generalized(
                two_state,
                act.builtin("arithmetic"),
                act.PHI_ENTROPY,
                act.PSI_GEOMETRIC,
                np.array([0.7, 0.3]),
                0.5,
                1e-2,
            )

    def test_boundary_start_rejected(self, two_state):
        with pytest.raises(PositivityLoss):
            flows.integrate_onsager(
                two_state, act.builtin("log_mean"), act.PHI_ENTROPY,
                np.array([1.0, 0.0]), 1.0, 1e-2,
            )

    def test_mass_conservation_and_dissipation(self, ring5):
        dt = 1e-3
        traj = flows.integrate_onsager(
            ring5, act.builtin("log_mean"), act.PHI_ENTROPY, interior_density(ring5, 2), 2.0, dt
        )
        mass = np.abs(traj.densities.sum(axis=1) - 1.0)
        assert np.max(mass) <= 1e-10
        assert np.max(np.diff(traj.dissipation)) <= 10.0 * dt * dt

    def test_long_time_limit_reaches_pi(self, ring5):
        gap = spectral_gap(ring5)
        lam_max = float(np.max(np.abs(np.linalg.eigvals(ring5.q))))
        dt = min(0.01, 1.0 / lam_max)
        traj = flows.integrate_onsager(
            ring5, act.builtin("log_mean"), act.PHI_ENTROPY,
            interior_density(ring5, 3), 50.0 / gap, dt,
        )
        assert np.max(np.abs(traj.final() - ring5.pi)) <= 1e-6


class TestFluxForm:
    def test_onsager_form_identity(self, ring5):
        a = act.builtin("log_mean")
        for seed in range(5):
            p = interior_density(ring5, seed)
            assert flows.flux_form_check(ring5, a, act.PHI_ENTROPY, None, p) <= 1e-12

    def test_quadratic_identity(self, two_state):
        a = act.builtin("quadratic")
        gap = flows.flux_form_check(
            two_state, a, act.PHI_QUADRATIC, None, np.array([0.6, 0.4])
        )
        assert gap <= 1e-13

    @pytest.mark.parametrize("kind,psi", TRIPLES)
    def test_generalized_form_identity(self, ring5, kind, psi):
        p = interior_density(ring5, 11)
        assert flows.flux_form_check(ring5, act.builtin(kind), act.PHI_ENTROPY, psi, p) <= 1e-12

    def test_equilibrium_both_sides_vanish(self, ring5):
        a = act.builtin("log_mean")
        assert flows.flux_form_check(ring5, a, act.PHI_ENTROPY, None, ring5.pi) <= 1e-14
