import numpy as np
import pytest

from conftest import random_reversible
from mfgraph import (
    EdgeField,
    build_from_q,
    build_from_weights,
    divergence,
    laplacian_apply,
    laplacian_matrix,
    spectral_gap,
    weighted_gradient,
)
from mfgraph.errors import (
    AsymmetricWeights,
    DetailedBalanceViolation,
    DimensionMismatch,
    IrreducibilityError,
    NegativeRate,
    NonConservativeRates,
    NonPositiveMeasure,
)


class TestBuildFromQ:
    def test_symmetric_chain(self):
        g = build_from_q([[-1.0, 1.0], [1.0, -1.0]])
        assert np.allclose(g.pi, [0.5, 0.5])
        assert g.omega[0, 1] == pytest.approx(0.5)
        assert g.edges == ((0, 1),)

    def test_asymmetric_chain_stationary_solve(self):
        g = build_from_q([[-2.0, 2.0], [1.0, -1.0]])
        assert np.allclose(g.pi, [1.0 / 3.0, 2.0 / 3.0], atol=1e-14)
        # detailed balance cross-check: Q_21 pi_2 = 2/3
        assert g.omega[0, 1] == pytest.approx(2.0 / 3.0, abs=1e-14)

    def test_supplied_uniform_pi_violates_detailed_balance(self):
        q = [[-1.0, 1.0], [2.0, -2.0]]
        with pytest.raises(DetailedBalanceViolation):
            build_from_q(q, pi=[0.5, 0.5])
        # without forcing pi the chain is reversible (all 2-state chains are)
        g = build_from_q(q)
        assert np.allclose(g.pi, [2.0 / 3.0, 1.0 / 3.0], atol=1e-14)

    def test_row_sum_violation(self):
        with pytest.raises(NonConservativeRates):
            build_from_q([[-1.0, 1.1], [1.0, -1.0]])

    def test_negative_rate(self):
        with pytest.raises(NegativeRate):
            build_from_q([[1.0, -1.0], [-1.0, 1.0]])

    def test_disconnected_chain(self):
        q = np.zeros((4, 4))
        q[0, 1] = q[1, 0] = 1.0
        q[2, 3] = q[3, 2] = 1.0
        np.fill_diagonal(q, -q.sum(axis=1))
        with pytest.raises(IrreducibilityError):
            build_from_q(q)


class TestBuildFromWeights:
    def test_inverse_of_symmetric(self):
        g = build_from_weights([[0.0, 0.5], [0.5, 0.0]], [0.5, 0.5])
        assert np.allclose(g.q, [[-1.0, 1.0], [1.0, -1.0]])

    def test_inverse_general(self):
        g = build_from_weights([[0.0, 2.0 / 3.0], [2.0 / 3.0, 0.0]], [1.0 / 3.0, 2.0 / 3.0])
        assert np.allclose(g.q, [[-2.0, 2.0], [1.0, -1.0]], atol=1e-14)

    def test_asymmetric_weights_rejected(self):
        with pytest.raises(AsymmetricWeights):
            build_from_weights([[0.0, 0.5], [0.4, 0.0]], [0.5, 0.5])

    def test_nonpositive_measure_rejected(self):
        with pytest.raises(NonPositiveMeasure):
            build_from_weights([[0.0, 0.5], [0.5, 0.0]], [1.0, 0.0])

    def test_round_trip_recovers_q(self):
        for seed in range(5):
            g = random_reversible(6, seed=seed)
            g2 = build_from_weights(g.omega, g.pi)
            assert np.max(np.abs(g2.q - g.q)) <= 1e-12


class TestCalculus:
    def test_gradient_of_constant_is_zero(self, ring5):
        ef = weighted_gradient(ring5, np.full(5, 3.7))
        assert np.all(ef.values == 0.0)

    def test_two_state_gradient(self, two_state):
        ef = weighted_gradient(two_state, np.array([0.0, 1.0]))
        assert ef.values[0] == pytest.approx(np.sqrt(0.5))
        # antisymmetric read on the reversed orientation
        assert ef.value(1, 0) == -ef.value(0, 1)

    def test_dimension_mismatch(self, two_state):
        with pytest.raises(DimensionMismatch):
            weighted_gradient(two_state, np.zeros(3))
        with pytest.raises(DimensionMismatch):
            laplacian_apply(two_state, np.zeros(5))

    def test_two_state_divergence(self, two_state):
        v = EdgeField(two_state, np.array([2.0]))
        div = divergence(two_state, v)
        assert div[0] == pytest.approx(np.sqrt(0.5) * 2.0)
        assert div[1] == pytest.approx(-np.sqrt(0.5) * 2.0)

    def test_divergence_sums_to_zero(self, ring5):
        rng = np.random.default_rng(0)
        for _ in range(20):
            v = EdgeField(ring5, rng.normal(size=ring5.n_edges))
            assert abs(divergence(ring5, v).sum()) <= 1e-12

    def test_laplacian_matches_div_of_grad(self, ring5):
        rng = np.random.default_rng(1)
        for _ in range(20):
            phi = rng.normal(size=5)
            lhs = laplacian_apply(ring5, phi)
            rhs = divergence(ring5, weighted_gradient(ring5, phi))
            assert np.max(np.abs(lhs - rhs)) <= 1e-12

    def test_two_state_laplacian(self, two_state):
        out = laplacian_apply(two_state, np.array([0.0, 1.0]))
        assert np.allclose(out, [0.5, -0.5])

    def test_quadratic_form_nonpositive(self, ring5):
        rng = np.random.default_rng(2)
        lap = laplacian_matrix(ring5)
        for _ in range(100):
            xi = rng.normal(size=5)
            q = float(xi @ lap @ xi)
            # identity: <xi, L xi> = -1/2 sum w_ij (xi_i - xi_j)^2
            ref = -0.5 * sum(
                ring5.omega[i, j] * (xi[i] - xi[j]) ** 2
                for i in range(5)
                for j in range(5)
                if i != j
            )
            assert q <= 1e-12
            assert q == pytest.approx(ref, abs=1e-12)

    def test_spectral_gap_symmetric_two_state(self, two_state):
        # eigenvalues of the symmetric chain generator are 0 and -2
        assert spectral_gap(two_state) == pytest.approx(2.0, abs=1e-12)
