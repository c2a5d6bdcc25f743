"""Running-cost / Hamiltonian conjugate pairs.

The built-in family is L(a) = |a|^alpha / alpha with conjugate
H(b) = |b|^beta / beta, 1/alpha + 1/beta = 1. H' and L' are mutually inverse
and H restricted to b >= 0 has the explicit inverse (beta c)^(1/beta).
"""

from dataclasses import dataclass

import numpy as np

from .errors import BadExponent


@dataclass(frozen=True)
class LagrangianPair:
    """Even strictly convex L with conjugate H and the maps solvers need.

    ``h_inverse_nonneg`` inverts H on the nonnegative branch;
    ``homogeneity_degree`` is beta, the degree of H. All callables are
    vectorized and pure.
    """

    kind: str
    alpha: float
    beta: float
    L: callable
    L_prime: callable
    H: callable
    H_prime: callable
    h_inverse_nonneg: callable

    @property
    def homogeneity_degree(self):
        return self.beta

    @property
    def is_quadratic(self):
        return bool(np.all(np.abs(np.asarray(self.alpha) - 2.0) < 1e-12))


def make_power(alpha):
    """Power pair L = |a|^alpha/alpha, H = |b|^beta/beta for alpha > 1.

    ``alpha`` may also be a per-edge array; the callables then broadcast
    against per-edge arguments, giving edge-dependent running costs without
    any solver changes. The scalar case remains the norm.
    """
    alpha = np.asarray(alpha, dtype=float)
    if not np.all(alpha > 1.0):
        raise BadExponent(f"alpha must exceed 1, got {alpha}")
    if alpha.ndim == 0:
        alpha = float(alpha)
    beta = alpha / (alpha - 1.0)

    def _signed_power(a, expo):
        a = np.asarray(a, dtype=float)
        return np.sign(a) * np.abs(a) ** expo

    return LagrangianPair(
        kind="power",
        alpha=alpha,
        beta=beta,
        L=lambda a: np.abs(np.asarray(a, dtype=float)) ** alpha / alpha,
        L_prime=lambda a: _signed_power(a, alpha - 1.0),
        H=lambda b: np.abs(np.asarray(b, dtype=float)) ** beta / beta,
        H_prime=lambda b: _signed_power(b, beta - 1.0),
        h_inverse_nonneg=lambda c: (beta * np.maximum(np.asarray(c, dtype=float), 0.0))
        ** (1.0 / beta),
    )


def make_custom(L, L_prime, H, H_prime, h_inverse_nonneg, beta, samples=None):
    """Wrap user closures into a pair, validated only by sampling.

    Checks evenness, L(0) = 0, the Legendre identity along L', and the
    inverse round trip H(h_inverse(c)) = c on a handful of points.
    """
    pair = LagrangianPair(
        kind="custom",
        alpha=beta / (beta - 1.0),
        beta=float(beta),
        L=L,
        L_prime=L_prime,
        H=H,
        H_prime=H_prime,
        h_inverse_nonneg=h_inverse_nonneg,
    )
    a = np.linspace(-3.0, 3.0, 13) if samples is None else np.asarray(samples)
    if abs(float(np.asarray(L(np.zeros(1)))[0])) > 1e-12:
        raise BadExponent("L(0) must vanish")
    if np.max(np.abs(np.asarray(L(a)) - np.asarray(L(-a)))) > 1e-10:
        raise BadExponent("L must be even")
    if np.max(legendre_residual(pair, a)) > 1e-8:
        raise BadExponent("L and H are not Legendre conjugates on samples")
    c = np.abs(np.asarray(H(a))) + 1e-3
    if np.max(np.abs(np.asarray(H(h_inverse_nonneg(c))) - c)) > 1e-8:
        raise BadExponent("h_inverse_nonneg does not invert H on samples")
    return pair


def legendre_residual(pair, a):
    """|L(a) + H(L'(a)) - a L'(a)|, zero exactly when (L, H) are conjugate."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(pair.L_prime(a), dtype=float)
    return np.abs(np.asarray(pair.L(a)) + np.asarray(pair.H(b)) - a * b)
