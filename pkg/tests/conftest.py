import numpy as np
import pytest

from mfgraph import activation, build_from_q, build_from_weights, lagrangian, mfg


@pytest.fixture
def two_state():
    """Symmetric 2-state chain with omega_12 = 1/2 (uniform pi)."""
    return build_from_q([[-1.0, 1.0], [1.0, -1.0]])


@pytest.fixture
def two_state_unit():
    """Symmetric 2-state chain with omega_12 = 1, i.e. h = 1."""
    return build_from_q([[-2.0, 2.0], [2.0, -2.0]])


@pytest.fixture
def ring5():
    """5-state ring with a chord and non-uniform invariant measure."""
    return random_reversible(5, seed=3)


def random_reversible(n, seed, extra_edges=1):
    """Reversible chain on a connected ring plus random chords."""
    rng = np.random.default_rng(seed)
    omega = np.zeros((n, n))
    for i in range(n):
        j = (i + 1) % n
        w = rng.uniform(0.5, 1.5)
        omega[i, j] = omega[j, i] = w
    for _ in range(extra_edges):
        i, j = rng.choice(n, size=2, replace=False)
        w = rng.uniform(0.3, 1.0)
        omega[i, j] = omega[j, i] = w
    pi = rng.uniform(0.5, 1.5, n)
    pi /= pi.sum()
    return build_from_weights(omega, pi)


def interior_density(g, seed):
    rng = np.random.default_rng(seed)
    p = rng.uniform(0.2, 1.0, g.n)
    return p / p.sum()


def transport_problem(g, kappa=300.0, target=(0.8, 0.2), p_start=(0.2, 0.8), alpha=2.0,
                      horizon=(0.0, 1.0)):
    """Pure transport: zero running payoff, terminal pin toward ``target``."""
    tgt = np.array(target)
    return mfg.MFGProblem(
        graph=g,
        activation=activation.builtin("quadratic"),
        lagrangian=lagrangian.make_power(alpha),
        F=lambda p: np.zeros(g.n),
        G=lambda p: -kappa * (p - tgt),
        F_potential=lambda p: 0.0,
        G_potential=lambda p: -0.5 * kappa * float(np.sum((p - tgt) ** 2)),
        p0=np.array(p_start),
        horizon=horizon,
    )


def mild_potential_problem(g, horizon=(0.0, 0.5), kind="log_mean"):
    """Concave-potential 2-state game used across solver tests."""
    w = np.array([[-0.5, 0.0], [0.0, -0.25]])
    b = np.array([0.15, 0.0])
    target = np.array([0.6, 0.4])
    kg = 1.0
    return mfg.MFGProblem(
        graph=g,
        activation=activation.builtin(kind),
        lagrangian=lagrangian.make_power(2.0),
        F=lambda p: w @ p + b,
        G=lambda p: -kg * (p - target),
        F_potential=lambda p: 0.5 * float(p @ w @ p) + float(b @ p),
        G_potential=lambda p: -0.5 * kg * float(np.sum((p - target) ** 2)),
        p0=np.array([0.3, 0.7]),
        horizon=horizon,
    )


def fd_hessian_batch(f, pts, h):
    """Richardson-extrapolated central-difference Hessians, batched.

    ``f`` maps coordinate arrays to values; ``pts`` is (m, d). The
    extrapolation (4 H(h/2) - H(h))/3 removes the O(h^2) truncation term,
    which matters when certifying semidefiniteness near eigenvalue zero.
    """

    def plain(h_step):
        d = pts.shape[1]
        coords = [pts[:, k].copy() for k in range(d)]
        base = f(*coords)
        hess = np.empty((len(pts), d, d))
        for i in range(d):
            for j in range(i, d):
                if i == j:
                    up = [c.copy() for c in coords]
                    dn = [c.copy() for c in coords]
                    up[i] += h_step
                    dn[i] -= h_step
                    hess[:, i, i] = (f(*up) - 2.0 * base + f(*dn)) / h_step**2
                else:
                    pp = [c.copy() for c in coords]
                    pm = [c.copy() for c in coords]
                    mp = [c.copy() for c in coords]
                    mm = [c.copy() for c in coords]
                    pp[i] += h_step
                    pp[j] += h_step
                    pm[i] += h_step
                    pm[j] -= h_step
                    mp[i] -= h_step
                    mp[j] += h_step
                    mm[i] -= h_step
                    mm[j] -= h_step
                    hess[:, i, j] = hess[:, j, i] = (
                        f(*pp) - f(*pm) - f(*mp) + f(*mm)
                    ) / (4.0 * h_step * h_step)
        return hess

    return (4.0 * plain(h / 2.0) - plain(h)) / 3.0
