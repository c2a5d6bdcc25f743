"""Nonlinear activation functions theta(x, y) and their generators.

theta weights edge velocities in the discrete continuity equation. Built-in
kinds are the classical means (theta == 1, logarithmic, arithmetic,
geometric, harmonic); generic kinds come from a convex generator phi via
theta = (x - y)/(phi'(x) - phi'(y)), or from a (phi, psi*) pair via
(psi*)'(phi'(x) - phi'(y)) = (x - y)/theta(x, y).

All callables are vectorized over numpy arrays. Evaluation switches to the
diagonal limit when |x - y| < 1e-7 * max(x, y), where the raw quotients are
0/0. Points on the axes return the limiting value per kind; kinds with
theta(x, 0) = 0 carry ``boundary_zero = True``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateDissipation,
    NonConvexGenerator,
    UnknownKind,
)

DIAG_GUARD = 1e-7

BUILTIN_KINDS = ("quadratic", "log_mean", "arithmetic", "geometric", "harmonic")


@dataclass(frozen=True)
class GeneratorPhi:
    """Convex generator phi with its first two derivatives (phi'' > 0)."""

    phi: callable
    phi_prime: callable
    phi_second: callable

    def validate(self, grid=None):
        if grid is None:
            grid = np.logspace(-6, 3, 200)
        vals = np.asarray(self.phi_second(grid), dtype=float)
        if not np.all(vals > 0.0):
            raise NonConvexGenerator("phi'' must be positive on the working range")
        return self


@dataclass(frozen=True)
class DissipationPsiStar:
    """Even convex dissipation function psi* with psi*(0) = 0."""

    psi_star: callable
    psi_star_prime: callable

    def validate(self):
        xi = np.concatenate([-np.logspace(-6, 1, 60), np.logspace(-6, 1, 60)])
        vals = np.asarray(self.psi_star(xi), dtype=float)
        if abs(float(np.asarray(self.psi_star(np.zeros(1)))[0])) > 1e-12:
            raise DegenerateDissipation("psi*(0) must vanish")
        if np.max(np.abs(vals - np.asarray(self.psi_star(-xi)))) > 1e-10:
            raise DegenerateDissipation("psi* must be even")
        dv = np.asarray(self.psi_star_prime(xi), dtype=float)
        if np.min(xi * dv) < 0.0:
            raise DegenerateDissipation("xi * (psi*)'(xi) must be nonnegative")
        if np.any(np.abs(dv) == 0.0):
            raise DegenerateDissipation("(psi*)' vanishes away from zero")
        return self


@dataclass(frozen=True)
class Activation:
    """theta(x, y) together with its partial derivatives and generators.

    ``theta``, ``theta_dx``, ``theta_dy`` are vectorized callables;
    ``phi``/``psi_star`` hold the generating pair when one is known.
    Immutable and pure, so safe under concurrent use.
    """

    kind: str
    theta: callable
    theta_dx: callable
    theta_dy: callable
    phi: GeneratorPhi | None = None
    psi_star: DissipationPsiStar | None = None
    boundary_zero: bool = True


# ---------------------------------------------------------------------------
# canonical generators

PHI_QUADRATIC = GeneratorPhi(
    phi=lambda x: 0.5 * x * x,
    phi_prime=lambda x: x,
    phi_second=lambda x: np.ones_like(np.asarray(x, dtype=float)),
)

PHI_ENTROPY = GeneratorPhi(
    phi=lambda x: np.where(x > 0.0, x * np.log(np.where(x > 0.0, x, 1.0)) - x + 1.0, 1.0),
    phi_prime=lambda x: np.log(x),
    phi_second=lambda x: 1.0 / x,
)

PSI_QUADRATIC = DissipationPsiStar(
    psi_star=lambda s: 0.5 * s * s,
    psi_star_prime=lambda s: np.asarray(s, dtype=float),
)

PSI_ARITHMETIC = DissipationPsiStar(
    psi_star=lambda s: 4.0 * np.log(np.cosh(s / 2.0)),
    psi_star_prime=lambda s: 2.0 * np.tanh(s / 2.0),
)

PSI_GEOMETRIC = DissipationPsiStar(
    psi_star=lambda s: 4.0 * np.cosh(s / 2.0) - 4.0,
    psi_star_prime=lambda s: 2.0 * np.sinh(s / 2.0),
)

PSI_HARMONIC = DissipationPsiStar(
    psi_star=lambda s: np.cosh(s) - 1.0,
    psi_star_prime=lambda s: np.sinh(s),
)


# ---------------------------------------------------------------------------
# built-in theta families


def _near_diag(x, y):
    return np.abs(x - y) < DIAG_GUARD * np.maximum(np.abs(x), np.abs(y))


def _theta_log_mean(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    boundary = (x <= 0.0) | (y <= 0.0)
    near = _near_diag(x, y) & ~boundary
    xs = np.where(boundary | near, 1.0, x)
    ys = np.where(boundary | near, 2.0, y)
    # log(x/y) = 2 artanh((x-y)/(x+y)) is accurate for close arguments
    d = 2.0 * np.arctanh((xs - ys) / (xs + ys))
    out = (xs - ys) / d
    out = np.where(near, 0.5 * (x + y), out)
    return np.where(boundary, 0.0, out)


def _dlog_mean(x, y, wrt_x):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    boundary = (x <= 0.0) | (y <= 0.0)
    near = _near_diag(x, y) & ~boundary
    xs = np.where(boundary | near, 1.0, x)
    ys = np.where(boundary | near, 2.0, y)
    d = 2.0 * np.arctanh((xs - ys) / (xs + ys))
    if wrt_x:
        out = 1.0 / d - (xs - ys) / (xs * d * d)
        series = 0.5 - 2.0 * y * (x - y) / (3.0 * (x + y) ** 2)
    else:
        out = -1.0 / d + (xs - ys) / (ys * d * d)
        series = 0.5 + 2.0 * x * (x - y) / (3.0 * (x + y) ** 2)
    out = np.where(near, series, out)
    return np.where(boundary, np.nan, out)


def _theta_harmonic(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = x + y
    zero = (x <= 0.0) | (y <= 0.0) | (s == 0.0)
    return np.where(zero, 0.0, 2.0 * x * y / np.where(zero, 1.0, s))


_BUILTINS = {
    "quadratic": dict(
        theta=lambda x, y: np.ones_like(np.asarray(x, dtype=float) + np.asarray(y, dtype=float)),
        theta_dx=lambda x, y: np.zeros_like(np.asarray(x, dtype=float) + np.asarray(y, dtype=float)),
        theta_dy=lambda x, y: np.zeros_like(np.asarray(x, dtype=float) + np.asarray(y, dtype=float)),
        phi=PHI_QUADRATIC,
        psi_star=PSI_QUADRATIC,
        boundary_zero=False,
    ),
    "log_mean": dict(
        theta=_theta_log_mean,
        theta_dx=lambda x, y: _dlog_mean(x, y, True),
        theta_dy=lambda x, y: _dlog_mean(x, y, False),
        phi=PHI_ENTROPY,
        psi_star=PSI_QUADRATIC,
        boundary_zero=True,
    ),
    "arithmetic": dict(
        theta=lambda x, y: 0.5 * (np.asarray(x, dtype=float) + np.asarray(y, dtype=float)),
        theta_dx=lambda x, y: np.full_like(np.asarray(x, dtype=float) + np.asarray(y, dtype=float), 0.5),
        theta_dy=lambda x, y: np.full_like(np.asarray(x, dtype=float) + np.asarray(y, dtype=float), 0.5),
        phi=PHI_ENTROPY,
        psi_star=PSI_ARITHMETIC,
        boundary_zero=False,
    ),
    "geometric": dict(
        theta=lambda x, y: np.sqrt(np.maximum(np.asarray(x, float) * np.asarray(y, float), 0.0)),
        theta_dx=lambda x, y: 0.5 * np.sqrt(np.maximum(np.asarray(y, float), 0.0) / np.asarray(x, float)),
        theta_dy=lambda x, y: 0.5 * np.sqrt(np.maximum(np.asarray(x, float), 0.0) / np.asarray(y, float)),
        phi=PHI_ENTROPY,
        psi_star=PSI_GEOMETRIC,
        boundary_zero=True,
    ),
    "harmonic": dict(
        theta=_theta_harmonic,
        theta_dx=lambda x, y: 2.0 * (np.asarray(y, float) / (np.asarray(x, float) + np.asarray(y, float))) ** 2,
        theta_dy=lambda x, y: 2.0 * (np.asarray(x, float) / (np.asarray(x, float) + np.asarray(y, float))) ** 2,
        phi=PHI_ENTROPY,
        psi_star=PSI_HARMONIC,
        boundary_zero=True,
    ),
}


def builtin(kind):
    """Return a built-in activation by name."""
    try:
        parts = _BUILTINS[kind]
    except KeyError:
        raise UnknownKind(
            f"unknown activation kind {kind!r}; choose from {BUILTIN_KINDS}"
        ) from None
    return Activation(kind=kind, **parts)


# ---------------------------------------------------------------------------
# generic constructions


def _fd(f, x, h):
    return (np.asarray(f(x + h)) - np.asarray(f(x - h))) / (2.0 * h)


def _vanishes_at_axis(phi_prime):
    """Whether theta(x, 0) = 0 for the quotient built on this phi'.

    theta(x, 0+) = x/(phi'(x) - phi'(0+)) vanishes exactly when phi' diverges
    to -inf at the origin (entropy-like generators).
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        v = float(np.asarray(phi_prime(np.array([1e-300])))[0])
    return bool(np.isnan(v) or v < -100.0)


def from_phi(gen):
    """Activation theta = (x - y)/(phi'(x) - phi'(y)) from a convex generator.

    Diagonal limit theta(x, x) = 1/phi''(x); near the diagonal the partial
    derivatives fall back to the symmetric series value -phi'''/(2 phi''^2)
    with phi''' taken by central differences of phi''.
    """
    gen.validate()
    p1, p2 = gen.phi_prime, gen.phi_second

    def diag_value(x):
        return 1.0 / np.asarray(p2(x), dtype=float)

    def diag_partial(x):
        h = 1e-5 * np.maximum(np.abs(x), 1e-3)
        p3 = _fd(p2, x, h)
        return -p3 / (2.0 * np.asarray(p2(x), dtype=float) ** 2)

    def theta(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        near = _near_diag(x, y)
        xs = np.where(near, 1.0, x)
        ys = np.where(near, 2.0, y)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.asarray(p1(xs), dtype=float) - np.asarray(p1(ys), dtype=float)
            raw = (xs - ys) / d
        raw = np.where(np.isfinite(raw), raw, 0.0)
        return np.where(near, diag_value(0.5 * (x + y)), raw)

    def partial(x, y, wrt_x):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        near = _near_diag(x, y)
        xs = np.where(near, 1.0, x)
        ys = np.where(near, 2.0, y)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.asarray(p1(xs), dtype=float) - np.asarray(p1(ys), dtype=float)
            if wrt_x:
                raw = (d - (xs - ys) * np.asarray(p2(xs), dtype=float)) / (d * d)
            else:
                raw = (-d + (xs - ys) * np.asarray(p2(ys), dtype=float)) / (d * d)
        return np.where(near, diag_partial(0.5 * (x + y)), raw)

    return Activation(
        kind="phi_induced",
        theta=theta,
        theta_dx=lambda x, y: partial(x, y, True),
        theta_dy=lambda x, y: partial(x, y, False),
        phi=gen,
        psi_star=PSI_QUADRATIC,
        boundary_zero=_vanishes_at_axis(p1),
    )


def from_phi_psi(gen, psi):
    """Activation theta = (x - y)/(psi*)'(phi'(x) - phi'(y)).

    Diagonal limit 1/(phi''(x) (psi*)''(0)); symmetry follows from (psi*)'
    being odd. (psi*)'' is taken by central differences since only the first
    derivative is part of the dissipation contract.
    """
    gen.validate()
    psi.validate()
    p1, p2 = gen.phi_prime, gen.phi_second
    g = psi.psi_star_prime
    gpp0 = float(_fd(g, np.array([0.0]), 1e-6)[0])
    if abs(gpp0) < 1e-14:
        raise DegenerateDissipation("(psi*)''(0) vanishes; diagonal limit undefined")

    def diag_value(x):
        return 1.0 / (np.asarray(p2(x), dtype=float) * gpp0)

    def diag_partial(x):
        h = 1e-5 * np.maximum(np.abs(x), 1e-3)
        return 0.5 * _fd(diag_value, x, h)

    def theta(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        near = _near_diag(x, y)
        xs = np.where(near, 1.0, x)
        ys = np.where(near, 2.0, y)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.asarray(p1(xs), dtype=float) - np.asarray(p1(ys), dtype=float)
            raw = (xs - ys) / np.asarray(g(d), dtype=float)
        raw = np.where(np.isfinite(raw), raw, 0.0)
        return np.where(near, diag_value(0.5 * (x + y)), raw)

    def partial(x, y, wrt_x):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        near = _near_diag(x, y)
        xs = np.where(near, 1.0, x)
        ys = np.where(near, 2.0, y)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.asarray(p1(xs), dtype=float) - np.asarray(p1(ys), dtype=float)
            gd = np.asarray(g(d), dtype=float)
            hstep = 1e-6 * np.maximum(np.abs(d), 1e-3)
            gprime = (np.asarray(g(d + hstep)) - np.asarray(g(d - hstep))) / (2.0 * hstep)
            if wrt_x:
                raw = (gd - (xs - ys) * gprime * np.asarray(p2(xs), dtype=float)) / (gd * gd)
            else:
                raw = (-gd + (xs - ys) * gprime * np.asarray(p2(ys), dtype=float)) / (gd * gd)
        return np.where(near, diag_partial(0.5 * (x + y)), raw)

    return Activation(
        kind="psi_phi_induced",
        theta=theta,
        theta_dx=lambda x, y: partial(x, y, True),
        theta_dy=lambda x, y: partial(x, y, False),
        phi=gen,
        psi_star=psi,
        boundary_zero=bool(theta(np.array([1.0]), np.array([1e-13]))[0] < 1e-6),
    )


CONCAVE_KINDS = ("quadratic", "log_mean", "geometric", "harmonic", "arithmetic")
"""Kinds whose theta is concave on the positive quadrant (quadratic and
arithmetic are affine, hence concave)."""


# ---------------------------------------------------------------------------
# densities on graphs


def theta_edge(act, g, p, i, j):
    """theta_ij(p) = theta(p_i/pi_i, p_j/pi_j) on an edge of g."""
    g.edge_index(i, j)
    p = np.asarray(p, dtype=float)
    return float(act.theta(p[i] / g.pi[i], p[j] / g.pi[j]))


def theta_edges(act, g, p):
    """Vector of theta_ij(p) over all stored edges."""
    r = np.asarray(p, dtype=float) / g.pi
    return np.asarray(act.theta(r[g.edge_i], r[g.edge_j]), dtype=float)


def dtheta_dp(act, g, p, i, j, k):
    """Partial derivative of theta_ij(p) with respect to p_k.

    theta_ij depends on p only through p_i and p_j, so the result is zero for
    k outside {i, j}; otherwise the chain rule contributes a 1/pi_k factor.
    """
    g.edge_index(i, j)
    if k != i and k != j:
        return 0.0
    p = np.asarray(p, dtype=float)
    x = p[i] / g.pi[i]
    y = p[j] / g.pi[j]
    if k == i:
        return float(act.theta_dx(x, y)) / g.pi[i]
    return float(act.theta_dy(x, y)) / g.pi[j]


def dtheta_edges(act, g, p):
    """Pair of arrays (d theta_e / d p_i, d theta_e / d p_j) over stored edges."""
    r = np.asarray(p, dtype=float) / g.pi
    x = r[g.edge_i]
    y = r[g.edge_j]
    di = np.asarray(act.theta_dx(x, y), dtype=float) / g.pi[g.edge_i]
    dj = np.asarray(act.theta_dy(x, y), dtype=float) / g.pi[g.edge_j]
    return di, dj
