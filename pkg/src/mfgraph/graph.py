"""Weighted graphs induced by reversible Markov chains, and their calculus.

A reversible chain with generator Q and invariant measure pi induces the
symmetric edge weights w_ij = Q_ij * pi_i. All discrete calculus (gradient,
divergence, Laplacian) is defined on that weighted graph. Edges are stored
once with the i < j orientation; every antisymmetric quantity lives in a
single slot per edge and is sign-adjusted on read, so antisymmetry holds by
construction rather than by test.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AsymmetricWeights,
    DetailedBalanceViolation,
    DimensionMismatch,
    IrreducibilityError,
    NegativeRate,
    NonConservativeRates,
    NonPositiveMeasure,
    NotAnEdge,
)

ROW_SUM_TOL = 1e-12
DETAILED_BALANCE_TOL = 1e-10


@dataclass(frozen=True)
class MarkovGraph:
    """Reversible chain (Q, pi) together with its weighted graph.

    Immutable after construction; safe to share across threads. ``edges``
    holds each unordered pair once with i < j; ``edge_i``/``edge_j`` and
    ``sqrt_w`` are the unpacked per-edge arrays used by the calculus
    operators, and ``incidence`` is the n-by-n_edges signed matrix D with
    D[i, e] = +sqrt(w_e) at the edge tail and -sqrt(w_e) at the head, so the
    divergence of an edge field v is simply D @ v.
    """

    n: int
    q: np.ndarray
    pi: np.ndarray
    omega: np.ndarray
    edges: tuple
    neighbors: tuple
    edge_i: np.ndarray = field(repr=False)
    edge_j: np.ndarray = field(repr=False)
    edge_w: np.ndarray = field(repr=False)
    sqrt_w: np.ndarray = field(repr=False)
    incidence: np.ndarray = field(repr=False)

    @property
    def n_edges(self):
        return len(self.edges)

    def edge_index(self, i, j):
        """Return (slot, sign) for the ordered pair (i, j).

        ``sign`` is +1 when (i, j) matches the stored i < j orientation and
        -1 when it is the reversed reading.
        """
        key = (i, j) if i < j else (j, i)
        try:
            slot = self._edge_lookup[key]
        except KeyError:
            raise NotAnEdge(f"({i}, {j}) is not an edge") from None
        return slot, (1.0 if i < j else -1.0)

    def __post_init__(self):
        lookup = {e: k for k, e in enumerate(self.edges)}
        object.__setattr__(self, "_edge_lookup", lookup)


class EdgeField:
    """Antisymmetric function on edges, stored once per unordered pair.

    ``values[k]`` is the value on the oriented edge (i, j) with i < j; the
    (j, i) reading is its negation.
    """

    __slots__ = ("graph", "values")

    def __init__(self, graph, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (graph.n_edges,):
            raise DimensionMismatch(
                f"edge field has {values.shape} values, graph has {graph.n_edges} edges"
            )
        self.graph = graph
        self.values = values

    def value(self, i, j):
        """Signed value on the ordered pair (i, j)."""
        slot, sign = self.graph.edge_index(i, j)
        return sign * self.values[slot]

    def __neg__(self):
        return EdgeField(self.graph, -self.values)


def _finalize(q, pi):
    """Assemble the MarkovGraph once q and pi are known and consistent."""
    n = q.shape[0]
    omega = q * pi[:, None]
    np.fill_diagonal(omega, 0.0)
    # detailed balance makes omega symmetric up to rounding; store the exact
    # symmetric part so w_ij == w_ji holds bit-for-bit
    omega = 0.5 * (omega + omega.T)
    ii, jj = np.nonzero(np.triu(omega, k=1) > 0.0)
    edges = tuple((int(a), int(b)) for a, b in zip(ii, jj))
    neighbors = [[] for _ in range(n)]
    for a, b in edges:
        neighbors[a].append(b)
        neighbors[b].append(a)
    edge_i = np.array([e[0] for e in edges], dtype=int)
    edge_j = np.array([e[1] for e in edges], dtype=int)
    edge_w = omega[edge_i, edge_j] if edges else np.zeros(0)
    sqrt_w = np.sqrt(edge_w)
    incidence = np.zeros((n, len(edges)))
    incidence[edge_i, np.arange(len(edges))] = sqrt_w
    incidence[edge_j, np.arange(len(edges))] = -sqrt_w
    return MarkovGraph(
        n=n,
        q=q,
        pi=pi,
        omega=omega,
        edges=edges,
        neighbors=tuple(tuple(v) for v in neighbors),
        edge_i=edge_i,
        edge_j=edge_j,
        edge_w=edge_w,
        sqrt_w=sqrt_w,
        incidence=incidence,
    )


def _check_connected(omega, n):
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        i = stack.pop()
        for j in np.nonzero(omega[i] > 0.0)[0]:
            if not seen[j]:
                seen[j] = True
                stack.append(int(j))
    return bool(seen.all())


def build_from_q(q, pi=None):
    """Build the weighted graph of a reversible chain from its rate matrix.

    The invariant measure is found by solving pi Q = 0 (dense LU with the
    redundant last equation replaced by the normalization sum(pi) = 1).
    Passing ``pi`` skips the solve and verifies detailed balance against the
    supplied measure instead.
    """
    q = np.array(q, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise DimensionMismatch("rate matrix must be square")
    n = q.shape[0]
    row_sums = q.sum(axis=1)
    if np.max(np.abs(row_sums)) > ROW_SUM_TOL:
        raise NonConservativeRates(
            f"row sums deviate from zero by {np.max(np.abs(row_sums)):.3e}"
        )
    off = q.copy()
    np.fill_diagonal(off, 0.0)
    if np.min(off) < 0.0:
        raise NegativeRate("off-diagonal rates must be nonnegative")

    if pi is None:
        a = q.T.copy()
        a[-1, :] = 1.0
        b = np.zeros(n)
        b[-1] = 1.0
        try:
            pi = np.linalg.solve(a, b)
        except np.linalg.LinAlgError as exc:
            raise IrreducibilityError(f"stationary solve failed: {exc}") from exc
        if np.min(pi) <= 0.0 or np.max(np.abs(pi @ q)) > 1e-9:
            raise IrreducibilityError(
                "stationary solve returned a non-positive or inconsistent measure"
            )
    else:
        pi = np.array(pi, dtype=float)
        if pi.shape != (n,):
            raise DimensionMismatch("pi must have one entry per state")
        if np.min(pi) <= 0.0 or abs(pi.sum() - 1.0) > 1e-8:
            raise NonPositiveMeasure("pi must be strictly positive and normalized")

    db = q * pi[:, None] - q.T * pi[None, :]
    np.fill_diagonal(db, 0.0)
    worst = np.max(np.abs(db))
    if worst > DETAILED_BALANCE_TOL:
        raise DetailedBalanceViolation(
            f"max |Q_ij pi_i - Q_ji pi_j| = {worst:.3e} exceeds {DETAILED_BALANCE_TOL}"
        )

    g = _finalize(q, pi)
    if not _check_connected(g.omega, n):
        raise IrreducibilityError("the induced graph is disconnected")
    return g


def build_from_weights(omega, pi):
    """Inverse construction: recover Q_ij = w_ij / pi_i from (omega, pi).

    Detailed balance holds by construction. The diagonal of ``omega`` is
    ignored (zero-diagonal semantics) and the diagonal of Q is fixed by zero
    row sums.
    """
    omega = np.array(omega, dtype=float)
    if omega.ndim != 2 or omega.shape[0] != omega.shape[1]:
        raise DimensionMismatch("weight matrix must be square")
    n = omega.shape[0]
    if not np.allclose(omega, omega.T, rtol=0.0, atol=1e-12):
        raise AsymmetricWeights("edge weights must be symmetric")
    omega = 0.5 * (omega + omega.T)
    np.fill_diagonal(omega, 0.0)
    if np.min(omega) < 0.0:
        raise NegativeRate("edge weights must be nonnegative")
    pi = np.array(pi, dtype=float)
    if pi.shape != (n,):
        raise DimensionMismatch("pi must have one entry per state")
    if np.min(pi) <= 0.0:
        raise NonPositiveMeasure("pi must be strictly positive")
    if abs(pi.sum() - 1.0) > 1e-8:
        raise NonPositiveMeasure("pi must sum to one")
    pi = pi / pi.sum()

    q = omega / pi[:, None]
    np.fill_diagonal(q, 0.0)
    np.fill_diagonal(q, -q.sum(axis=1))
    g = _finalize(q, pi)
    if not _check_connected(g.omega, n):
        raise IrreducibilityError("the induced graph is disconnected")
    return g


def check_density(g, p, tol=1e-10):
    """Validate that p is a probability vector on g's states."""
    p = np.asarray(p, dtype=float)
    if p.shape != (g.n,):
        raise DimensionMismatch(f"density has shape {p.shape}, expected ({g.n},)")
    if np.min(p) < -tol:
        raise NonPositiveMeasure(f"density has a negative entry: {np.min(p):.3e}")
    if abs(p.sum() - 1.0) > tol:
        raise NonPositiveMeasure(f"density sums to {p.sum():.17g}")
    return p


def weighted_gradient(g, phi):
    """Edge field sqrt(w_ij) * (phi_j - phi_i) on the stored orientation."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (g.n,):
        raise DimensionMismatch(f"node function has shape {phi.shape}, expected ({g.n},)")
    return EdgeField(g, g.sqrt_w * (phi[g.edge_j] - phi[g.edge_i]))


def divergence(g, v):
    """Node function sum_j sqrt(w_ij) v_ij; components sum to zero."""
    if not isinstance(v, EdgeField) or v.graph is not g:
        if isinstance(v, EdgeField):
            raise DimensionMismatch("edge field belongs to a different graph")
        v = EdgeField(g, v)
    return g.incidence @ v.values


def laplacian_apply(g, phi):
    """Combinatorial Laplacian (L phi)_i = sum_j w_ij (phi_j - phi_i).

    Symmetric, negative semidefinite, constants in the kernel; identical to
    divergence(weighted_gradient(phi)).
    """
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (g.n,):
        raise DimensionMismatch(f"node function has shape {phi.shape}, expected ({g.n},)")
    return g.omega @ phi - g.omega.sum(axis=1) * phi


def laplacian_matrix(g):
    """Dense matrix of the combinatorial Laplacian (zero row sums, PSD of -L)."""
    m = g.omega.copy()
    np.fill_diagonal(m, -g.omega.sum(axis=1))
    return m


def spectral_gap(g):
    """Gap of the symmetrized generator diag(pi)^(-1/2) Q^T diag(pi)^(1/2).

    The transform is symmetric for reversible chains; the gap is minus the
    second-largest eigenvalue and controls exponential relaxation to pi.
    """
    s = np.sqrt(g.pi)
    a = g.q.T * (s[None, :] / s[:, None])
    a = 0.5 * (a + a.T)
    eig = np.linalg.eigvalsh(a)
    return float(-eig[-2])
