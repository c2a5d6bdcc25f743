"""Exception hierarchy for the toolkit.

Every failure mode that callers are expected to handle has its own class so
that the CLI can map them onto exit codes (config errors vs. numerical-domain
errors vs. non-convergence).
"""


class MFGraphError(Exception):
    """Base class for all toolkit errors."""


# ---------------------------------------------------------------------------
# graph construction / calculus


class NonConservativeRates(MFGraphError):
    """A rate-matrix row does not sum to zero."""


class NegativeRate(MFGraphError):
    """An off-diagonal rate is negative."""


class IrreducibilityError(MFGraphError):
    """The stationary solve has no unique positive solution."""


class DetailedBalanceViolation(MFGraphError):
    """The chain is not reversible with respect to its invariant measure."""


class AsymmetricWeights(MFGraphError):
    """Edge weights are not symmetric."""


class NonPositiveMeasure(MFGraphError):
    """The supplied measure is not a strictly positive probability vector."""


class DimensionMismatch(MFGraphError):
    """An array does not match the graph's node or edge dimensions."""


# ---------------------------------------------------------------------------
# activation functions


class UnknownKind(MFGraphError):
    """Unrecognized activation kind."""


class NonConvexGenerator(MFGraphError):
    """The generating function has non-positive second derivative."""


class DegenerateDissipation(MFGraphError):
    """The dissipation derivative vanishes away from zero."""


class NotAnEdge(MFGraphError):
    """The requested node pair is not an edge of the graph."""


# ---------------------------------------------------------------------------
# running cost / conjugate pairs


class BadExponent(MFGraphError):
    """Power-family exponent must exceed one."""


# ---------------------------------------------------------------------------
# dynamics and solvers


class PositivityLoss(MFGraphError):
    """A density entry left the probability simplex."""


class InconsistentTriple(MFGraphError):
    """The (theta, phi, psi*) triple does not satisfy its defining identity."""


class NoPotentialStructure(MFGraphError):
    """The operation requires scalar potentials for the payoff maps."""


class NotConcave(MFGraphError):
    """A payoff potential fails the sampled concavity check."""


class NonConvergence(MFGraphError):
    """Iteration cap reached; carries the last iterate for inspection."""

    def __init__(self, message, residual=None, iterations=None, solution=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.solution = solution


class NonConstantHamiltonian(MFGraphError):
    """The Hamiltonian trace drifts too much for the homogeneous shortcut."""


# ---------------------------------------------------------------------------
# two-point reductions


class WrongStateCount(MFGraphError):
    """The reduction requires exactly two states."""


class OutOfDomain(MFGraphError):
    """A reduced coordinate left the unit interval."""


class MidpointDivergence(MFGraphError):
    """The implicit-midpoint inner iteration failed to contract."""


class QuadratureFailure(MFGraphError):
    """Adaptive quadrature could not meet its tolerance."""


class NoMonotonePath(MFGraphError):
    """The boundary-value problem has no monotone solution branch."""


class NewtonFailure(MFGraphError):
    """Shooting iteration failed; carries the last iterate and residuals."""

    def __init__(self, message, iterate=None, residuals=None):
        super().__init__(message)
        self.iterate = iterate
        self.residuals = residuals


# ---------------------------------------------------------------------------
# configuration


class SchemaError(MFGraphError):
    """Config validation failure with JSON-pointer paths.

    ``problems`` is a list of (pointer, message) pairs.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        lines = "; ".join(f"{ptr}: {msg}" for ptr, msg in self.problems)
        super().__init__(f"invalid configuration: {lines}")
