"""Exception hierarchy.

``DomainRefusal`` subclasses signal that the posed problem violates a
mathematical precondition of the method (the CLI maps them to exit code 2);
everything else is an internal or numerical failure (exit code 1).
"""


class GapsolError(Exception):
    """Base class for all package errors."""

    #: pipeline stage label, set by multi-stage drivers before re-raising
    stage: str | None = None


class DomainRefusal(GapsolError):
    """The input problem is outside the method's domain of validity."""


# -- grid / field plumbing ---------------------------------------------------

class InvalidGrid(GapsolError):
    pass


class NonIntegerShift(GapsolError):
    pass


class GridMismatch(GapsolError):
    pass


class FieldFormatError(GapsolError):
    """A field dump or its sidecar is malformed or truncated."""


# -- spectral ----------------------------------------------------------------

class ZeroInSpectrum(DomainRefusal):
    """An eigenvalue sits at zero within tolerance: the gap condition
    (assumption (vi)) fails at this discretization."""


class GapContainsZero(DomainRefusal):
    """Zero lies inside a spectral band: no gap around zero (assumption (vi))."""


class NoSpectrumAbove(DomainRefusal):
    """Band computation did not bracket zero from above."""


class IncompleteDecomposition(GapsolError):
    """A spectral decomposition does not retain the subspace an operation needs."""


class NegativeSquare(GapsolError):
    """A split-norm square came out negative beyond tolerance."""


# -- nonlinearity ------------------------------------------------------------

class AssumptionViolated(DomainRefusal):
    """A nonlinearity assumption fails numerically; carries the failing label
    and a witness point."""

    def __init__(self, message, *, label=None, witness=None, report=None):
        super().__init__(message)
        self.label = label
        self.witness = witness
        self.report = report


# -- solver ------------------------------------------------------------------

class SeedDegenerate(DomainRefusal):
    """The one-parameter ray has no interior maximum: superlinearity fails
    numerically (e.g. vanishing nonlinearity)."""


class ProjectionDiverged(GapsolError):
    pass


class CollapsedToZero(GapsolError):
    """An iterate shrank below the collapse threshold: the trivial solution."""


class AllRestartsCollapsed(GapsolError):
    pass


class OffManifold(GapsolError):
    pass


class VerificationFailed(DomainRefusal):
    def __init__(self, message, *, report=None):
        super().__init__(message)
        self.report = report


# -- continuation / photonics ------------------------------------------------

class WindowTooSmall(GapsolError):
    """Too few decay shells qualify: the cell is too small to measure decay."""


class InsufficientSpan(GapsolError):
    pass


class InvalidSweep(GapsolError):
    pass


class MixedSignChi(DomainRefusal):
    """Sign-changing Kerr coefficient: mixed self-focusing/defocusing media
    are outside the method's domain (open problem)."""


class OnlyTrivialSolution(DomainRefusal):
    """The '-' sign problem with no spectrum below zero admits no nontrivial
    solution (assumption (vi) requires inf spectrum < 0 for this sign)."""


class EdgeTooClose(DomainRefusal):
    """The gap is too narrow for the discretization to resolve."""


# -- configuration -----------------------------------------------------------

class ConfigError(GapsolError):
    pass


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    pass
