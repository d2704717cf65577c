"""Exception types shared across the package.

Every numerical failure mode gets its own class so callers (and the CLI
exit-code mapping) can distinguish config mistakes from genuine numeric
breakdowns.
"""


class MFSemigroupError(Exception):
    """Base class for all package-specific errors."""


class NonConvergence(MFSemigroupError):
    """An iterative solve failed to meet its residual tolerance."""


class IndeterminateValue(MFSemigroupError):
    """Numerator and denominator vanish at the same point (map is not coprime there)."""


class InvalidMap(MFSemigroupError):
    """A RationalMap or MultiMap violates a structural invariant."""


class CoefficientOverflow(MFSemigroupError):
    """Symbolic composition produced coefficients beyond the configured bound."""


class NoRepellingFixedPoint(MFSemigroupError):
    """No generator has a fixed point with spherical derivative norm > 1."""


class BracketFailure(MFSemigroupError):
    """Root bracketing for a scalar solve failed inside the allowed interval."""


class NodeBudgetExceeded(MFSemigroupError):
    """A preimage tree would exceed the configured leaf budget."""


class NotMonotone(MFSemigroupError):
    """A quantity assumed monotone for bisection has mixed signs."""


class GridTooCoarse(MFSemigroupError):
    """A finite-difference stencil needs more grid points than were supplied."""


class OutOfRange(MFSemigroupError):
    """A requested value lies outside the range covered by the computed table."""


class InvalidEscapeRadius(MFSemigroupError):
    """The configured escape radius does not satisfy the doubling property."""


class NotPolynomial(MFSemigroupError):
    """An operation restricted to polynomial generators was given a non-polynomial map."""


class DegenerateFit(MFSemigroupError):
    """A least-squares fit has too few usable points above the noise floor."""


class ConfigError(MFSemigroupError):
    """A run configuration file is malformed or violates validation rules."""
