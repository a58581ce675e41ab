"""Exception types shared across the package.

The CLI maps GLMeissnerError subclasses to exit code 2 (bad input /
validation) or 3 (solver failure), so new exceptions should inherit from
the right branch.
"""


class GLMeissnerError(Exception):
    """Base class for all package errors."""


class ValidationFailure(GLMeissnerError):
    """Bad input: maps to CLI exit code 2."""


class SolverFailure(GLMeissnerError):
    """Numerical failure: maps to CLI exit code 3."""


# mesh
class NonPositiveSpacing(ValidationFailure):
    pass


class DegenerateShape(ValidationFailure):
    pass


class EmptyDomain(ValidationFailure):
    pass


class OutOfBoundingBox(ValidationFailure):
    pass


# fields
class WrongStorage(ValidationFailure):
    pass


class MeshMismatch(ValidationFailure):
    pass


class CurveOutsideDomain(ValidationFailure):
    pass


# london
class SolverDiverged(SolverFailure):
    pass


class MeshTooCoarse(ValidationFailure):
    pass


class OutsideBall(ValidationFailure):
    pass


class NonPositiveRadius(ValidationFailure):
    pass


class InvalidEpsilon(ValidationFailure):
    pass


class NonPositiveNormStar(ValidationFailure):
    pass


# glcore / minimize
class MissingMeissnerData(ValidationFailure):
    pass


class VortexPresent(ValidationFailure):
    pass


class LineSearchStalled(SolverFailure):
    pass


class CoreTooSmall(ValidationFailure):
    pass


# cli / config
class ParseError(ValidationFailure):
    pass


class ValidationError(ValidationFailure):
    pass


class NotDivergenceFree(ValidationFailure):
    pass
