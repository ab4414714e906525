"""Exception types raised across the library."""


class SepcheckError(Exception):
    """Base class for all library-specific failures."""


class NonNormal(SepcheckError):
    """A matrix expected to be normal fails [C, C^dag] = 0 within tolerance."""


class NonCommutingFamily(SepcheckError):
    """A family expected to commute has a commutator above tolerance."""


class NoAlignment(SepcheckError):
    """No Bob vector f with |a_i, f> in the kernel for the probed Alice basis."""


class RankDropViolation(SepcheckError):
    """A product subtraction failed to lower both ranks by exactly one."""


class DirectionNotFound(SepcheckError):
    """No Alice direction with a full-rank local block within the attempt budget."""


class CanonicalMismatch(SepcheckError):
    """The filtered state violates the canonical block identities."""


class NotPPT(SepcheckError):
    """The state has a negative partial transpose."""


class RankTooLow(SepcheckError):
    """Global rank below a local rank: the state is distillable, hence entangled."""


class DecompositionFailed(SepcheckError):
    """Numerical breakdown while assembling a product decomposition."""


class RankSumTooHigh(SepcheckError):
    """Kernel dimensions too small for the product-vector search to apply."""


class DegenerateRowChoice(SepcheckError):
    """Every candidate base-row subset is identically dependent as polynomials."""


class NonGeneric(SepcheckError):
    """Polynomial elimination degenerated; the solution set may be infinite."""


class PreconditionFailed(SepcheckError):
    """An operation-specific precondition does not hold for the given inputs."""
