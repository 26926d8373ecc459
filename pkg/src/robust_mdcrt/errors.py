"""Exception hierarchy shared by all modules."""


class MDCRTError(Exception):
    """Base class for domain errors raised by this package."""

    code = "domain_error"


class DimensionError(MDCRTError, ValueError):
    code = "dimension_mismatch"


class SingularMatrixError(MDCRTError, ValueError):
    code = "singular_matrix"


class DuplicateModuliError(MDCRTError, ValueError):
    code = "duplicate_moduli"


class InconsistentSystemError(MDCRTError):
    """The congruence system has no solution."""

    code = "inconsistent_system"


class AmbiguousClosestPointError(MDCRTError):
    """More than one lattice point attains the closest distance."""

    code = "cvp_tie"


class NotCoprimeError(MDCRTError, ValueError):
    code = "not_commutative_coprime"


class IntegerSnapError(MDCRTError):
    """A value that must be an integer vector was not close to one."""

    code = "integer_snap_failed"


class SizeLimitError(MDCRTError):
    code = "size_limit_exceeded"
