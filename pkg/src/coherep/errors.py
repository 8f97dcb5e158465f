"""Exception and warning classes shared across the package."""


class CoherepError(Exception):
    """Base class for all errors raised by coherep."""


class NotSquare(CoherepError, ValueError):
    pass


class NotHermitian(CoherepError, ValueError):
    pass


class DimensionMismatch(CoherepError, ValueError):
    pass


class DomainError(CoherepError, ValueError):
    """A spectral function is undefined at one of the eigenvalues."""


class InvalidState(CoherepError, ValueError):
    """Matrix is not a density matrix (trace, hermiticity or positivity)."""


class NonFiniteBeta(CoherepError, ValueError):
    pass


class DegenerateSpectrum(CoherepError, ValueError):
    pass


class DegenerateBohrFrequencies(CoherepError, ValueError):
    pass


class NegativeRate(CoherepError, ValueError):
    pass


class StepTooLarge(CoherepError, RuntimeError):
    """Integration step destroyed positivity beyond the repair tolerance."""


class NonCommutingPotential(CoherepError, ValueError):
    def __init__(self, norm, tol):
        super().__init__(f"[V, H_S + H_E] has max-norm {norm:.3e} > tolerance {tol:.3e}")
        self.norm = norm
        self.tol = tol


class EnumerationTooLarge(CoherepError, ValueError):
    pass


class ZeroProbabilityOnSupport(CoherepError, RuntimeError):
    """A log argument vanished on a path with non-negligible probability."""


class TrivialOperationWarning(UserWarning):
    """Every total-energy block is one-dimensional, so the map only adds phases."""


class ParseError(CoherepError):
    """Scenario file is not well-formed structured text."""


class ValidationError(CoherepError, ValueError):
    """A scenario field is missing or violates its rule.

    ``field`` is the dotted name of the offending field, e.g. ``unitary.theta``.
    """

    def __init__(self, field: str, rule: str):
        super().__init__(f"{field}: {rule}")
        self.field = field
        self.rule = rule


class IoError(CoherepError, OSError):
    """An output artifact could not be written."""
