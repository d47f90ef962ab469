"""Exception types raised across the package.

Every error that callers are expected to catch is defined here so that the
command-line front end can map any of them to a single "data error" exit
code without importing each submodule's internals.
"""


class AtomkpError(Exception):
    """Base class for all package-specific errors."""


class ZeroInverse(AtomkpError):
    """Modular inverse of zero was requested."""


class DegenerateInput(AtomkpError):
    """A point operation received an input outside its precondition
    (e.g. a doubling with Z = 0 or Y = 0)."""


class ExceptionalAddition(AtomkpError):
    """The two addition operands project to the same x coordinate, so the
    Jacobian addition formula would divide by zero.  Carries enough context
    to report where in a scalar multiplication it happened."""

    def __init__(self, message: str, key_bit_index: int | None = None):
        super().__init__(message)
        self.key_bit_index = key_bit_index


class ConfigError(AtomkpError):
    """A simulation or analysis configuration value is invalid."""


class PlanError(AtomkpError):
    """A stall-injection plan references an invalid block, boundary or
    stall size."""


class SegmentationError(AtomkpError):
    """A trace could not be cut into block sub-traces."""


class EmptyInput(AtomkpError):
    """An operation received no input, or fewer inputs than it needs."""


class ShiftExceedsPadding(AtomkpError):
    """An alignment shift would move content past the sub-trace padding."""


class OutOfBounds(AtomkpError):
    """A region removal lies (partially) outside the sub-trace."""


class NoConvergence(AtomkpError):
    """Iterative repair hit its iteration cap with work still pending."""


class LengthMismatch(AtomkpError):
    """Series that must share a common region do not cover it."""
