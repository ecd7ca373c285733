class ToolkitError(Exception):
    """Base class for every error raised by the toolkit"""


class DomainError(ToolkitError, ValueError):
    """Precondition or domain violation in an operation's arguments"""


class StabilityError(DomainError):
    """Hermitian part of a propagator generator is not positive semi-definite"""


class ResourceLimitError(ToolkitError):
    """A configured size cap would be exceeded"""


class SolverError(ToolkitError):
    """Non-finite values produced while stepping"""


class BlowUpError(ToolkitError):
    """A trajectory exceeded the blow-up cap; partial outputs were written"""


# CLI exit codes
EXIT_OK = 0
EXIT_INVALID = 2
EXIT_BLOWUP = 3
EXIT_RESOURCE = 4
