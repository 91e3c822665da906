"""Exceptions raised by chainstab"""


class ChainStabError(Exception):
    """Base class for all errors raised by chainstab"""


class InvalidInput(ChainStabError, ValueError):
    """Raised when an input violates a documented precondition

    location: optional pointer to the offending value,
      e.g. a JSON path (``$.sign_matrix[0]``) or a row number.
    """

    def __init__(self, message, *, location=None):
        super().__init__(message)
        self.message = message
        self.location = location

    def __str__(self):
        if self.location:
            return f"{self.location}: {self.message}"
        return self.message


class NumericalFailure(ChainStabError, ArithmeticError):
    """Raised when an iterative method does not converge

    partial: whatever the method had computed when it gave up
    """

    def __init__(self, message, *, partial=None):
        super().__init__(message)
        self.message = message
        self.partial = partial


class EnumerationCapExceeded(ChainStabError):
    """Raised when a word enumeration or tree search hits its cap"""

    def __init__(self, message, *, cap, produced, partial=None, valid=False):
        """
        message: human readable description
        cap: the cap that was exceeded
        produced: how many words/nodes were produced before stopping
        partial: partial result, if the caller has one
        valid: whether `partial` is still a certified bound
        """
        super().__init__(message)
        self.message = message
        self.cap = cap
        self.produced = produced
        self.partial = partial
        self.valid = valid


class CountSaturated(ChainStabError, OverflowError):
    """Raised when an admissible-word count no longer fits in 64 bits"""

    def __init__(self, message, *, length, count):
        super().__init__(message)
        self.message = message
        self.length = length
        self.count = count
