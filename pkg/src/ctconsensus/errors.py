class ConsensusError(Exception):
    """Base class for every error raised by ctconsensus."""


class InvalidArgument(ConsensusError, ValueError):
    pass


class InvalidFaultSet(InvalidArgument):
    pass


class InvalidPartition(InvalidArgument):
    pass


class NotARoot(InvalidArgument):
    pass


class InfeasibleGraph(ConsensusError):
    """The graph violates the connectivity condition an operation requires."""


class InvalidSchedule(InvalidArgument):
    pass


class InvalidInput(InvalidArgument):
    pass


class IncompleteTable(ConsensusError, KeyError):
    pass


class VerificationFailure(ConsensusError):
    """A brute-force check found a case the theory says cannot exist."""


class GraphFormatError(ConsensusError, ValueError):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
