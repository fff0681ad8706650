"""Exception hierarchy shared by the library and the CLI."""


class PrimalDecompError(Exception):
    """Base class for all errors raised by this package."""


class MalformedInputError(PrimalDecompError, ValueError):
    """Inputs with inconsistent dimensions or out-of-domain parameters."""


class NumericalFailure(PrimalDecompError, RuntimeError):
    """An iterative routine did not converge or produced an unusable result.

    ``agent`` and ``round`` are filled in by the runtime when the failure
    happens inside a simulation round.
    """

    def __init__(self, message, agent=None, round=None):
        super().__init__(message)
        self.agent = agent
        self.round = round

    def __str__(self):
        msg = super().__str__()
        where = []
        if self.round is not None:
            where.append(f"round {self.round}")
        if self.agent is not None:
            where.append(f"agent {self.agent}")
        return f"{msg} ({', '.join(where)})" if where else msg


class ConfigError(PrimalDecompError, ValueError):
    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line

    def __str__(self):
        msg = super().__str__()
        return f"line {self.line}: {msg}" if self.line is not None else msg


class GenerationError(PrimalDecompError):
    """Random instance or graph generation could not produce a valid object."""


class InfeasibleError(GenerationError):
    """The coupled problem has no feasible point."""


class RefusalError(PrimalDecompError, ValueError):
    """A request outside a routine's supported domain (e.g. grid too large)."""
