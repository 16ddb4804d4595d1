"""Exception hierarchy. Every error raised on purpose by the package derives from
:class:`LisaError`, so callers (and the CLI) can catch one type."""


class LisaError(Exception):
    """Base class for package errors."""


class IntegrationError(LisaError):
    """The ODE integrator produced a non-finite state."""

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


class DegenerateKernelError(LisaError):
    """A kernel row or degree vanished numerically."""


class ConditioningError(LisaError):
    """A regularized Gram matrix could not be factorized."""


class ConfigError(LisaError):
    """Invalid experiment configuration."""


class ParseError(LisaError):
    """Malformed input file."""

    def __init__(self, message: str, row: int | None = None, column: int | str | None = None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column}")
        super().__init__(f"{message}" + (f" at {', '.join(loc)}" if loc else ""))
        self.row = row
        self.column = column


class CellError(LisaError):
    """A sweep cell failed; carries the (method, context length, start) it belongs to."""

    def __init__(self, message: str, method: str, ell: int, start: int, temperature: float | None = None):
        where = f"method={method}, ell={ell}, start={start}"
        if temperature is not None:
            where += f", temperature={temperature:g}"
        super().__init__(f"{message} [{where}]")
        self.method = method
        self.ell = ell
        self.start = start
        self.temperature = temperature
