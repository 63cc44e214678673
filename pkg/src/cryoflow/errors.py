"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration or input file, optionally located by file and line."""

    def __init__(self, message: str, path=None, line: int | None = None):
        self.message = message
        self.path = path
        self.line = line
        super().__init__(self._format())

    def _format(self) -> str:
        if self.path is not None and self.line is not None:
            return f"{self.path}:{self.line}: {self.message}"
        if self.path is not None:
            return f"{self.path}: {self.message}"
        return self.message


class ConvergenceFailure(RuntimeError):
    """A nonlinear sub-step did not converge; the caller should retry with a smaller dt."""


class NumericalError(ArithmeticError):
    """Non-finite values appeared in the solution."""

    def __init__(self, message: str, cell: int | None = None):
        self.cell = cell
        super().__init__(message if cell is None else f"{message} (cell {cell})")


class SimulationAbort(RuntimeError):
    """A column run cannot continue (e.g. time step underflow)."""

    def __init__(self, message: str, dump: dict | None = None, scenario: str | None = None):
        self.dump = dump or {}
        self.scenario = scenario
        super().__init__(message if scenario is None else f"[{scenario}] {message}")
