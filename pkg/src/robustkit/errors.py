"""Exception hierarchy shared by all modules.

Every error carries a machine-readable ``code``; the CLI maps the subclass to
an exit status.
"""


class RobustError(Exception):
    """Base error with a stable machine-readable code."""

    def __init__(self, code, message=""):
        self.code = code
        self.message = message or code
        super().__init__(f"{code}: {self.message}")


class InstanceError(RobustError):
    """Malformed or invalid input data (parse, reference, validation)."""

    def __init__(self, code, message="", line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(code, message)


class UnsupportedError(RobustError):
    """The requested concept cannot be applied to this uncertainty set or problem."""


class LimitError(RobustError):
    """A resource limit (iterations, nodes, vertex cap, size) was reached."""

    def __init__(self, code, message="", best=None):
        self.best = best
        super().__init__(code, message)


class SolveFailure(RobustError):
    """An auxiliary solve (nominal, per-scenario, master) did not return an optimum."""

    def __init__(self, code, message="", status=None):
        self.status = status
        super().__init__(code, message)
