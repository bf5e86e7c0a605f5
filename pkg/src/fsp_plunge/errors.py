"""Exception hierarchy shared by every module of the package."""


class FSPError(Exception):
    """Base class for all package errors."""


class DomainError(FSPError, ValueError):
    """An input lies outside the domain of an operation (e.g. non-finite)."""


class ConfigurationError(FSPError, ValueError):
    """A profile, grid or config object is malformed."""


class IntegrationDiverged(FSPError, ArithmeticError):
    """The RK4 state became non-finite or left the |T| <= 1e5 degC envelope."""

    def __init__(self, time, run_index=None, message=None):
        self.time = float(time)
        self.run_index = run_index
        where = f" in run {run_index}" if run_index is not None else ""
        super().__init__(message or f"integration diverged at t={self.time:g} s{where}")


class FitFailed(FSPError, RuntimeError):
    """No finite-loss iterate could be found during system identification."""


class ControlInfeasible(FSPError, RuntimeError):
    """Trajectory optimization never produced a finite loss."""


class MetricUndefined(FSPError, ValueError):
    """A metric is undefined for the supplied data (e.g. MAPE with T <= 0)."""


class SpecInvalid(FSPError, ValueError):
    """A synthetic plant specification is invalid or its rollout diverged."""


class RunFileError(FSPError, ValueError):
    """A run CSV file could not be parsed.

    ``line`` is the 1-based line number of the offending row when known.
    """

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        loc = ""
        if path is not None:
            loc += f"{path}"
        if line is not None:
            loc += f":{line}"
        super().__init__(f"{loc}: {message}" if loc else message)
