"""Exception hierarchy shared by the library and the command line."""


class RYMError(Exception):
    """Base class for every error raised by rymflow."""


class InvalidArgumentError(RYMError, ValueError):
    pass


class ContractViolation(RYMError):
    """A field was passed to an operator of a different background."""


class InvalidStateError(RYMError):
    pass


class NumericalFailure(RYMError):
    """Failures that map to exit code 2 on the command line."""


class VolumeDriftError(NumericalFailure):
    def __init__(self, volume: float):
        super().__init__(f"volume drift guard violated: volume={volume!r} outside [0.99, 1.01]")
        self.volume = volume


class StepRejected(NumericalFailure):
    def __init__(self, dt: float, suggested: float):
        super().__init__(f"step dt={dt:.6g} violates the stability bound; use dt <= {suggested:.6g}")
        self.dt = dt
        self.suggested = suggested


class BlowUpError(NumericalFailure):
    def __init__(self, t: float, max_abs_u: float):
        super().__init__(f"blow-up at t={t:.6g}: max|u|={max_abs_u:.6g}")
        self.t = t
        self.max_abs_u = max_abs_u


class ConvergenceError(NumericalFailure):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class UnsupportedSurfaceError(RYMError):
    pass


class ParameterDomainError(RYMError, ValueError):
    pass


class InvalidProfileError(RYMError, ValueError):
    pass


class ConfigError(RYMError, ValueError):
    """Config problem; carries the offending key or line number when known."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.key = key
        self.line = line
