"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """A solver or iteration failed numerically (singular system, blow-up)."""


class GaussNewtonError(NumericalError):
    """Gauss-Newton failed to converge. Carries the best iterate found."""

    def __init__(self, message, best_xi=None, iterations=0, residual_norm=float("nan")):
        super().__init__(message)
        self.best_xi = best_xi
        self.iterations = iterations
        self.residual_norm = residual_norm


class RomSteppingError(NumericalError):
    """Latent time stepping aborted. Carries the partial trajectory."""

    def __init__(self, message, step, trajectory=None):
        super().__init__(message)
        self.step = step
        self.trajectory = trajectory


class FormatError(ValueError):
    """A persisted file failed validation. `offset` is the byte/line position."""

    def __init__(self, message, offset=None):
        super().__init__(message if offset is None else f"{message} (offset {offset})")
        self.offset = offset
