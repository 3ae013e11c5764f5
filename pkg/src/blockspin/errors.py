"""Exception types shared across the package."""


class BlockspinError(Exception):
    """Base class for package-specific errors."""


class SpaceMismatchError(BlockspinError):
    """Two values that must live in the same space do not."""


class NearSingularError(BlockspinError):
    """A linear solve was blocked by the condition-number gate.

    Carries the name of the invertibility assumption that failed, so a bad
    input is diagnosed instead of silently amplifying roundoff.
    """

    def __init__(self, assumption: str, cond: float, limit: float):
        self.assumption = assumption
        self.cond = cond
        self.limit = limit
        super().__init__(
            f"{assumption}: estimated condition number {cond:.3e} "
            f"exceeds the limit {limit:.3e}"
        )


class ConvergenceError(BlockspinError):
    """An iterative solver failed to reach its tolerance."""


class QuadratureError(BlockspinError):
    """Numerical integration failed a self-consistency check."""


class ConfigError(BlockspinError):
    """A scenario configuration is malformed."""
