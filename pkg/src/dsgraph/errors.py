"""Exception hierarchy shared across the package."""


class DSGraphError(Exception):
    """Base class for all package errors."""


class InadmissibleError(DSGraphError, ValueError):
    """Argument lies outside the positive cone, or a jet is not admissible.

    ``min_eig`` carries the offending smallest eigenvalue / component and
    ``node`` the grid node id when raised from a grid driver.
    """

    def __init__(self, message, min_eig=None, node=None):
        super().__init__(message)
        self.min_eig = min_eig
        self.node = node


class NotSpacelikeError(DSGraphError, ValueError):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class OutOfHalfspaceError(DSGraphError, ValueError):
    pass


class FitError(DSGraphError, ValueError):
    pass


class DegenerateBarrierError(DSGraphError, ValueError):
    pass


class ConfigError(DSGraphError, ValueError):
    """Invalid problem, solver option or CLI configuration."""


class NonConvergenceError(DSGraphError, RuntimeError):
    """Newton or continuation failed. ``residual`` is the last sup-norm."""

    def __init__(self, message, residual=None, eps=None):
        super().__init__(message)
        self.residual = residual
        self.eps = eps


class StallError(NonConvergenceError):
    """Line search damping dropped below the configured minimum."""


class BranchLossError(DSGraphError, RuntimeError):
    """Radial integration left the admissible branch."""
