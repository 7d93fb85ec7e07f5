"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 2, infeasible constraint sets with 3, numerical diagnostics with 4.
"""


class DomainError(ValueError):
    """An argument violates a documented precondition (x <= 0, dt <= 0, ...)."""


class ConfigError(ValueError):
    """A configuration object or file is inconsistent or names unknown keys."""


class InfeasibleError(RuntimeError):
    """The risk constraint admits no control at some node.

    Carries the offending node so solvers can report where feasibility
    broke down.
    """

    def __init__(self, message, t=None, x=None):
        if t is not None:
            message = f"{message} (t={t!r}" + (f", x={x!r})" if x is not None else ")")
        super().__init__(message)
        self.t = t
        self.x = x


class NumericsError(RuntimeError):
    """A numerical self-check failed (non-monotone policy iteration,
    non-interval feasible set, ...)."""


class GridDomainError(NumericsError):
    """Quadrature mass escapes below the wealth-grid floor; widen the grid."""
