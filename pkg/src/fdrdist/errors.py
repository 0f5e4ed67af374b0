"""Exception hierarchy shared by all fdrdist modules.

Three failure families map onto the CLI exit codes: bad input (2),
numerical failure (3), and infeasible parameters (4).
"""


class FdrDistError(Exception):
    """Base class for all errors raised by this package."""


class InputError(FdrDistError, ValueError):
    """Malformed or out-of-domain input: p-values outside [0, 1],
    dimension mismatches, weights that do not sum to one, bad files."""


class ConstraintError(FdrDistError, ValueError):
    """A parameter vector lies outside the valid region of the density
    family (or a derived vector left it, e.g. after scaling)."""


class NumericError(FdrDistError, ArithmeticError):
    """A computation failed to stabilize: precision cap exceeded,
    root search did not converge, or a probability left [0, 1] by more
    than tolerance."""
