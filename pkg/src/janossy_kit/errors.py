"""Error types shared across the package.

Numerical failures carry enough context (matrix name, reciprocal condition
estimate) for a caller to report them without re-deriving anything.
"""

from __future__ import annotations


class SingularOperatorError(ArithmeticError):
    """A matrix that must be inverted is singular or too ill-conditioned.

    Parameters
    ----------
    name : str
        Human-readable name of the offending matrix ("gram matrix",
        "complement gram matrix", "Id - restricted kernel", ...).
    rcond : float
        Reciprocal condition number estimate at the point of failure.
    detail : str, optional
        Extra context, e.g. which windows produced the matrix.
    """

    def __init__(self, name: str, rcond: float, detail: str = ""):
        self.name = name
        self.rcond = rcond
        self.detail = detail
        msg = f"{name} is numerically singular (rcond ~ {rcond:.3e})"
        if detail:
            msg += f"; {detail}"
        super().__init__(msg)


class BudgetExceededError(RuntimeError):
    """An enumeration would visit more configurations than the budget allows."""

    def __init__(self, required: int, budget: int):
        self.required = required
        self.budget = budget
        super().__init__(
            f"enumeration needs {required} configurations, budget is {budget}"
        )


class ConfigError(ValueError):
    """A run configuration is malformed or references unknown names."""
