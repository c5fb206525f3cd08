"""Error taxonomy shared across the package.

The CLI maps these onto exit codes: precondition refusals exit 2,
consistency failures exit 3, budget refusals exit 4.
"""


class PreconditionError(ValueError):
    """An operation was invoked outside its documented domain."""


class ConsistencyError(RuntimeError):
    """Two independent routes to the same quantity disagreed."""


class BudgetError(RuntimeError):
    """The requested computation exceeds its stated budget."""
