# errors.py
from typing import Optional

EXIT_OK = 0
EXIT_VERDICT_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_BUDGET_EXCEEDED = 3


class SigcompError(Exception):
    """Base class for every error the solver raises on purpose."""
    exit_code = EXIT_VERDICT_FAILED


class InputError(SigcompError, ValueError):
    """Malformed document, bad index, non-binary entry, incomplete table..."""
    exit_code = EXIT_INPUT_ERROR

    def __init__(self, message: str, *, line: Optional[int] = None, field: Optional[str] = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class BudgetExceeded(SigcompError):
    """An exhaustive scan would exceed its configured budget."""
    exit_code = EXIT_BUDGET_EXCEEDED

    def __init__(self, what: str, needed: int, budget: int):
        self.what = what
        self.needed = needed
        self.budget = budget
        super().__init__(f"{what}: needs {needed}, budget is {budget}")


class ConvergenceError(SigcompError, RuntimeError):
    """Best-response dynamics hit the hard cap, or a subgame scan found no pure NE."""
    exit_code = EXIT_VERDICT_FAILED
