"""Exception types shared across the package.

The CLI maps these onto exit codes: DataError -> 2, InternalError -> 3,
anything argparse rejects -> 1.
"""


class DataError(Exception):
    """Invalid input data: malformed files, unknown labels, contract violations."""


class InternalError(Exception):
    """An internal invariant was violated; indicates a bug, not bad input."""
