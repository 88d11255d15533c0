"""Shared exception types.

The CLI maps these onto its exit-code contract: usage errors exit 1,
data/file errors exit 2, numeric failures exit 3.
"""


class DataError(Exception):
    """Input data, dataset file, or checkpoint content is invalid."""


class NumericError(Exception):
    """A non-finite value appeared where the math requires finite ones."""


class InvalidPruneSpec(ValueError):
    """Prune spec violates 1 <= k <= L-1 or names an unknown strategy."""
