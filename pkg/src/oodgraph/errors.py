"""Exception types raised across the library.

Every error maps to a distinct CLI exit code; see `cli.EXIT_CODES`.
"""


class OodGraphError(Exception):
    """Base class for all library errors."""


# --- file format / IO ---

class BadMagicError(OodGraphError):
    """File does not start with the expected magic bytes."""


class TruncatedFileError(OodGraphError):
    """File byte count does not match what the header promises."""


class NonFiniteValueError(OodGraphError):
    """A matrix value is NaN or infinite."""

    def __init__(self, row: int, col: int):
        self.row = row
        self.col = col
        super().__init__(f"non-finite value at row {row}, col {col}")


class EmptyMatrixError(OodGraphError):
    """Matrix has zero rows or zero columns."""


class EmptyVectorError(OodGraphError):
    """Label vector has zero entries."""


class LengthMismatchError(OodGraphError):
    """Label vector length differs from its companion matrix."""


# --- linear algebra ---

class DimMismatchError(OodGraphError):
    """Operands have incompatible dimensions."""


class ZeroNormError(OodGraphError):
    """A vector has norm below the representable threshold (1e-12)."""

    def __init__(self, index: int | None = None):
        self.index = index
        msg = "vector norm below 1e-12"
        if index is not None:
            msg += f" at row {index}"
        super().__init__(msg)


class DegenerateDataError(OodGraphError):
    """Data has essentially zero total variance."""


class TooFewSamplesError(OodGraphError):
    """Not enough samples for the requested fit."""


# --- contrastive ---

class IndexOutOfRangeError(OodGraphError):
    """Row index outside the batch."""


class SamePairError(OodGraphError):
    """The two positive-pair indices are identical."""


# --- graph / clustering ---

class KTooLargeError(OodGraphError):
    """Neighbor or cluster count exceeds what the data supports."""


class TooFewNodesError(OodGraphError):
    """Graph construction needs at least two nodes."""


class UnassignedNodeError(OodGraphError):
    """A non-isolated node lacks a cluster assignment."""


class EmptyGraphError(OodGraphError):
    """Graph has no edges (total weight is zero)."""


class AllNodesIsolatedError(OodGraphError):
    """Every node lost all its edges; nothing to cluster."""


# --- pipeline / metrics ---

class EmptyHoldoutError(OodGraphError):
    """Calibration holdout contains no samples."""


class EmptyInputError(OodGraphError):
    """A score list required to be non-empty is empty."""


class NonFiniteScoreError(OodGraphError):
    """A score value is NaN or infinite."""
