"""Exception types raised across the flowscat pipeline."""


class FlowscatError(Exception):
    """Base class for all flowscat errors."""


class MissingHeader(FlowscatError):
    """CSV file is empty or has no header row."""


class SchemaMismatch(FlowscatError):
    """Schema and CSV header do not name the same columns."""


class MalformedRow(FlowscatError):
    """A CSV data row could not be parsed."""

    def __init__(self, line_number, message):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class EmptyTable(FlowscatError):
    """Operation requires at least one flow record."""


class InsufficientAttacks(FlowscatError):
    """Not enough attack rows to reach the requested contamination."""

    def __init__(self, requested, achievable):
        self.requested = requested
        self.achievable = achievable
        super().__init__(
            f"requested train contamination {requested:g} but only "
            f"{achievable:g} is achievable with the available attack rows"
        )


class DimensionMismatch(FlowscatError):
    """Feature dimensions disagree between two inputs."""


class InvalidNode(FlowscatError):
    """Node index outside the graph."""


class InvalidConfig(FlowscatError):
    """Configuration violates a documented invariant."""


class LengthExceedsT(FlowscatError):
    """Input vector longer than the padded transform length."""


class InvalidDistance(FlowscatError):
    """Hop distance outside {0, 1, 2}."""


class EmptyCorpus(FlowscatError):
    """No walks available to train on."""


class MissingEmbeddings(FlowscatError):
    """Node-embedding table required but not provided."""


class TooFewRows(FlowscatError):
    """Not enough rows to fit the requested model."""


class LengthMismatch(FlowscatError):
    """Paired sequences have different lengths."""


class EmptyInput(FlowscatError):
    """Metric computation on zero rows."""


class StageError(FlowscatError):
    """Pipeline stage failure, tagged with the stage name."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")


class NoCategoricalsWarning(UserWarning):
    """Encoder fitted on a table without categorical columns (no-op)."""
