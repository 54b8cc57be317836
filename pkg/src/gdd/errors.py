"""Exception types shared across the toolkit."""


class GddError(Exception):
    """Base class for every error raised by this package."""


class InvalidTemperature(GddError):
    """Reference temperature must be strictly positive."""


class DegenerateLogits(GddError):
    """A logit row is numerically constant and cannot be standardized."""


class ShapeMismatch(GddError):
    """Two arrays that must agree in shape do not."""


class NonFiniteLoss(GddError):
    """A loss evaluation produced NaN or infinity."""


class LabelOutOfRange(GddError):
    """A class label falls outside [0, num_classes)."""


class EmptyPool(GddError):
    """A model pool needs at least one classifier spec."""


class UnknownArchitecture(GddError):
    """Requested classifier architecture id is not supported."""


class BadMagic(GddError):
    """A binary file does not start with the expected magic number."""


class CountMismatch(GddError):
    """Image and label counts disagree."""


class TruncatedFile(GddError):
    """A binary file is shorter than its header promises."""


class InsufficientSamples(GddError):
    """A class has fewer samples than the requested subset size."""


class InvalidBudget(GddError):
    """Training budget must be a positive number of epochs."""


class EmptyDataset(GddError):
    """An operation that needs samples received an empty dataset."""


class BadCheckpoint(GddError):
    """A checkpoint file is malformed or has an unsupported version."""


class ConfigError(GddError):
    """A run configuration failed to parse or validate.

    Carries the offending field name and, when known, the line number in
    the config file so the CLI can point at the exact problem.
    """

    def __init__(self, message: str, *, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if field is not None:
            prefix += f"field '{field}': "
        super().__init__(prefix + message)
