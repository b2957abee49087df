"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid configuration: bad windowing parameters, missing artifacts, etc."""


class DataFormatError(ValueError):
    """A dataset file does not match its expected schema."""


class LabelingError(ValueError):
    """A gold answer could not be located in its source text."""


class RetrieverTransportError(RuntimeError):
    """The remote retrieval service failed (timeout, bad status, malformed body).

    Distinct from an empty result list, which is a valid response.
    """


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss, usually a too-high learning rate."""
