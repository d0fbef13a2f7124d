class WtalError(Exception):
    """Base class for errors raised by this package."""

    kind = "error"


class ConfigurationError(WtalError, ValueError):
    kind = "configuration"


class FormatError(WtalError, ValueError):
    kind = "format"

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class DataError(WtalError, ValueError):
    kind = "data"


class ContractError(WtalError, ValueError):
    kind = "contract"


class CheckpointError(WtalError, ValueError):
    kind = "checkpoint"


class UndefinedMetricError(WtalError, ValueError):
    kind = "undefined_metric"
