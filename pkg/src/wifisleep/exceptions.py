"""Exception types raised across the package."""


class WifiSleepError(Exception):
    """Base class for all package errors."""


class ParseError(WifiSleepError, ValueError):
    """A raw log line could not be parsed."""

    def __init__(self, message, line_number=None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class ConfigError(WifiSleepError, ValueError):
    """Invalid configuration value or key."""

    def __init__(self, message, key=None):
        self.key = key
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)


class LoadError(WifiSleepError, ValueError):
    pass


class NoPrimaryDeviceError(WifiSleepError, LookupError):
    pass


class PriorUnavailableError(WifiSleepError, ValueError):
    """A prior cannot be built for this day (e.g. no usable dorm interval)."""


class AbsentSeriesError(WifiSleepError, ValueError):
    """Sampling was requested for a day flagged as absent."""


class UnsupportedModelError(WifiSleepError, ValueError):
    pass


class InsufficientDataError(WifiSleepError, ValueError):
    pass


class KeyMismatchError(WifiSleepError, KeyError):
    """Predictions and ground truth do not cover the same keys."""

    def __init__(self, missing_in_pred, missing_in_truth):
        self.missing_in_pred = sorted(missing_in_pred)
        self.missing_in_truth = sorted(missing_in_truth)
        super().__init__(
            f"missing predictions for {self.missing_in_pred}; "
            f"missing truth for {self.missing_in_truth}"
        )

    def __str__(self):
        return self.args[0]
