"""Exception types shared across the package."""


class SurvselError(Exception):
    """Base class for all survsel-specific errors."""


class FormatError(SurvselError):
    """A scenario file is missing, empty, or syntactically malformed."""


class ConsistencyError(SurvselError):
    """Scenario files disagree with each other (e.g. instance sets differ)."""


class DegenerateDataError(SurvselError):
    """The data cannot support the requested operation (e.g. no uncensored runs)."""


class InvariantError(SurvselError):
    """An internal invariant was violated (e.g. step-function mass far from 1)."""


class AggregationError(SurvselError):
    """A cross-scenario aggregation is missing (selector, scenario) cells."""


class ConfigError(SurvselError):
    """A run configuration file violates the documented schema."""
