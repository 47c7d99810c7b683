"""Exception types shared across the package."""


class LakekeeperError(Exception):
    """Base class for everything raised on purpose."""


class DomainError(LakekeeperError):
    """Input outside the mathematical domain of an operation."""


class ConfigError(LakekeeperError):
    """Invalid configuration or malformed input file."""


class QueryError(LakekeeperError):
    """Lookup outside the modeled extent."""


class FormatError(LakekeeperError):
    """Unparseable or inconsistent serialized artifact."""


class PlanError(LakekeeperError):
    """Infeasible or inconsistent planning request."""


class StateError(LakekeeperError):
    """Operation not valid in the current mission state."""
