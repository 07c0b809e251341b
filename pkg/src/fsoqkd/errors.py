"""Exception types shared across the simulator."""


class DomainError(ValueError):
    """An input lies outside the domain of a physical model."""


class ConfigError(ValueError):
    """A configuration file or override is malformed.

    ``field`` holds the dotted path of the offending entry when known.
    """

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class NoBoundaryError(DomainError):
    """The aperture ratio never exceeds 1, so receiver compensation has no range."""
