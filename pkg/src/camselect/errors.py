"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration value or structure is invalid."""


class DomainError(ValueError):
    """An input lies outside the mathematical domain of an operation."""


class DegenerateInputError(ValueError):
    """Geometric input admits no well-posed solution (collinear, duplicated)."""


class EmptySamplesError(ValueError):
    """An operation that needs at least one error sample received none."""


class NoDataForPlaceError(ValueError):
    """No camera contributed any error sample for a place."""

    def __init__(self, place_id: int):
        super().__init__(f"no camera has error samples for place {place_id}")
        self.place_id = place_id


class EmptyInputError(ValueError):
    """An aggregate was requested over an empty collection."""
