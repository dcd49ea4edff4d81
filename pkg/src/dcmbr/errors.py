"""Exception hierarchy shared by the library and the CLI."""


class DcmbrError(Exception):
    """Base class for all library errors."""


class DomainError(DcmbrError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class IngestionError(DcmbrError, ValueError):
    """A task, corpus or config file could not be parsed or validated."""


class ConfigError(DcmbrError, ValueError):
    """Invalid decoding or experiment configuration."""


class BudgetExceeded(DcmbrError):
    """Exhaustive enumeration would exceed the configured budget."""

    def __init__(self, required: int, budget: int):
        self.required = required
        self.budget = budget
        super().__init__(
            f"enumeration needs {required} sequences but the budget is {budget}"
        )
