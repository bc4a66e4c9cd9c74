"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class TensorFormatError(ValueError):
    """A stored tensor file is malformed.

    Carries the byte offset at which parsing failed.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss."""


class ConfigError(ValueError):
    """A run configuration failed validation.

    Carries the full list of validation messages, not just the first.
    """

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)
