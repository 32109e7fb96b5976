class InputError(ValueError):
    """Bad input data or configuration (CLI exit code 2)."""


class ComputationError(RuntimeError):
    """A well-formed input that cannot be evaluated (CLI exit code 1)."""
