"""Shared exception types."""


class UserInputError(ValueError):
    """Bad input the operator must fix (manifest, CLI arguments, pick location).

    The CLI maps this to exit code 2; everything else is a runtime error (1).
    """


class ManifestError(UserInputError):
    """Project manifest is missing, malformed, or inconsistent."""
