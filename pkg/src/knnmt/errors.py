from django.core.management.base import CommandError


class KnnMtError(Exception):
    """
    Base class for all errors raised by the library.
    `exit_code` is what a management command exits with when the error escapes it.
    """

    exit_code: int = 1


class InvalidInputError(KnnMtError, ValueError):
    exit_code = 3


class FormatError(KnnMtError):
    """
    Malformed artefact: a binary store, a corpus file or a JSON-lines record.
    `offset` is a byte offset for binary files and a 1-based line number for text files.
    """

    exit_code = 3

    def __init__(self, message: str, offset: int | None = None) -> None:
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


class MissingArtifactError(KnnMtError):
    exit_code = 3

    def __init__(self, path: object, step: str) -> None:
        self.path = path
        self.step = step
        super().__init__(f"Missing artefact {path}; run `manage {step}` first")


class ConfigError(KnnMtError):
    exit_code = 2

    def __init__(self, message: str, key_path: str | None = None) -> None:
        self.key_path = key_path
        if key_path:
            message = f"{key_path}: {message}"
        super().__init__(message)


class InvariantViolation(KnnMtError):
    exit_code = 4


def to_command_error(exc: KnnMtError) -> CommandError:
    """
    Map library errors onto Django's command error so `manage` exits with the right code.
    """
    return CommandError(str(exc), returncode=exc.exit_code)
