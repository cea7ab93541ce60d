from argparse import ArgumentDefaultsHelpFormatter, ArgumentParser
from pathlib import Path
from typing import Any

from django.conf import settings
from django.core.management.base import (
    BaseCommand,
    CommandError,
    CommandParser,
    DjangoHelpFormatter,
)

from knnmt.config import RunConfig, load_run_config
from knnmt.errors import FormatError, KnnMtError, to_command_error


class DefaultsHelpFormatter(DjangoHelpFormatter, ArgumentDefaultsHelpFormatter):
    """Show argument defaults in `--help`; `DjangoHelpFormatter` keeps command arguments listed first."""


class KnnMtCommand(BaseCommand):
    """
    Base for all commands of the app.
    Library errors leave the command as `CommandError` carrying the error's exit code.
    """

    def create_parser(
        self, prog_name: str, subcommand: str, **kwargs: Any
    ) -> CommandParser:
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        parser.formatter_class = DefaultsHelpFormatter
        return parser

    def execute(self, *args: Any, **options: Any) -> str | None:
        try:
            return super().execute(*args, **options)
        except KnnMtError as e:
            raise to_command_error(e) from e
        except OSError as e:
            raise CommandError(str(e), returncode=FormatError.exit_code) from e


class RunCommand(KnnMtCommand):
    """A command driven by a run configuration file plus `--set` overrides."""

    def add_arguments(self, parser: ArgumentParser) -> None:
        parser.add_argument(
            "--config",
            type=Path,
            help="Run configuration (TOML).",
        )
        parser.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY.PATH=VALUE",
            help="Override a configuration value; VALUE is parsed as JSON, else taken as a string.",
        )

    def run_config(self, options: dict[str, Any]) -> RunConfig:
        """Relative paths in the configuration are resolved against `DATA_DIR`."""
        return load_run_config(
            options["config"], options["overrides"], base=Path(settings.DATA_DIR)
        )
