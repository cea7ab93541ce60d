"""
Django settings for the kNN-MT decoding project.

Only settings, logging and management commands are used: there is no database and no web surface.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.1/ref/settings/
"""

import sys
from pathlib import Path

from pydantic import BaseModel, Field
from pydantic_settings import BaseSettings

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


class Settings(BaseSettings):
    # https://docs.pydantic.dev/latest/concepts/pydantic_settings/
    class KnnMtSettings(BaseModel):
        DEBUG: bool = False
        DATA_DIR: Path = Field(
            description="""
            Default directory for corpora, trained models, datastores and decode outputs
            when a run configuration gives relative paths.
            """,
            default=BASE_DIR / ".." / "data",
        )
        SWEEP_MAX_POINTS: int = Field(
            description="""
            Upper bound on the number of (configuration point, seed) runs of a single sweep.
            Sweeps exceeding it are rejected before any work is done.
            """,
            default=512,
            ge=1,
        )
        SWEEP_WORKERS: int = Field(
            description="""
            Worker processes for sweeps.
            Every point is independent and rows are sorted afterwards, so this only affects wall time.
            """,
            default=1,
            ge=1,
        )
        DECODE_WORKERS: int = Field(
            description="""
            Threads decoding sentences in parallel within one run.
            """,
            default=1,
            ge=1,
        )
        NUMERIC_TOLERANCE: float = Field(
            description="""
            Absolute tolerance of the invariant checks run after decoding and evaluation.
            """,
            default=1e-9,
            gt=0,
        )

    KNNMT_SETTINGS: KnnMtSettings = Field(
        description="""
        Settings are read from a single JSON environment variable,
        to avoid collisions with environment variables that may be needed by other processes.
        """,
        default=KnnMtSettings(),
    )


for key, value in Settings().model_dump()["KNNMT_SETTINGS"].items():
    setattr(sys.modules[__name__], key, value)

## Logging settings

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{levelname} {asctime} {module} {process:d} {thread:d} {message}",
            "style": "{",
        },
        "simple": {
            "format": "{levelname} {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "level": "DEBUG" if DEBUG else "INFO",  # type: ignore # noqa: F821
            "class": "logging.StreamHandler",
            "formatter": "verbose" if DEBUG else "simple",  # type: ignore # noqa: F821
        },
    },
    "loggers": {
        "django": {
            "handlers": ["console"],
            "level": "WARNING",
            "propagate": True,
        },
        "knnmt": {
            "handlers": ["console"],
            "level": "DEBUG" if DEBUG else "INFO",  # type: ignore # noqa: F821
            "propagate": True,
        },
    },
}

# Not used for anything cryptographic: nothing is served.
SECRET_KEY = "knnmt-offline"

INSTALLED_APPS = [
    "knnmt",
]

DATABASES: dict = {}

USE_TZ = True
TIME_ZONE = "UTC"
