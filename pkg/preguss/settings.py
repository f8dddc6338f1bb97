"""
Settings for the preguss pipeline.

Values are read from the environment (and an optional .env file at the project
root) through django-environ. Command-line flags take precedence over anything
defined here.
"""

from pathlib import Path

import environ

env = environ.Env(
    PREGUSS_LLM_BASE_URL=(str, "https://api.openai.com/v1"),
    PREGUSS_LLM_MODEL=(str, "gpt-4o-mini"),
    PREGUSS_LLM_API_KEY=(str, ""),
    PREGUSS_LLM_TIMEOUT=(float, 60.0),
    PREGUSS_LLM_RETRIES=(int, 3),
    PREGUSS_LLM_BACKOFF=(float, 1.0),
    PREGUSS_WIDTH=(int, 32),
    PREGUSS_MAX_ITERS=(int, 5),
    PREGUSS_LOG_LEVEL=(str, "WARNING"),
    PREGUSS_CORPUS_SIZE=(int, 500),
    LOGGING_FILE_LOCATION=(str, ""),
)

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

environ.Env.read_env(BASE_DIR / ".env")


# LLM endpoint (any OpenAI compatible chat completions server)
LLM_BASE_URL = env("PREGUSS_LLM_BASE_URL")
LLM_MODEL = env("PREGUSS_LLM_MODEL")
LLM_API_KEY = env("PREGUSS_LLM_API_KEY")
LLM_TIMEOUT = env("PREGUSS_LLM_TIMEOUT")
LLM_MAX_RETRIES = env("PREGUSS_LLM_RETRIES")
LLM_BACKOFF_SECONDS = env("PREGUSS_LLM_BACKOFF")

# Pipeline defaults
DEFAULT_WIDTH = env("PREGUSS_WIDTH")
DEFAULT_MAX_ITERS = env("PREGUSS_MAX_ITERS")

# Size of the generated corpus used by the property suites
CORPUS_SIZE = env("PREGUSS_CORPUS_SIZE")

LOG_LEVEL = env("PREGUSS_LOG_LEVEL")
LOGGING_FILE_LOCATION = env("LOGGING_FILE_LOCATION")

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "simple": {
            "format": "%(levelname)s %(name)s: %(message)s",
        },
        "verbose": {
            "format": "%(asctime)s %(levelname)s %(module)s: %(message)s",
        },
    },
    "handlers": {
        "console": {
            "level": "DEBUG",
            "class": "logging.StreamHandler",
            "formatter": "simple",
        },
    },
    "loggers": {
        "preguss": {
            "handlers": ["console"],
            "level": LOG_LEVEL,
            "propagate": False,
        },
    },
}

if LOGGING_FILE_LOCATION:
    LOGGING["handlers"]["file"] = {
        "level": "DEBUG",
        "class": "logging.FileHandler",
        "filename": LOGGING_FILE_LOCATION,
        "formatter": "verbose",
    }
    LOGGING["loggers"]["preguss"]["handlers"].append("file")
