import logging.config

from preguss import settings

__version__ = "0.1.0"


def configure_logging(level=None):
    config = dict(settings.LOGGING)
    if level is not None:
        config["loggers"] = {
            name: {**logger, "level": level} for name, logger in settings.LOGGING["loggers"].items()
        }
    logging.config.dictConfig(config)
