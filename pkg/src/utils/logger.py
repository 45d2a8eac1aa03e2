"""
utils/logger.py

Configures a structured, JSON-formatted logger for the simulation library and CLI.
"""

import logging
import logging.config
from pythonjsonlogger.jsonlogger import JsonFormatter
import os
from typing import Optional
from src.utils.config_manager import ConfigManager, Settings

LOGGER_NAME = "cvmdi_qkd"
_FALLBACK_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


class CustomJsonFormatter(JsonFormatter):
    """
    JSON formatter that stamps every record with the logger name, so file
    logs from library modules and the CLI can be told apart.
    """

    def add_fields(self, log_record, record, message_dict):
        super(CustomJsonFormatter, self).add_fields(log_record, record, message_dict)
        log_record.setdefault('logger', record.name)


def setup_logging(settings: Optional[Settings] = None):
    """
    Sets up structured logging from the `logging` section of the settings.
    Ensures log directories exist and falls back to basic logging if configuration fails.
    """
    try:
        settings = settings or ConfigManager.get_settings()
    except Exception as e:
        logging.basicConfig(level=logging.INFO, format=_FALLBACK_FORMAT)
        logging.warning(f"Settings unavailable ({e}). Using default console logging.")
        return

    if settings.logging is None:
        logging.basicConfig(level=logging.INFO, format=_FALLBACK_FORMAT)
        logging.warning(
            "No 'logging' section found in settings.yaml. Using default console logging.")
    else:
        log_config = settings.logging.model_dump(by_alias=True, exclude_none=True)
        try:
            # Ensure log directories exist for file-based handlers
            for handler_config in log_config.get("handlers", {}).values():
                if 'filename' in handler_config:
                    log_dir = os.path.dirname(handler_config['filename'])
                    if log_dir and not os.path.exists(log_dir):
                        os.makedirs(log_dir, exist_ok=True)
            logging.config.dictConfig(log_config)
        except Exception as e:
            logging.basicConfig(level=logging.INFO, format=_FALLBACK_FORMAT)
            logging.error(f"Error applying logging configuration: {e}", exc_info=True)

    logging.getLogger(LOGGER_NAME).setLevel(settings.general.log_level)


if __name__ == "__main__":
    setup_logging()
    logger = logging.getLogger(LOGGER_NAME)
    logger.info("Logging configured.", extra={'cutoff': 30, 'kind': 'PAS1'})
    logger.warning("Cutoff grew past its starting value.", extra={'required_cutoff': 60})
