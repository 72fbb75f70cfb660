import os

from dotenv import dotenv_values, load_dotenv
from loguru import logger

from expconcavify.errors import ConfigurationError

load_dotenv()

DEFAULT_LOG_LEVEL = "SUCCESS"
DEFAULT_LOG_FILE = "data/expconcavify.log"
DEFAULT_OUTPUT_DIR = "data/output"


def log_level():
    return os.getenv("EXPCONCAVIFY_LOG_LEVEL", DEFAULT_LOG_LEVEL)


def log_file():
    return os.getenv("EXPCONCAVIFY_LOG_FILE", DEFAULT_LOG_FILE)


def output_dir():
    return os.getenv("EXPCONCAVIFY_OUTPUT_DIR", DEFAULT_OUTPUT_DIR)


def master_seed():
    raw = os.getenv("EXPCONCAVIFY_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        logger.critical(f"EXPCONCAVIFY_SEED must be an integer, got '{raw}'")
        raise ConfigurationError(f"EXPCONCAVIFY_SEED is not an integer: {raw}")


def max_workers():
    raw = os.getenv("EXPCONCAVIFY_WORKERS", "4")
    try:
        return max(1, int(raw))
    except ValueError:
        logger.critical(f"EXPCONCAVIFY_WORKERS must be an integer, got '{raw}'")
        raise ConfigurationError(f"EXPCONCAVIFY_WORKERS is not an integer: {raw}")


def read_config_file(path):
    """Flat key=value file whose keys mirror the CLI long flags.

    Dashes and underscores are interchangeable in keys; empty values are dropped.
    """
    if not os.path.exists(path):
        logger.critical(f"Config file {path} does not exist")
        raise ConfigurationError(f"config file not found: {path}")
    values = dotenv_values(path)
    return {
        key.strip().lstrip("-").replace("-", "_"): value
        for key, value in values.items()
        if value not in (None, "")
    }
