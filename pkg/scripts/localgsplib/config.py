import logging
import os

LOG_LEVEL_ENV = "LOCALGSP_LOG_LEVEL"
WORKERS_ENV = "LOCALGSP_WORKERS"
AUT_CAP_ENV = "LOCALGSP_AUT_CAP"
AUT_MAX_ORDER_ENV = "LOCALGSP_AUT_MAX_ORDER"
SEED_ENV = "LOCALGSP_SEED"

DEFAULT_AUT_CAP = 16
DEFAULT_AUT_MAX_ORDER = 100000


def get_workers() -> int:
    return max(1, int(os.getenv(WORKERS_ENV, "1")))


def get_aut_cap() -> int:
    return int(os.getenv(AUT_CAP_ENV, str(DEFAULT_AUT_CAP)))


def get_aut_max_order() -> int:
    return int(os.getenv(AUT_MAX_ORDER_ENV, str(DEFAULT_AUT_MAX_ORDER)))


def get_default_seed() -> int:
    return int(os.getenv(SEED_ENV, "0"))


def configure_logging(verbose: bool = False):
    # Level should be one of https://docs.python.org/3/library/logging.html#logging-levels
    default_level = "INFO" if verbose else "WARNING"
    logging.basicConfig(level=os.getenv(LOG_LEVEL_ENV, default_level))
    if verbose:
        logging.getLogger("localgsp").setLevel(logging.INFO)
