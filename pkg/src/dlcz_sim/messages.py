#!/usr/bin/env python3

############################################################################
#
# MODULE:       lib with message related helper functions for dlcz_sim
#
# AUTHOR(S):    dlcz_sim developers
#
# PURPOSE:      message, verbose, warning and fatal helpers on top of one
#               package logger
#
# COPYRIGHT:	(C) 2026 by the dlcz_sim developers
#
# 		This program is free software under the GNU General Public
# 		License (>=v2). Read the file COPYING that comes with dlcz_sim
# 		for details.
#
#############################################################################

import logging

from .errors import DlczSimError

LOGGER_NAME = "dlcz_sim"
logger = logging.getLogger(LOGGER_NAME)
logger.addHandler(logging.NullHandler())


def set_verbosity(level="INFO"):
    """Attach a stream handler to the package logger and set its level.

    Args:
        level (str|int): logging level, e.g. "DEBUG", "INFO", "WARNING"

    """
    if isinstance(level, str):
        level = level.upper()
    for handler in list(logger.handlers):
        if getattr(handler, "_dlcz_sim", False):
            logger.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(
        logging.Formatter(
            "%(asctime)s [%(levelname)s] %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        ),
    )
    handler._dlcz_sim = True
    logger.addHandler(handler)
    logger.setLevel(level)


def message(msg):
    """Log a progress message."""
    logger.info(msg)


def verbose(msg):
    """Log a detail message, only shown in verbose mode."""
    logger.debug(msg)


def warning(msg):
    """Log a warning."""
    logger.warning(msg)


def fatal(msg, error=DlczSimError):
    """Log an error and abort by raising it.

    Args:
        msg (str): The error message
        error (type): The exception class to raise

    """
    logger.error(msg)
    raise error(msg)
