#!/usr/bin/env python3
"""
Entry point script for the hiring simulator, with logging from logging.conf.
"""

import logging.config
import sys

from hiring_simulator.main import main

if __name__ == "__main__":
    logging.config.fileConfig("logging.conf", disable_existing_loggers=False)
    sys.exit(main())
