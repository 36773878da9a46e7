"""Harness package - command-line entry point, config files and console output."""

# pylint: disable=useless-import-alias
from .config import dump_config as dump_config
from .config import load_config as load_config

# pylint: enable=useless-import-alias

__all__ = [
    "dump_config",
    "load_config",
]
