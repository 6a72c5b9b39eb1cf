import hashlib
import logging
import sys

import numpy as np


class ReslinkError(Exception):
    """Base class of every error raised on purpose by reslink."""


class ConfigError(ReslinkError, ValueError):
    """Bad configuration key or value, or an unsupported option combination."""


class DataError(ReslinkError, ValueError):
    """Unreadable or malformed input data."""

    def __init__(self, message, path=None, line=None):
        if path is not None and line is not None:
            message = "{}:{}: {}".format(path, line, message)
        elif path is not None:
            message = "{}: {}".format(path, message)
        super(DataError, self).__init__(message)
        self.path = path
        self.line = line


class InvariantError(ReslinkError, RuntimeError):
    """An internal invariant was violated."""


_LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"


def get_logger(name):
    """
    Return a logger below the package root logger.

    The root `reslink` logger writes to stderr; it is configured the first
    time any module asks for a logger.

    :param name: Usually `__name__` of the calling module.
    :return: logging.Logger
    """
    root = logging.getLogger("reslink")
    if not root.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(_LOG_FORMAT))
        root.addHandler(handler)
        root.setLevel(logging.INFO)
        root.propagate = False
    return logging.getLogger(name)


def set_verbosity(level):
    """
    Set the level of the package root logger.

    :param level: A logging level or its name ("DEBUG", "INFO", ...).
    """
    get_logger("reslink").setLevel(level)


def file_fingerprint(path):
    """
    32-byte SHA-256 digest of a file, read in chunks.

    :param path: File to hash.
    :return: bytes of length 32
    """
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.digest()


def text_hash(text):
    """Hex SHA-256 of a UTF-8 string, used for config hashes in logs."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def make_rng(seed):
    """
    Seeded numpy Generator. Every random draw in the package goes through one.

    :param seed: Integer seed or an existing Generator.
    :return: np.random.Generator
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
