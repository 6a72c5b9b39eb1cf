"""
EMB1 wordpiece embedding tables: magic "EMB1", u32 V, u32 d, then V*d
little-endian float32 values, row-major.
"""
import io
import struct

import numpy as np

from reslink.constants import DISK_DTYPE, EMBEDDING_MAGIC
from reslink.util import DataError, get_logger

logger = get_logger(__name__)


def load_embeddings(path, vocab_size=None):
    """
    :param path: EMB1 file.
    :param vocab_size: When given, the row count must match it.
    :return: float64 array (V, d)
    """
    try:
        with io.open(path, "rb") as f:
            payload = f.read()
    except OSError as e:
        raise DataError("cannot read embeddings: {}".format(e), path=path)
    header = len(EMBEDDING_MAGIC) + 8
    if len(payload) < header:
        raise DataError("truncated embedding header", path=path)
    if payload[:len(EMBEDDING_MAGIC)] != EMBEDDING_MAGIC:
        raise DataError("not an EMB1 embedding file (bad magic)", path=path)
    rows, dim = struct.unpack("<II", payload[len(EMBEDDING_MAGIC):header])
    expected = header + rows * dim * DISK_DTYPE.itemsize
    if len(payload) != expected:
        raise DataError("expected {} bytes for a {}x{} table, found {}".format(
            expected, rows, dim, len(payload)), path=path)
    if vocab_size is not None and rows != vocab_size:
        raise DataError("table has {} rows but the vocabulary has {} "
                        "tokens".format(rows, vocab_size), path=path)
    table = np.frombuffer(payload, dtype=DISK_DTYPE, offset=header).reshape(rows, dim)
    if not np.all(np.isfinite(table)):
        raise DataError("non-finite values in the embedding table", path=path)
    logger.info("Loaded %dx%d embedding table from %s", rows, dim, path)
    return table.astype(np.float64)


def save_embeddings(table, path):
    """Write a (V, d) table as EMB1."""
    table = np.asarray(table)
    if table.ndim != 2:
        raise ValueError("Embedding table must be a matrix, got shape {}".format(
            table.shape))
    with io.open(path, "wb") as f:
        f.write(EMBEDDING_MAGIC)
        f.write(struct.pack("<II", table.shape[0], table.shape[1]))
        f.write(np.ascontiguousarray(table, dtype=DISK_DTYPE).tobytes())
