"""
RCNN1 checkpoints.

Layout, little-endian: magic "RCNN1", u16 version, u8 model kind, u32 length
+ UTF-8 config text, u32 tensor count, then per tensor u32 length + UTF-8
name, u8 rank, u32 per dimension and the float32 payload.
"""
import io
import struct
from collections import OrderedDict

import numpy as np

from reslink.config import RunConfig, parse_config_text
from reslink.constants import (CHECKPOINT_MAGIC, CHECKPOINT_VERSION, DISK_DTYPE,
                               MODEL_KINDS)
from reslink.encoder import build_encoder
from reslink.util import DataError, ReslinkError, file_fingerprint, get_logger

logger = get_logger(__name__)

_KIND_NAMES = {code: name for name, code in MODEL_KINDS.items()}


class Checkpoint(object):
    """
    :ivar kind: "rescnn" or "transformer".
    :ivar config_text: Canonical `key = value` text of the run config.
    :ivar tensors: OrderedDict name -> float32 array.
    :ivar version: Format version.
    :ivar fingerprint: SHA-256 of the file it was read from, if any.
    """

    def __init__(self, kind, config_text, tensors, version=CHECKPOINT_VERSION,
                 fingerprint=None):
        if kind not in MODEL_KINDS:
            raise DataError("unknown model kind {!r}".format(kind))
        self.kind = kind
        self.config_text = config_text
        self.tensors = OrderedDict(
            (name, np.asarray(array, dtype=DISK_DTYPE)) for name, array in tensors.items())
        self.version = version
        self.fingerprint = fingerprint

    @property
    def config_values(self):
        return parse_config_text(self.config_text, source="<checkpoint config>")

    def __eq__(self, other):
        return (isinstance(other, Checkpoint)
                and self.kind == other.kind
                and self.config_text == other.config_text
                and list(self.tensors) == list(other.tensors)
                and all(np.array_equal(a, other.tensors[n])
                        for n, a in self.tensors.items()))

    def __ne__(self, other):
        return not self.__eq__(other)

    def __repr__(self):
        return "Checkpoint({}, {} tensors)".format(self.kind, len(self.tensors))


def checkpoint_from_encoder(encoder, config_text):
    return Checkpoint(encoder.kind, config_text, encoder.state())


def save_checkpoint(path, checkpoint):
    """
    :param path: Output file.
    :param checkpoint: Checkpoint.
    :return: 32-byte fingerprint of the written file
    """
    def text(value):
        payload = value.encode("utf-8")
        return struct.pack("<I", len(payload)) + payload

    with io.open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<HB", checkpoint.version, MODEL_KINDS[checkpoint.kind]))
        f.write(text(checkpoint.config_text))
        f.write(struct.pack("<I", len(checkpoint.tensors)))
        for name, array in checkpoint.tensors.items():
            f.write(text(name))
            f.write(struct.pack("<B", array.ndim))
            f.write(struct.pack("<{}I".format(array.ndim), *array.shape))
            f.write(np.ascontiguousarray(array, dtype=DISK_DTYPE).tobytes())
    fingerprint = file_fingerprint(path)
    logger.info("Wrote %s checkpoint %s (%s)", checkpoint.kind, path, fingerprint.hex())
    return fingerprint


class _Cursor(object):

    def __init__(self, payload, path):
        self.payload = payload
        self.path = path
        self.offset = 0

    def take(self, n, what):
        if self.offset + n > len(self.payload):
            raise DataError("truncated checkpoint while reading {}".format(what),
                            path=self.path)
        chunk = self.payload[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def text(self, what):
        (length,) = self.unpack("<I", what)
        try:
            return self.take(length, what).decode("utf-8")
        except UnicodeDecodeError as e:
            raise DataError("bad UTF-8 in {}: {}".format(what, e), path=self.path)


def load_checkpoint(path, model=None):
    """
    :param path: RCNN1 file.
    :param model: Expected model kind; a different kind is rejected.
    :return: Checkpoint
    """
    try:
        with io.open(path, "rb") as f:
            payload = f.read()
    except OSError as e:
        raise DataError("cannot read checkpoint: {}".format(e), path=path)
    cursor = _Cursor(payload, path)
    if cursor.take(len(CHECKPOINT_MAGIC), "magic") != CHECKPOINT_MAGIC:
        raise DataError("not a checkpoint (bad magic)", path=path)
    version, code = cursor.unpack("<HB", "header")
    if version != CHECKPOINT_VERSION:
        raise DataError("checkpoint version {} is not supported (expected "
                        "{})".format(version, CHECKPOINT_VERSION), path=path)
    if code not in _KIND_NAMES:
        raise DataError("unknown model kind code {}".format(code), path=path)
    kind = _KIND_NAMES[code]
    if model is not None and model != kind:
        raise DataError("checkpoint holds a {} model, not a {} model".format(
            kind, model), path=path)
    config_text = cursor.text("config")
    (count,) = cursor.unpack("<I", "tensor count")
    tensors = OrderedDict()
    for _ in range(count):
        name = cursor.text("tensor name")
        if name in tensors:
            raise DataError("tensor {} stored twice".format(name), path=path)
        (rank,) = cursor.unpack("<B", "rank of " + name)
        shape = cursor.unpack("<{}I".format(rank), "shape of " + name)
        size = int(np.prod(shape)) * DISK_DTYPE.itemsize
        tensors[name] = np.frombuffer(cursor.take(size, name),
                                      dtype=DISK_DTYPE).reshape(shape).copy()
    if cursor.offset != len(payload):
        raise DataError("{} trailing bytes".format(len(payload) - cursor.offset),
                        path=path)
    return Checkpoint(kind, config_text, tensors, version, file_fingerprint(path))


def restore_encoder(checkpoint, vocab):
    """
    Rebuild the encoder a checkpoint was written from.

    :param checkpoint: Checkpoint.
    :param vocab: Vocab of the run; its size must match the stored table.
    :return: Encoder with the stored parameters
    """
    run = RunConfig(checkpoint.config_values)
    config = run.section(checkpoint.kind)
    table = checkpoint.tensors.get("embeddings")
    if table is not None and table.shape[0] != len(vocab):
        raise DataError("checkpoint embeddings have {} rows but the vocabulary "
                        "has {} tokens".format(table.shape[0], len(vocab)))
    try:
        encoder = build_encoder(checkpoint.kind, config, vocab, seed=0,
                                lowercase=run.run.lowercase)
        encoder.load_state(checkpoint.tensors)
    except ValueError as e:
        if isinstance(e, ReslinkError):
            raise
        raise DataError("checkpoint does not fit its config: {}".format(e))
    return encoder
