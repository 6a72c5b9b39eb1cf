"""
Exact cosine nearest-neighbour index over every KB name.
"""
import io
import struct

import numpy as np

from reslink.constants import DISK_DTYPE, INDEX_MAGIC
from reslink.util import DataError, get_logger

from .scan import best_row_per_owner, dot_row, score_rows, set_threads

logger = get_logger(__name__)

FINGERPRINT_BYTES = 32


def unit_rows(vectors):
    """L2-normalize the rows of a float64 matrix."""
    vectors = np.asarray(vectors, dtype=np.float64)
    norms = np.sqrt((vectors * vectors).sum(axis=-1, keepdims=True))
    if np.any(norms == 0):
        raise ValueError("Cannot normalize a zero vector")
    return vectors / norms


class NameIndex(object):
    """
    Unit vectors of all entity names with their owning entity ids.

    Immutable after construction.
    """

    def __init__(self, vectors, names, owners, fingerprint=b"\0" * FINGERPRINT_BYTES):
        """
        :param vectors: (M, d) unit vectors, stored as float32.
        :param names: M name strings.
        :param owners: M entity ids.
        :param fingerprint: 32-byte hash of the encoder checkpoint.
        """
        vectors = np.ascontiguousarray(vectors, dtype=np.float32)
        if vectors.ndim != 2:
            raise ValueError("Index vectors must be a matrix, got shape "
                             "{}".format(vectors.shape))
        if not (len(names) == len(owners) == vectors.shape[0]):
            raise ValueError("Index has {} rows but {} names and {} owners".format(
                vectors.shape[0], len(names), len(owners)))
        if len(fingerprint) != FINGERPRINT_BYTES:
            raise ValueError("Encoder fingerprint must be {} bytes".format(
                FINGERPRINT_BYTES))
        vectors.setflags(write=False)
        self.vectors = vectors
        self.names = list(names)
        self.owners = list(owners)
        self.fingerprint = bytes(fingerprint)
        self.entity_ids = list(dict.fromkeys(self.owners))
        codes = {e: i for i, e in enumerate(self.entity_ids)}
        self.owner_codes = np.array([codes[e] for e in self.owners], dtype=np.int64)

    def __len__(self):
        return self.vectors.shape[0]

    @property
    def dim(self):
        return self.vectors.shape[1]

    def __eq__(self, other):
        return (isinstance(other, NameIndex)
                and np.array_equal(self.vectors, other.vectors)
                and self.names == other.names
                and self.owners == other.owners
                and self.fingerprint == other.fingerprint)

    def __ne__(self, other):
        return not self.__eq__(other)

    def __repr__(self):
        return "NameIndex({} names, {} entities, dim {})".format(
            len(self), len(self.entity_ids), self.dim)


def kb_names(kb):
    """Flatten a KB into parallel (names, owners) lists, primary names first."""
    names, owners = [], []
    for record in kb:
        for name in record.names:
            if not name or not name.strip():
                raise DataError("entity {} has an empty name".format(record.entity_id))
            names.append(name)
            owners.append(record.entity_id)
    return names, owners


def build_index(encoder, kb, fingerprint=None, threads=1, batch_size=256, **options):
    """
    Encode every name of the KB and L2-normalize it.

    :param encoder: Trained encoder.
    :param kb: list of EntityRecord.
    :param fingerprint: 32-byte checkpoint hash recorded in the index.
    :param threads: Encoding worker threads.
    :param batch_size: Names per forward pass.
    :param options: Forwarded to the encoder (e.g. a probe transform).
    :return: NameIndex
    """
    if len(kb) == 0:
        raise DataError("cannot index an empty knowledge base")
    names, owners = kb_names(kb)
    raw = encoder.encode_texts(names, batch_size=batch_size, threads=threads,
                               what="KB name", **options)
    index = NameIndex(unit_rows(raw), names, owners,
                      fingerprint or b"\0" * FINGERPRINT_BYTES)
    logger.info("Indexed %d names of %d entities", len(index), len(index.entity_ids))
    return index


def rank(query_vec, index, k, threads=None):
    """
    Ranking stage of `link` for an already encoded query.

    :param query_vec: Raw or unit query vector.
    :param index: NameIndex.
    :param k: Entities wanted.
    :return: list of (entity id, score), best first
    """
    if k < 1:
        raise ValueError("k must be at least 1, got {}".format(k))
    if len(index) == 0:
        raise ValueError("Cannot rank against an empty index")
    if threads:
        set_threads(threads)
    query = unit_rows(np.asarray(query_vec, dtype=np.float64)[np.newaxis])[0]
    scores = score_rows(index.vectors, query)
    # descending score, ties to the lower row
    order = np.lexsort((np.arange(len(scores)), -scores))
    picked = best_row_per_owner(order, index.owner_codes, len(index.entity_ids), k)
    return [(index.owners[j], float(scores[j])) for j in picked]


def link(mention_text, encoder, index, k=1, threads=None, **options):
    """
    Link one mention: encode it, score every name and keep each entity's
    best name.

    :param mention_text: Mention string.
    :param encoder: The encoder the index was built with.
    :param index: NameIndex.
    :param k: Entities returned.
    :return: list of (entity id, score) sorted by descending score
    """
    if not mention_text or not mention_text.strip():
        raise DataError("Cannot link an empty mention")
    return rank(encoder.encode(mention_text, what="mention", **options),
                index, k, threads)


def link_batch(mentions, encoder, index, k=1, threads=None, batch_size=256, **options):
    """
    Link many mentions; output order follows input order.
    """
    for mention in mentions:
        if not mention or not mention.strip():
            raise DataError("Cannot link an empty mention")
    vectors = encoder.encode_texts(mentions, batch_size=batch_size,
                                   threads=threads or 1, what="mention",
                                   **options)
    return [rank(v, index, k, threads) for v in vectors]


def brute_force_scan(query_vec, index, k=1):
    """
    Reference ranking by a plain loop over rows.

    Same contract as the ranking stage of `link`: per-entity best row,
    descending score, ties to the lower row.
    """
    query = unit_rows(np.asarray(query_vec, dtype=np.float64)[np.newaxis])[0]
    best = {}
    for j in range(len(index)):
        score = dot_row(index.vectors[j], query)
        owner = index.owners[j]
        if owner not in best or score > best[owner][0]:
            best[owner] = (score, j)
    ranked = sorted(best.items(), key=lambda item: (-item[1][0], item[1][1]))
    return [(owner, float(score)) for owner, (score, _) in ranked[:k]]


def save_index(index, path):
    """
    Write the NIDX1 file: magic, u32 M, u32 d, float32 matrix, then
    length-prefixed UTF-8 (name, entity id) pairs, then the 32-byte
    encoder fingerprint. Little-endian throughout.
    """
    with io.open(path, "wb") as f:
        f.write(INDEX_MAGIC)
        f.write(struct.pack("<II", len(index), index.dim))
        f.write(index.vectors.astype(DISK_DTYPE).tobytes())
        for name, owner in zip(index.names, index.owners):
            for text in (name, owner):
                payload = text.encode("utf-8")
                f.write(struct.pack("<I", len(payload)))
                f.write(payload)
        f.write(index.fingerprint)


class _Reader(object):
    """Bounds-checked cursor over a binary payload."""

    def __init__(self, payload, path):
        self.payload = payload
        self.path = path
        self.offset = 0

    def take(self, n, what):
        if self.offset + n > len(self.payload):
            raise DataError("truncated file while reading {}".format(what),
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

    def done(self):
        if self.offset != len(self.payload):
            raise DataError("{} trailing bytes".format(len(self.payload) - self.offset),
                            path=self.path)


def load_index(path):
    """Read a NIDX1 file."""
    try:
        with io.open(path, "rb") as f:
            payload = f.read()
    except OSError as e:
        raise DataError("cannot read index: {}".format(e), path=path)
    reader = _Reader(payload, path)
    if reader.take(len(INDEX_MAGIC), "magic") != INDEX_MAGIC:
        raise DataError("not a name index (bad magic)", path=path)
    rows, dim = reader.unpack("<II", "header")
    matrix = np.frombuffer(reader.take(rows * dim * DISK_DTYPE.itemsize, "vectors"),
                           dtype=DISK_DTYPE).reshape(rows, dim)
    names, owners = [], []
    for _ in range(rows):
        names.append(reader.text("name"))
        owners.append(reader.text("entity id"))
    fingerprint = reader.take(FINGERPRINT_BYTES, "fingerprint")
    reader.done()
    return NameIndex(matrix.astype(np.float32), names, owners, fingerprint)
