"""
Compiled inner loops of the name index.
"""
import numba
import numpy as np
from numba import jit, prange


@jit(nopython=True)
def dot_row(row, query):
    """
    Cosine of a float32 unit row against a float64 unit query.

    Accumulates sequentially in float64 and clips to [-1, 1]; every scoring
    path goes through this function so equal inputs give equal bits.

    :param row: float32 vector (d,).
    :param query: float64 vector (d,).
    :return: float64
    """
    acc = 0.0
    for i in range(row.shape[0]):
        acc += np.float64(row[i]) * query[i]
    if acc > 1.0:
        return 1.0
    if acc < -1.0:
        return -1.0
    return acc


@jit(nopython=True, parallel=True)
def score_rows(vectors, query):
    """
    Scores of every index row, parallel over rows.

    :param vectors: float32 matrix (M, d).
    :param query: float64 unit vector (d,).
    :return: float64 array (M,)
    """
    n = vectors.shape[0]
    scores = np.empty(n, dtype=np.float64)
    for j in prange(n):
        scores[j] = dot_row(vectors[j], query)
    return scores


@jit(nopython=True)
def best_row_per_owner(order, owners, n_owners, k):
    """
    Walk rows in rank order and keep the first row of each owner.

    :param order: Row indices sorted by descending score, ties by row.
    :param owners: Owner code of every row.
    :param n_owners: Number of distinct owner codes.
    :param k: Owners wanted.
    :return: int64 array of at most k rows
    """
    seen = np.zeros(n_owners, dtype=np.bool_)
    picked = np.empty(min(k, n_owners), dtype=np.int64)
    count = 0
    for j in order:
        if count == picked.shape[0]:
            break
        owner = owners[j]
        if not seen[owner]:
            seen[owner] = True
            picked[count] = j
            count += 1
    return picked[:count]


def set_threads(threads):
    """
    Number of threads used by the parallel kernels; 0 or None keeps the
    default (all available cores).
    """
    if threads:
        numba.set_num_threads(min(int(threads), numba.config.NUMBA_NUM_THREADS))
    return numba.get_num_threads()
