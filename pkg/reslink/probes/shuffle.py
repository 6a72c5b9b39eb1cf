import numpy as np

from reslink.util import ConfigError, make_rng


def fisher_yates(n, rng):
    """Uniform random permutation of range(n)."""
    perm = list(range(n))
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def shuffle_ngrams(tokens, n, rng):
    """
    Permute contiguous n-grams of a token list.

    Tokens are cut left to right into chunks of n (the last chunk may be
    shorter); the chunk order is permuted uniformly, chunk contents are kept.

    :param tokens: Content token ids, specials excluded.
    :param n: Chunk size, at least 1.
    :param rng: Seed or np.random.Generator.
    :return: int64 array, a permutation of tokens
    """
    if n < 1:
        raise ConfigError("n-gram size must be at least 1, got {}".format(n))
    tokens = np.asarray(tokens, dtype=np.int64)
    chunks = [tokens[i:i + n] for i in range(0, len(tokens), n)]
    if len(chunks) < 2:
        return tokens.copy()
    order = fisher_yates(len(chunks), make_rng(rng))
    return np.concatenate([chunks[i] for i in order])


def shuffle_sequence(sequence, n, rng):
    """Shuffle the content of a TokenSequence; specials stay in place."""
    return sequence.with_content(shuffle_ngrams(sequence.content_ids(), n, rng))


class ShuffleTransform(object):
    """
    Callable applying `shuffle_sequence` with one seeded generator, so a run
    over a fixed list of inputs is reproducible.
    """

    def __init__(self, n, seed):
        if n < 1:
            raise ConfigError("n-gram size must be at least 1, got {}".format(n))
        self.n = n
        self.rng = make_rng(seed)

    def __call__(self, sequence):
        return shuffle_sequence(sequence, self.n, self.rng)
