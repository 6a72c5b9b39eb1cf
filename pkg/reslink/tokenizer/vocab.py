import io

from reslink.constants import CLS_TOKEN, PAD_TOKEN, SEP_TOKEN, SPECIAL_TOKENS, UNK_TOKEN
from reslink.util import DataError, text_hash


class Vocab(object):
    """
    Immutable WordPiece vocabulary. Token ids are the zero-based line numbers
    of the vocabulary file.
    """

    def __init__(self, tokens):
        """
        :param tokens: Ordered token strings; id = position.
        """
        self._tokens = tuple(tokens)
        self._ids = {}
        for index, token in enumerate(self._tokens):
            if token in self._ids:
                raise DataError("duplicate token {!r}".format(token))
            self._ids[token] = index
        missing = [t for t in SPECIAL_TOKENS if t not in self._ids]
        if missing:
            raise DataError("vocabulary lacks special tokens {}".format(
                ", ".join(missing)))
        self.cls_id = self._ids[CLS_TOKEN]
        self.sep_id = self._ids[SEP_TOKEN]
        self.unk_id = self._ids[UNK_TOKEN]
        self.pad_id = self._ids[PAD_TOKEN]

    def __len__(self):
        return len(self._tokens)

    def __contains__(self, token):
        return token in self._ids

    @property
    def tokens(self):
        return self._tokens

    @property
    def special_ids(self):
        return frozenset((self.cls_id, self.sep_id, self.pad_id))

    def id_of(self, token):
        return self._ids.get(token, self.unk_id)

    def token_of(self, index):
        return self._tokens[index]

    def fingerprint(self):
        """Hex SHA-256 of the vocabulary file contents."""
        return text_hash("".join(t + "\n" for t in self._tokens))


def load_vocab(path):
    """
    Read a BERT vocabulary file: UTF-8, one token per line.

    :param path: vocab.txt
    :return: Vocab
    """
    try:
        with io.open(path, "r", encoding="utf-8", newline="") as f:
            content = f.read()
    except (OSError, UnicodeDecodeError) as e:
        raise DataError("cannot read vocabulary: {}".format(e), path=path)

    lines = content.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    tokens = []
    seen = {}
    for number, line in enumerate(lines, 1):
        token = line.rstrip("\r")
        if not token:
            raise DataError("empty token", path=path, line=number)
        if token in seen:
            raise DataError("duplicate token {!r} (first on line {})".format(
                token, seen[token]), path=path, line=number)
        seen[token] = number
        tokens.append(token)
    try:
        return Vocab(tokens)
    except DataError as e:
        raise DataError(str(e), path=path)


def save_vocab(vocab, path):
    """Write a vocabulary file, LF-terminated."""
    tokens = vocab.tokens if isinstance(vocab, Vocab) else list(vocab)
    with io.open(path, "w", encoding="utf-8", newline="\n") as f:
        for token in tokens:
            f.write(token + "\n")
