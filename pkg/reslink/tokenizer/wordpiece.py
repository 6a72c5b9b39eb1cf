import unicodedata

import numpy as np

from reslink.constants import CONTINUATION_PREFIX, DEFAULT_MAX_LEN, MAX_CHARS_PER_WORD


def _is_whitespace(char):
    if char in (" ", "\t", "\n", "\r"):
        return True
    return unicodedata.category(char) == "Zs"


def _is_control(char):
    if char in ("\t", "\n", "\r"):
        return False
    return unicodedata.category(char).startswith("C")


def _is_punctuation(char):
    cp = ord(char)
    # All non-letter/number ASCII counts as punctuation, as in BERT.
    if 33 <= cp <= 47 or 58 <= cp <= 64 or 91 <= cp <= 96 or 123 <= cp <= 126:
        return True
    return unicodedata.category(char).startswith("P")


def clean_text(text, lowercase=True):
    """
    Basic cleanup: drop control characters, map whitespace to spaces,
    optionally lowercase. Accents are kept.
    """
    out = []
    for char in text:
        if char == "\x00" or char == "\ufffd" or _is_control(char):
            continue
        out.append(" " if _is_whitespace(char) else char)
    cleaned = "".join(out)
    return cleaned.lower() if lowercase else cleaned


def basic_split(text, lowercase=True):
    """
    Split cleaned text on whitespace, then isolate punctuation characters.

    :return: list of words
    """
    words = []
    for chunk in clean_text(text, lowercase).split():
        current = []
        for char in chunk:
            if _is_punctuation(char):
                if current:
                    words.append("".join(current))
                    current = []
                words.append(char)
            else:
                current.append(char)
        if current:
            words.append("".join(current))
    return words


def wordpiece_split(word, vocab):
    """
    Greedy longest-match-first segmentation of one word.

    :return: list of wordpiece strings, or None when some suffix cannot be
        matched (the caller maps the whole word to [UNK]).
    """
    if len(word) > MAX_CHARS_PER_WORD:
        return None
    pieces = []
    start = 0
    while start < len(word):
        end = len(word)
        match = None
        while start < end:
            piece = word[start:end]
            if start > 0:
                piece = CONTINUATION_PREFIX + piece
            if piece in vocab:
                match = piece
                break
            end -= 1
        if match is None:
            return None
        pieces.append(match)
        start = end
    return pieces


class TokenSequence(object):
    """
    Wordpiece ids of one text, with [CLS]/[SEP] markers when `has_specials`.
    """

    def __init__(self, ids, has_specials=True):
        self.ids = np.asarray(ids, dtype=np.int64)
        self.has_specials = has_specials

    @property
    def length(self):
        return int(self.ids.size)

    def __len__(self):
        return self.length

    def __eq__(self, other):
        return (isinstance(other, TokenSequence)
                and self.has_specials == other.has_specials
                and np.array_equal(self.ids, other.ids))

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        return hash((self.has_specials, self.ids.tobytes()))

    def content_ids(self):
        """Ids between the special markers."""
        if self.has_specials:
            return self.ids[1:-1]
        return self.ids

    def with_content(self, content):
        """Same specials around new content ids."""
        content = np.asarray(content, dtype=np.int64)
        if self.has_specials:
            content = np.concatenate([self.ids[:1], content, self.ids[-1:]])
        return TokenSequence(content, self.has_specials)

    def __repr__(self):
        return "TokenSequence({})".format(self.ids.tolist())


def tokenize(text, vocab, max_len=DEFAULT_MAX_LEN, lowercase=True):
    """
    BERT-style WordPiece tokenization.

    Words without a full segmentation become [UNK]. The result is framed by
    [CLS] ... [SEP] and truncated to max_len by dropping tail wordpieces.

    :param text: Input string.
    :param vocab: Vocab.
    :param max_len: Maximum length including the two special tokens.
    :param lowercase: Lowercase before matching.
    :return: TokenSequence
    """
    if max_len < 2:
        raise ValueError("max_len must leave room for [CLS] and [SEP], "
                         "got {}".format(max_len))
    ids = [vocab.cls_id]
    budget = max_len - 2
    for word in basic_split(text, lowercase):
        pieces = wordpiece_split(word, vocab)
        if pieces is None:
            ids.append(vocab.unk_id)
        else:
            ids.extend(vocab.id_of(p) for p in pieces)
        if len(ids) - 1 >= budget:
            break
    ids = ids[:budget + 1]
    ids.append(vocab.sep_id)
    return TokenSequence(ids, has_specials=True)


def detokenize(sequence, vocab):
    """Rejoin wordpieces of the content ids, removing continuation markers."""
    words = []
    for index in sequence.content_ids():
        token = vocab.token_of(int(index))
        if token.startswith(CONTINUATION_PREFIX) and words:
            words[-1] += token[len(CONTINUATION_PREFIX):]
        else:
            words.append(token)
    return " ".join(words)


class WordPieceTokenizer(object):
    """Bundles a vocabulary with the tokenization options of a model."""

    def __init__(self, vocab, max_len=DEFAULT_MAX_LEN, lowercase=True):
        self.vocab = vocab
        self.max_len = max_len
        self.lowercase = lowercase

    def __call__(self, text):
        return tokenize(text, self.vocab, self.max_len, self.lowercase)

    def batch(self, texts):
        return [self(text) for text in texts]


def pad_batch(sequences, pad_id):
    """
    Stack token sequences into a padded id matrix.

    :param sequences: list of TokenSequence.
    :param pad_id: Id written into padding slots.
    :return: (ids (B, L), valid (B, L) non-pad mask, content (B, L) mask of
        positions that are neither special nor padding)
    """
    width = max(seq.length for seq in sequences)
    ids = np.full((len(sequences), width), pad_id, dtype=np.int64)
    valid = np.zeros((len(sequences), width), dtype=bool)
    content = np.zeros((len(sequences), width), dtype=bool)
    for row, seq in enumerate(sequences):
        ids[row, :seq.length] = seq.ids
        valid[row, :seq.length] = True
        if seq.has_specials:
            content[row, 1:seq.length - 1] = True
        else:
            content[row, :seq.length] = True
    return ids, valid, content
