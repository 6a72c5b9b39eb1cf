"""
Synthetic entity-linking corpus for desk-scale runs.

Entity names are pronounceable syllable strings; mentions are copies of a
name with one or two character edits (swap, drop, duplicate, suffix), the
kind of surface variety real mentions show.
"""
import os

from reslink.constants import CONTINUATION_PREFIX, SPECIAL_TOKENS
from reslink.tokenizer import Vocab, save_vocab
from reslink.util import get_logger, make_rng

from .kb import Dataset, EntityRecord, save_dataset, save_kb

logger = get_logger(__name__)

CONSONANTS = "bcdfgklmnprstvz"
VOWELS = "aeiou"
SYLLABLES = [c + v for c in CONSONANTS for v in VOWELS]
LETTERS = "abcdefghijklmnopqrstuvwxyz"
SUFFIXES = ("s", "a", "in", "ol", "ine")
EDIT_KINDS = ("swap", "drop", "duplicate", "suffix")


def synthetic_vocab():
    """WordPiece vocabulary covering every string the generator emits."""
    tokens = list(SPECIAL_TOKENS)
    tokens += SYLLABLES
    tokens += [CONTINUATION_PREFIX + s for s in SYLLABLES]
    tokens += list(LETTERS)
    tokens += [CONTINUATION_PREFIX + c for c in LETTERS]
    tokens += ["-"]
    return Vocab(tokens)


def random_word(rng):
    return "".join(SYLLABLES[i] for i in rng.integers(0, len(SYLLABLES),
                                                      size=rng.integers(2, 4)))


def random_name(rng):
    """One to three words of two or three syllables."""
    return " ".join(random_word(rng) for _ in range(int(rng.integers(1, 4))))


def edit_once(name, rng):
    """Apply one random character edit; spaces are never touched."""
    kind = EDIT_KINDS[int(rng.integers(0, len(EDIT_KINDS)))]
    if kind == "suffix":
        return name + SUFFIXES[int(rng.integers(0, len(SUFFIXES)))]
    letters = [i for i, c in enumerate(name) if c != " "]
    if kind == "swap":
        pairs = [i for i in letters if i + 1 < len(name) and name[i + 1] != " "]
        if not pairs:
            return name + SUFFIXES[0]
        i = pairs[int(rng.integers(0, len(pairs)))]
        return name[:i] + name[i + 1] + name[i] + name[i + 2:]
    i = letters[int(rng.integers(0, len(letters)))]
    if kind == "drop":
        # keep every word nonempty
        left = name[i - 1] if i > 0 else " "
        right = name[i + 1] if i + 1 < len(name) else " "
        if left == " " and right == " ":
            return name + name[i]
        return name[:i] + name[i + 1:]
    return name[:i] + name[i] + name[i:]


def make_variant(name, rng):
    """One or two edits, uniform over edit kinds."""
    for _ in range(int(rng.integers(1, 3))):
        name = edit_once(name, rng)
    return name


def _fresh_variant(name, used, rng, attempts=50):
    for _ in range(attempts):
        variant = make_variant(name, rng)
        if variant not in used:
            used.add(variant)
            return variant
    # edits exhausted: extend with suffixes until new
    variant = name
    while variant in used:
        variant = variant + SUFFIXES[int(rng.integers(0, len(SUFFIXES)))]
    used.add(variant)
    return variant


def generate_synthetic_corpus(n_entities, variants_per_entity, seed=0):
    """
    Build a KB and disjoint train/dev/test mention sets.

    Each entity gets a primary name and one alternative name (an edited
    copy). Training holds `variants_per_entity` edited mentions per entity,
    dev and test one each; no mention string is shared between splits or
    with a KB name.

    :param n_entities: At least 2.
    :param variants_per_entity: Training mentions per entity, at least 1.
    :param seed: Generator seed.
    :return: (kb, train, dev, test)
    """
    if n_entities < 2:
        raise ValueError("A synthetic corpus needs at least 2 entities")
    if variants_per_entity < 1:
        raise ValueError("variants_per_entity must be at least 1")
    rng = make_rng(seed)
    used = set()
    primaries = []
    while len(primaries) < n_entities:
        name = random_name(rng)
        if name not in used:
            used.add(name)
            primaries.append(name)
    width = max(4, len(str(n_entities - 1)))
    kb, train, dev, test = [], [], [], []
    for i, primary in enumerate(primaries):
        entity_id = "SYN{:0{}d}".format(i, width)
        kb.append(EntityRecord(entity_id, primary, [_fresh_variant(primary, used, rng)]))
    for record in kb:
        for _ in range(variants_per_entity):
            train.append((_fresh_variant(record.primary, used, rng), record.entity_id))
        dev.append((_fresh_variant(record.primary, used, rng), record.entity_id))
        test.append((_fresh_variant(record.primary, used, rng), record.entity_id))
    logger.info("Synthetic corpus: %d entities, %d/%d/%d train/dev/test mentions",
                len(kb), len(train), len(dev), len(test))
    return (kb, Dataset(train, "train", source="<synthetic train>"),
            Dataset(dev, "dev", source="<synthetic dev>"),
            Dataset(test, "test", source="<synthetic test>"))


def write_synthetic_corpus(out_dir, n_entities, variants_per_entity, seed=0):
    """
    Write kb.tsv, train.tsv, dev.tsv, test.tsv and vocab.txt.

    :return: dict of the written paths
    """
    if not os.path.isdir(out_dir):
        os.makedirs(out_dir)
    kb, train, dev, test = generate_synthetic_corpus(n_entities, variants_per_entity, seed)
    paths = {name: os.path.join(out_dir, name + ".tsv")
             for name in ("kb", "train", "dev", "test")}
    paths["vocab"] = os.path.join(out_dir, "vocab.txt")
    save_kb(kb, paths["kb"])
    for name, dataset in (("train", train), ("dev", dev), ("test", test)):
        save_dataset(dataset, paths[name])
    save_vocab(synthetic_vocab(), paths["vocab"])
    return paths
