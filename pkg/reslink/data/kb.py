"""
Knowledge base and mention datasets as tab-separated text.

kb.tsv:       entity_id <TAB> name <TAB> P|A   (P primary, A alternative)
dataset.tsv:  mention_text <TAB> gold_entity_id
"""
import io
from collections import OrderedDict

from reslink.util import DataError, get_logger

logger = get_logger(__name__)

SPLITS = ("train", "dev", "test")


class EntityRecord(object):
    """
    One KB entity: id, primary name and alternative names.
    """

    def __init__(self, entity_id, primary, alternatives=()):
        if not entity_id:
            raise DataError("entity id must be nonempty")
        if not primary or not primary.strip():
            raise DataError("entity {} has an empty primary name".format(entity_id))
        self.entity_id = entity_id
        self.primary = primary
        self.alternatives = list(alternatives)

    @property
    def names(self):
        """Primary name first, then alternatives in file order."""
        return [self.primary] + self.alternatives

    def __eq__(self, other):
        return (isinstance(other, EntityRecord)
                and self.entity_id == other.entity_id
                and self.primary == other.primary
                and self.alternatives == other.alternatives)

    def __ne__(self, other):
        return not self.__eq__(other)

    def __repr__(self):
        return "EntityRecord({!r}, {!r}, {!r})".format(
            self.entity_id, self.primary, self.alternatives)


def _read_lines(path, what):
    try:
        with io.open(path, "r", encoding="utf-8", newline="") as f:
            content = f.read()
    except (OSError, UnicodeDecodeError) as e:
        raise DataError("cannot read {}: {}".format(what, e), path=path)
    lines = content.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return [line.rstrip("\r") for line in lines]


def load_kb(path):
    """
    Read kb.tsv, grouping rows by entity id.

    Every entity needs exactly one primary row. Entity order follows the
    first row of each id.

    :param path: kb.tsv
    :return: list of EntityRecord
    """
    primaries = OrderedDict()
    alternatives = OrderedDict()
    first_line = {}
    for number, line in enumerate(_read_lines(path, "knowledge base"), 1):
        fields = line.split("\t")
        if len(fields) != 3:
            raise DataError("expected 3 tab-separated fields, got {}".format(
                len(fields)), path=path, line=number)
        entity_id, name, flag = (f.strip() for f in fields)
        if not entity_id:
            raise DataError("empty entity id", path=path, line=number)
        if not name:
            raise DataError("empty name for entity {}".format(entity_id),
                            path=path, line=number)
        if flag not in ("P", "A"):
            raise DataError("name flag must be P or A, got {!r}".format(flag),
                            path=path, line=number)
        first_line.setdefault(entity_id, number)
        alternatives.setdefault(entity_id, [])
        if flag == "P":
            if entity_id in primaries:
                raise DataError("entity {} has more than one primary name".format(
                    entity_id), path=path, line=number)
            primaries[entity_id] = name
        else:
            alternatives[entity_id].append(name)
    if not alternatives:
        raise DataError("knowledge base is empty", path=path)
    records = []
    for entity_id, alts in alternatives.items():
        if entity_id not in primaries:
            raise DataError("entity {} has no primary name".format(entity_id),
                            path=path, line=first_line[entity_id])
        records.append(EntityRecord(entity_id, primaries[entity_id], alts))
    logger.info("Loaded %d entities (%d names) from %s", len(records),
                sum(len(r.names) for r in records), path)
    return records


def save_kb(records, path):
    with io.open(path, "w", encoding="utf-8", newline="\n") as f:
        for record in records:
            f.write("{}\t{}\tP\n".format(record.entity_id, record.primary))
            for name in record.alternatives:
                f.write("{}\t{}\tA\n".format(record.entity_id, name))


def kb_lookup(records):
    """Map entity id -> EntityRecord, rejecting duplicate ids."""
    lookup = OrderedDict()
    for record in records:
        if record.entity_id in lookup:
            raise DataError("duplicate entity id {}".format(record.entity_id))
        lookup[record.entity_id] = record
    return lookup


class Dataset(object):
    """
    Mention rows (mention text, gold entity id) of one split.
    """

    def __init__(self, rows, split="test", source=None, lines=None):
        """
        :param rows: List of (mention, gold_id).
        :param split: "train", "dev" or "test".
        :param source: File the rows came from, for error messages.
        :param lines: 1-based line number of each row.
        """
        if split not in SPLITS:
            raise DataError("unknown split {!r}".format(split))
        self.rows = [(m, g) for m, g in rows]
        self.split = split
        self.source = source
        self.lines = list(lines) if lines is not None else list(range(1, len(self.rows) + 1))

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    @property
    def mentions(self):
        return [m for m, _ in self.rows]

    @property
    def gold(self):
        return [g for _, g in self.rows]

    def check_against(self, records):
        """
        Reject the dataset if any gold id is missing from the KB.

        :param records: list of EntityRecord or an id lookup.
        """
        known = records if isinstance(records, dict) else kb_lookup(records)
        for (mention, gold), number in zip(self.rows, self.lines):
            if gold not in known:
                raise DataError("unknown gold entity id {} for mention {!r}".format(
                    gold, mention), path=self.source, line=number)

    @classmethod
    def concat(cls, datasets, split="train"):
        """Join several datasets, e.g. train and dev for a final run."""
        rows, lines = [], []
        for dataset in datasets:
            rows.extend(dataset.rows)
            lines.extend(dataset.lines)
        sources = [d.source for d in datasets if d.source]
        return cls(rows, split=split, source="+".join(sources) or None, lines=lines)


def load_dataset(path, split="test", kb=None):
    """
    Read dataset.tsv.

    :param path: dataset.tsv
    :param split: Split label.
    :param kb: Optional list of EntityRecord; when given, every gold id must
        resolve.
    :return: Dataset
    """
    rows, lines = [], []
    for number, line in enumerate(_read_lines(path, "dataset"), 1):
        fields = line.split("\t")
        if len(fields) != 2:
            raise DataError("expected 2 tab-separated fields, got {}".format(
                len(fields)), path=path, line=number)
        mention, gold = fields[0].strip(), fields[1].strip()
        if not mention:
            raise DataError("empty mention", path=path, line=number)
        if not gold:
            raise DataError("empty gold entity id", path=path, line=number)
        rows.append((mention, gold))
        lines.append(number)
    if not rows:
        raise DataError("dataset has no rows", path=path)
    dataset = Dataset(rows, split=split, source=path, lines=lines)
    if kb is not None:
        dataset.check_against(kb)
    logger.info("Loaded %d %s mentions from %s", len(dataset), split, path)
    return dataset


def save_dataset(dataset, path):
    with io.open(path, "w", encoding="utf-8", newline="\n") as f:
        for mention, gold in dataset.rows:
            f.write("{}\t{}\n".format(mention, gold))
