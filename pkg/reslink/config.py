"""
Configuration objects and the flat `key = value` run-config file.
"""
import io
from collections import OrderedDict

from reslink.util import ConfigError, text_hash


def parse_boolean(b):
    """
    Handle different possible Boolean types.

    :param b: bool, None, or a string such as "true", "no", "1".
    :return: bool or None
    """
    if b is None:
        return b
    if b is False or b is True:
        return b
    b = str(b).strip()
    if len(b) < 1:
        raise ValueError('Cannot parse empty string into boolean.')
    b = b[0].lower()
    if b == 't' or b == 'y' or b == '1':
        return True
    if b == 'f' or b == 'n' or b == '0':
        return False
    raise ValueError('Cannot parse string into boolean.')


def parse_int_tuple(value):
    if isinstance(value, str):
        value = [v for v in value.replace(" ", "").split(",") if v]
    return tuple(int(v) for v in value)


def choice(*options):
    def coerce(value):
        value = str(value).strip()
        if value not in options:
            raise ValueError("expected one of {}".format(", ".join(options)))
        return value
    return coerce


def optional_str(value):
    if value is None:
        return None
    value = str(value).strip()
    return value or None


def format_value(value):
    """Canonical text form of a config value."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


class ConfigBase(object):
    """
    Plain configuration record.

    Subclasses list their fields as (name, coerce, default). The constructor
    pops every known field from the keyword arguments and rejects the rest.
    """
    fields = ()

    def __init__(self, **kwargs):
        self.init_from_arg_dict(dict(kwargs))

    def init_from_arg_dict(self, arg_dict):
        for name, coerce, default in self.fields:
            value = arg_dict.pop(name, default)
            try:
                value = coerce(value)
            except (TypeError, ValueError) as e:
                raise ConfigError("Bad value {!r} for {}: {}".format(value, name, e))
            setattr(self, name, value)
        if arg_dict:
            raise ConfigError("Non-understood {} arguments: {}".format(
                type(self).__name__, ", ".join(sorted(arg_dict))))
        self.validate()

    def validate(self):
        pass

    @classmethod
    def keys(cls):
        return [name for name, _, _ in cls.fields]

    def to_dict(self):
        return OrderedDict((name, getattr(self, name)) for name in self.keys())

    def replace(self, **changes):
        values = self.to_dict()
        values.update(changes)
        return type(self)(**values)

    def to_text(self):
        return "".join("{} = {}\n".format(k, format_value(v))
                       for k, v in sorted(self.to_dict().items()))

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __ne__(self, other):
        return not self.__eq__(other)

    def __repr__(self):
        return "{}({})".format(type(self).__name__, ", ".join(
            "{}={!r}".format(k, v) for k, v in self.to_dict().items()))


def parse_config_text(text, source="<config>"):
    """
    Parse `key = value` lines. `#` and `;` start comments; blank lines and
    trailing CR are ignored.

    :return: OrderedDict of raw string values
    """
    values = OrderedDict()
    for number, line in enumerate(text.split("\n"), 1):
        line = line.rstrip("\r")
        for marker in ("#", ";"):
            if marker in line:
                line = line[:line.index(marker)]
        line = line.strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("{}:{}: expected 'key = value', got {!r}".format(
                source, number, line))
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError("{}:{}: missing key".format(source, number))
        if key in values:
            raise ConfigError("{}:{}: key {} set twice".format(source, number, key))
        values[key] = value.strip()
    return values


def read_config_file(fname):
    """
    Read a run-config file into raw string values.

    :param fname: Path of the `key = value` file.
    """
    try:
        with io.open(fname, "r", encoding="utf-8") as f:
            content = f.read()
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigError("cannot read config {}: {}".format(fname, e))
    return parse_config_text(content, source=fname)


class RunFields(ConfigBase):
    """Settings of a run that belong to no model or training record."""
    fields = (
        ("vocab", optional_str, None),
        ("embeddings", optional_str, None),
        ("lowercase", parse_boolean, True),
        ("threads", int, 0),
        ("cls_exemption", choice("row", "row_and_column"), "row"),
    )


class RunConfig(object):
    """
    Every setting of one command: training, both model configs and the run
    fields, read from an optional file and overridden from the command line.
    """

    def __init__(self, values=None):
        from reslink.encoder.rescnn import ResCNNConfig
        from reslink.encoder.transformer import TransformerConfig
        from reslink.training.trainer import TrainConfig

        self._sections = OrderedDict([
            ("train", TrainConfig),
            ("rescnn", ResCNNConfig),
            ("transformer", TransformerConfig),
            ("run", RunFields),
        ])
        values = OrderedDict(values or {})
        known = set()
        for cls in self._sections.values():
            known.update(cls.keys())
        unknown = [k for k in values if k not in known]
        if unknown:
            raise ConfigError("Unknown config key(s): {}".format(", ".join(unknown)))
        self.values = values

    @classmethod
    def from_file(cls, fname=None, overrides=None):
        """
        :param fname: Optional `key = value` file.
        :param overrides: Mapping applied on top of the file values.
        """
        values = read_config_file(fname) if fname else OrderedDict()
        for key, value in (overrides or {}).items():
            if value is not None:
                values[key] = value
        return cls(values)

    def section(self, name):
        """Build the config record of one section from the relevant keys."""
        cls = self._sections[name]
        return cls(**{k: v for k, v in self.values.items() if k in cls.keys()})

    @property
    def train(self):
        return self.section("train")

    @property
    def rescnn(self):
        return self.section("rescnn")

    @property
    def transformer(self):
        return self.section("transformer")

    @property
    def run(self):
        return self.section("run")

    def effective_text(self):
        """Canonical sorted `key = value` text of every effective setting."""
        merged = OrderedDict()
        for name in self._sections:
            for key, value in self.section(name).to_dict().items():
                merged[key] = value
        return "".join("{} = {}\n".format(k, format_value(v))
                       for k, v in sorted(merged.items()))

    def hash(self):
        return text_hash(self.effective_text())
