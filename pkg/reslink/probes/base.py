"""
Word-order and attention-scope probes of a trained encoder.
"""
import io
import json
from collections import OrderedDict

from reslink.index import build_index
from reslink.util import ConfigError, DataError, get_logger

from .metrics import avg_percent_change, evaluate_linking
from .shuffle import ShuffleTransform

logger = get_logger(__name__)

PROBE_KINDS = ("shuffle", "scope")
NGRAM_NAMES = {1: "unigrams", 2: "bigrams", 3: "trigrams"}


class ProbeSpec(object):
    """
    One probe setting: shuffle with n-gram size n, or scope with window w.
    """

    def __init__(self, kind, n=None, w=None, seed=0):
        if kind not in PROBE_KINDS:
            raise ConfigError("Unknown probe {!r}, expected shuffle or scope".format(kind))
        if kind == "shuffle":
            if n is None or int(n) < 1:
                raise ConfigError("Shuffle probe needs n >= 1, got {}".format(n))
            n, w = int(n), None
        else:
            if w is None or int(w) < 1 or int(w) % 2 == 0:
                raise ConfigError("Scope probe needs an odd window w >= 1, "
                                  "got {}".format(w))
            w, n = int(w), None
        self.kind = kind
        self.n = n
        self.w = w
        self.seed = int(seed)

    @property
    def param(self):
        return self.n if self.kind == "shuffle" else self.w

    @property
    def label(self):
        if self.kind == "shuffle":
            return "Shuffle " + NGRAM_NAMES.get(self.n, "{}-grams".format(self.n))
        return "Scope w={}".format(self.w)

    def __repr__(self):
        return "ProbeSpec({!r}, {}={}, seed={})".format(
            self.kind, "n" if self.kind == "shuffle" else "w", self.param, self.seed)


def standard_probes(seed=0):
    """Shuffled unigrams, bigrams, trigrams and scope windows 3 and 5."""
    return [ProbeSpec("shuffle", n=1, seed=seed),
            ProbeSpec("shuffle", n=2, seed=seed),
            ProbeSpec("shuffle", n=3, seed=seed),
            ProbeSpec("scope", w=3, seed=seed),
            ProbeSpec("scope", w=5, seed=seed)]


class ProbeReport(object):
    """
    Baseline and probed top-1 accuracy of each dataset under one probe.
    """

    def __init__(self, probe, param, seed=0, datasets=None):
        self.probe = probe
        self.param = param
        self.seed = seed
        self.datasets = []
        for row in datasets or []:
            self.add(row["name"], row["baseline"], row["probed"])

    def add(self, name, baseline, probed):
        self.datasets.append(OrderedDict([("name", name),
                                          ("baseline", float(baseline)),
                                          ("probed", float(probed))]))

    @property
    def avg_percent_change(self):
        """Average percent change, or None when some baseline is zero."""
        if any(d["baseline"] <= 0 for d in self.datasets):
            return None
        return avg_percent_change([d["baseline"] for d in self.datasets],
                                  [d["probed"] for d in self.datasets])

    def to_dict(self):
        return OrderedDict([("probe", self.probe), ("param", self.param),
                            ("seed", self.seed),
                            ("datasets", [OrderedDict(d) for d in self.datasets]),
                            ("avg_percent_change", self.avg_percent_change)])

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, values):
        try:
            return cls(values["probe"], values["param"], values.get("seed", 0),
                       values["datasets"])
        except (KeyError, TypeError) as e:
            raise DataError("malformed probe report: {}".format(e))

    def __repr__(self):
        return "ProbeReport({} {}={}, {} datasets)".format(
            self.probe, "n" if self.probe == "shuffle" else "w", self.param,
            len(self.datasets))


def check_supported(encoder, spec):
    if spec.kind == "scope" and not encoder.supports_scope:
        raise ConfigError("The scope probe restricts attention windows; the "
                          "{} encoder has no attention to restrict".format(encoder.kind))


def _probe_options(encoder, spec, exemption):
    check_supported(encoder, spec)
    if spec.kind == "scope":
        return {"window": spec.w, "exemption": exemption}
    # one generator for names then mentions, in input order
    return {"transform": ShuffleTransform(spec.n, spec.seed)}


def probed_accuracy(encoder, eval_set, kb, spec, threads=1, exemption="row"):
    """
    Top-1 accuracy with the probe applied to mentions and, through a
    re-built index, to entity names.
    """
    options = _probe_options(encoder, spec, exemption)
    index = build_index(encoder, kb, threads=threads, **options)
    return evaluate_linking(encoder, eval_set, index, threads=threads, **options)["top1"]


def run_probe(encoder, eval_set, kb, spec, name="dataset", threads=1,
              exemption="row", baseline=None):
    """
    Pair the probed accuracy of one dataset with its unperturbed baseline.

    :param encoder: Trained encoder; never modified.
    :param eval_set: Dataset.
    :param kb: list of EntityRecord.
    :param spec: ProbeSpec.
    :param name: Dataset label in the report.
    :param exemption: CLS exemption variant of the scope mask.
    :param baseline: Precomputed baseline accuracy, or None to evaluate it.
    :return: ProbeReport
    """
    check_supported(encoder, spec)
    if baseline is None:
        baseline = evaluate_linking(encoder, eval_set, kb, threads=threads)["top1"]
    probed = probed_accuracy(encoder, eval_set, kb, spec, threads, exemption)
    logger.info("%s on %s: baseline %.4f, probed %.4f", spec.label, name,
                baseline, probed)
    report = ProbeReport(spec.kind, spec.param, spec.seed)
    report.add(name, baseline, probed)
    return report


def run_probe_suite(encoder, eval_sets, kb, specs=None, threads=1, exemption="row"):
    """
    Run several probes over several datasets, one report per probe.

    Scope probes are skipped for encoders without attention.

    :param eval_sets: OrderedDict name -> Dataset.
    :param specs: ProbeSpecs; the standard five when None.
    :return: list of ProbeReport
    """
    specs = standard_probes() if specs is None else specs
    baselines = OrderedDict(
        (name, evaluate_linking(encoder, dataset, kb, threads=threads)["top1"])
        for name, dataset in eval_sets.items())
    reports = []
    for spec in specs:
        if spec.kind == "scope" and not encoder.supports_scope:
            logger.info("Skipping %s: the %s encoder has no attention",
                        spec.label, encoder.kind)
            continue
        report = ProbeReport(spec.kind, spec.param, spec.seed)
        for name, dataset in eval_sets.items():
            probed = probed_accuracy(encoder, dataset, kb, spec, threads, exemption)
            report.add(name, baselines[name], probed)
        reports.append(report)
    return reports


def _label(report):
    return ProbeSpec(report.probe, n=report.param, w=report.param).label


def _format_change(change):
    return "n/a" if change is None else "{:.2f}".format(change)


def format_probe_table(reports, scale=100.0):
    """
    Text table: a baseline row, then one row per probe; one column per
    dataset plus "Avg. % change".

    :param reports: ProbeReports over the same datasets.
    :param scale: Factor applied to accuracies (100 prints percentages).
    """
    if not reports:
        return ""
    names = [d["name"] for d in reports[0].datasets]
    rows = [["Model"] + names + ["Avg. % change"]]
    rows.append(["Baseline"] + ["{:.1f}".format(d["baseline"] * scale)
                                for d in reports[0].datasets] + ["-"])
    for report in reports:
        if [d["name"] for d in report.datasets] != names:
            raise ValueError("Probe reports cover different datasets")
        rows.append([_label(report)]
                    + ["{:.1f}".format(d["probed"] * scale) for d in report.datasets]
                    + [_format_change(report.avg_percent_change)])
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = []
    for r, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[i]) if i == 0 else cell.rjust(widths[i])
                               for i, cell in enumerate(row)))
        if r == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def save_probe_reports(reports, path):
    """One JSON report per line."""
    with io.open(path, "w", encoding="utf-8") as f:
        for report in reports:
            f.write(report.to_json() + "\n")
