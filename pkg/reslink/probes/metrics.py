import numpy as np

from reslink.index import NameIndex, build_index, link_batch
from reslink.util import DataError


def top1_accuracy(predictions, gold):
    """
    Fraction of exact entity-id matches.

    :param predictions: Predicted entity ids.
    :param gold: Gold entity ids, same length.
    """
    predictions, gold = list(predictions), list(gold)
    if len(predictions) != len(gold):
        raise ValueError("{} predictions for {} gold ids".format(
            len(predictions), len(gold)))
    if not gold:
        raise ValueError("Accuracy of an empty set is undefined")
    return sum(p == g for p, g in zip(predictions, gold)) / float(len(gold))


def topk_accuracy(ranked, gold, k):
    """
    Fraction of mentions whose gold id is among the first k ranked ids.

    :param ranked: Per mention, a list of (entity id, score).
    """
    ranked, gold = list(ranked), list(gold)
    if len(ranked) != len(gold):
        raise ValueError("{} rankings for {} gold ids".format(len(ranked), len(gold)))
    if not gold:
        raise ValueError("Accuracy of an empty set is undefined")
    hits = sum(g in [e for e, _ in r[:k]] for r, g in zip(ranked, gold))
    return hits / float(len(gold))


def avg_percent_change(baseline, probed):
    """
    Mean over datasets of 100 * (probed - baseline) / baseline.
    """
    baseline = np.asarray(baseline, dtype=np.float64)
    probed = np.asarray(probed, dtype=np.float64)
    if baseline.shape != probed.shape or baseline.ndim != 1:
        raise ValueError("baseline {} and probed {} must be vectors of equal "
                         "length".format(baseline.shape, probed.shape))
    if baseline.size == 0:
        raise ValueError("No datasets to average over")
    if np.any(baseline <= 0):
        raise ValueError("Baseline accuracies must be positive")
    return float(np.mean(100.0 * (probed - baseline) / baseline))


def evaluate_linking(encoder, dataset, kb_or_index, ks=(1,), threads=1, **options):
    """
    Top-k accuracies of an encoder on a dataset.

    :param kb_or_index: A NameIndex built with `encoder`, or a KB to index.
    :param ks: Cut-offs reported as "top<k>".
    :param options: Encoder options used for mentions and names alike.
    :return: dict {"top1": ..., "top5": ..., "n": rows}
    """
    if len(dataset) == 0:
        raise DataError("dataset has no rows", path=dataset.source)
    if isinstance(kb_or_index, NameIndex):
        index = kb_or_index
    else:
        index = build_index(encoder, kb_or_index, threads=threads, **options)
    k_max = max(ks)
    ranked = link_batch(dataset.mentions, encoder, index, k=k_max,
                        threads=threads, **options)
    result = {"n": len(dataset)}
    for k in sorted(set(ks)):
        result["top{}".format(k)] = topk_accuracy(ranked, dataset.gold, k)
    return result
