"""
Contrastive dual-encoder training.
"""
import io
import json
import time

import numpy as np

from reslink.autodiff import Graph
from reslink.config import ConfigBase
from reslink.data.kb import kb_lookup
from reslink.encoder.base import check_content
from reslink.probes.metrics import evaluate_linking
from reslink.util import ConfigError, DataError, get_logger, make_rng

from .loss import contrastive_loss
from .optim import AdamState, adam_step

logger = get_logger(__name__)


class TrainConfig(ConfigBase):
    fields = (
        ("learning_rate", float, 0.001),
        ("batch_size", int, 64),
        ("epochs", int, 20),
        ("temperature", float, 0.05),
        ("seed", int, 0),
        ("beta1", float, 0.9),
        ("beta2", float, 0.999),
        ("eps", float, 1e-8),
        ("dev_every", int, 0),
    )

    def validate(self):
        if self.temperature <= 0:
            raise ConfigError("temperature must be positive")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be at least 2 for in-batch "
                              "negatives")
        if self.epochs < 0:
            raise ConfigError("epochs must be non-negative")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be non-negative")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("beta1 and beta2 must lie in [0, 1)")
        if self.eps <= 0:
            raise ConfigError("eps must be positive")
        if self.dev_every < 0:
            raise ConfigError("dev_every must be non-negative")


class TrainResult(object):
    """
    :ivar params: OrderedDict name -> array of the returned parameters.
    :ivar log: One dict per epoch.
    :ivar best_epoch: Epoch whose parameters were kept (last epoch without
        dev selection).
    """

    def __init__(self, params, log, best_epoch):
        self.params = params
        self.log = log
        self.best_epoch = best_epoch

    @property
    def losses(self):
        return [entry["mean_loss"] for entry in self.log]


def training_pairs(train_set, kb):
    """
    Expand (mention, gold) rows into (mention, name, entity) pairs: one for
    the primary name and one per alternative name.
    """
    if len(train_set) == 0:
        raise DataError("training set is empty", path=train_set.source)
    lookup = kb_lookup(kb)
    train_set.check_against(lookup)
    pairs = []
    for mention, gold in train_set.rows:
        for name in lookup[gold].names:
            pairs.append((mention, name, gold))
    return pairs


def make_batches(order, owners, batch_size):
    """
    Cut a permutation into batches without repeated entities.

    Pairs that would repeat an entity in the current batch are deferred to a
    later batch, keeping their relative order. A batch left with a single
    pair has no in-batch negative and is dropped, so every returned batch
    holds at least two distinct entities.

    :param order: Pair indices in epoch order.
    :param owners: Entity id of every pair.
    :return: list of index lists
    """
    batches = []
    pending = list(order)
    while pending:
        batch, seen, deferred = [], set(), []
        for i in pending:
            if len(batch) < batch_size and owners[i] not in seen:
                batch.append(i)
                seen.add(owners[i])
            else:
                deferred.append(i)
        if len(batch) > 1:
            batches.append(batch)
        pending = deferred
    return batches


def train_step(encoder, mention_seqs, name_seqs, state, config):
    """
    Forward, backward and one Adam update on a single batch.

    :return: float loss
    """
    with Graph() as graph:
        mention_vecs = encoder.encode_sequences(mention_seqs)
        name_vecs = encoder.encode_sequences(name_seqs)
        loss = contrastive_loss(mention_vecs, name_vecs, config.temperature)
    trainable = encoder.trainable()
    if loss.grad_enabled:
        by_tensor = graph.backward(loss)
        grads = {name: by_tensor.get(t) for name, t in trainable.items()}
    else:
        grads = {}
    adam_step(trainable, grads, state, config)
    return loss.item()


def train(encoder, train_set, kb, config, dev_set=None, log_path=None, threads=1):
    """
    Train an encoder on (mention, gold entity) rows with in-batch negatives.

    Examples are reshuffled every epoch from a generator seeded with
    config.seed, so a run is fully determined by (seed, data, config).

    :param encoder: ResCNNEncoder or TransformerEncoder, updated in place.
    :param train_set: Dataset of training mentions.
    :param kb: list of EntityRecord.
    :param config: TrainConfig.
    :param dev_set: Optional Dataset; with config.dev_every > 0 the epoch
        with the best dev top-1 accuracy is kept.
    :param log_path: Optional JSON-lines file receiving one entry per epoch.
    :param threads: Worker threads of the dev evaluation.
    :return: TrainResult
    """
    pairs = training_pairs(train_set, kb)
    if dev_set is not None:
        dev_set.check_against(kb)
    owners = [gold for _, _, gold in pairs]
    if len(set(owners)) < 2:
        raise DataError("training set needs mentions of at least two entities "
                        "for in-batch negatives", path=train_set.source)
    mention_seqs = encoder.tokenizer.batch([m for m, _, _ in pairs])
    name_seqs = encoder.tokenizer.batch([n for _, n, _ in pairs])
    check_content(mention_seqs, [m for m, _, _ in pairs], "training mention",
                  path=train_set.source)
    check_content(name_seqs, [n for _, n, _ in pairs], "KB name")
    rng = make_rng(config.seed)
    state = AdamState(encoder.trainable())
    select_on_dev = dev_set is not None and config.dev_every > 0
    logger.info("Training %s encoder on %d pairs from %d mentions, %d epochs",
                encoder.kind, len(pairs), len(train_set), config.epochs)

    log = []
    best = (-1.0, 0, encoder.state())
    log_file = io.open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for epoch in range(1, config.epochs + 1):
            start = time.time()
            order = rng.permutation(len(pairs))
            losses = []
            batches = make_batches(order, owners, config.batch_size)
            skipped = len(pairs) - sum(len(b) for b in batches)
            if skipped:
                logger.debug("epoch %d: %d pairs without an in-batch negative "
                             "skipped", epoch, skipped)
            for batch in batches:
                losses.append(train_step(encoder,
                                         [mention_seqs[i] for i in batch],
                                         [name_seqs[i] for i in batch],
                                         state, config))
            entry = {"epoch": epoch, "mean_loss": float(np.mean(losses)),
                     "wall_seconds": time.time() - start}
            if select_on_dev and epoch % config.dev_every == 0:
                accuracy = evaluate_linking(encoder, dev_set, kb, threads=threads)["top1"]
                entry["dev_accuracy"] = accuracy
                if accuracy > best[0]:
                    best = (accuracy, epoch, encoder.state())
            log.append(entry)
            logger.info("epoch %d: mean loss %.6f (%.1f s)%s", epoch,
                        entry["mean_loss"], entry["wall_seconds"],
                        ", dev top-1 {:.4f}".format(entry["dev_accuracy"])
                        if "dev_accuracy" in entry else "")
            if log_file is not None:
                log_file.write(json.dumps(entry) + "\n")
                log_file.flush()
    finally:
        if log_file is not None:
            log_file.close()

    best_epoch = config.epochs
    if select_on_dev and best[0] >= 0:
        best_epoch = best[1]
        encoder.load_state(best[2])
        logger.info("Keeping epoch %d (dev top-1 %.4f)", best_epoch, best[0])
    return TrainResult(encoder.state(), log, best_epoch)


def read_training_log(path):
    """Parse a JSON-lines training log."""
    entries = []
    with io.open(path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                entries.append(json.loads(line))
            except ValueError as e:
                raise DataError("bad log entry: {}".format(e), path=path, line=number)
    return entries
