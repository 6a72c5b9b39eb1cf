"""
Command line interface: reslink <command> [options].

JSON results go to stdout, progress to stderr. Exit codes: 0 success,
2 usage or config error, 3 data error, 4 internal invariant violation.
"""
import argparse
import json
import os
import sys
import time
from collections import OrderedDict

from reslink.config import RunConfig
from reslink.data import (Dataset, checkpoint_from_encoder, export_index_h5,
                          load_checkpoint, load_dataset, load_embeddings, load_kb,
                          random_name, restore_encoder, save_checkpoint,
                          synthetic_vocab, write_synthetic_corpus)
from reslink.encoder import build_encoder, count_parameters
from reslink.index import (build_index, link_batch, load_index, save_index,
                           set_threads)
from reslink.probes import (ProbeSpec, check_supported, evaluate_linking,
                            format_probe_table, run_probe, run_probe_suite,
                            standard_probes)
from reslink.tokenizer import load_vocab
from reslink.training import train
from reslink.util import (ConfigError, DataError, InvariantError, get_logger,
                          make_rng, set_verbosity, text_hash)
from reslink import visualizer

logger = get_logger("reslink.cli")

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


def emit(payload, stream=None):
    """One JSON document per line on stdout."""
    stream = stream or sys.stdout
    stream.write(json.dumps(payload) + "\n")
    stream.flush()


def parse_set(items):
    overrides = OrderedDict()
    for item in items or []:
        if "=" not in item:
            raise ConfigError("--set expects key=value, got {!r}".format(item))
        key, _, value = item.partition("=")
        overrides[key.strip()] = value.strip()
    return overrides


def run_config(args):
    """
    Effective run config: file values, then --set, then dedicated flags.
    """
    overrides = parse_set(getattr(args, "set", None))
    flags = (("seed", "seed"), ("epochs", "epochs"), ("lr", "learning_rate"),
             ("batch_size", "batch_size"), ("pooling", "pooling"),
             ("vocab", "vocab"), ("embeddings", "embeddings"),
             ("threads", "threads"), ("cls_exemption", "cls_exemption"))
    for attr, key in flags:
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    run = RunConfig.from_file(getattr(args, "config", None), overrides)
    text = run.effective_text()
    logger.info("Effective config (hash %s):\n%s", run.hash(), text.rstrip("\n"))
    logger.info("Seed: %d", run.train.seed)
    set_threads(run.run.threads)
    return run


def require_vocab(path):
    if not path:
        raise ConfigError("No vocabulary given: pass --vocab or set 'vocab' "
                          "in the config")
    vocab = load_vocab(path)
    logger.info("Vocabulary %s: %d tokens, sha256 %s", path, len(vocab), vocab.fingerprint())
    return vocab


def open_checkpoint(args, model=None):
    """
    Load a checkpoint, its vocabulary and the encoder it holds.

    :return: (checkpoint, encoder)
    """
    checkpoint = load_checkpoint(args.ckpt, model=model)
    logger.info("Checkpoint %s: %s model, fingerprint %s", args.ckpt,
                checkpoint.kind, checkpoint.fingerprint.hex())
    logger.info("Checkpoint config (hash %s):\n%s", text_hash(checkpoint.config_text),
                checkpoint.config_text.rstrip("\n"))
    values = checkpoint.config_values
    vocab = require_vocab(args.vocab or values.get("vocab"))
    encoder = restore_encoder(checkpoint, vocab)
    return checkpoint, encoder


def _threads(args):
    return args.threads or os.cpu_count() or 1


def _dataset_names(paths, names):
    if names:
        if len(names) != len(paths):
            raise ConfigError("--name given {} times for {} datasets".format(
                len(names), len(paths)))
        return names
    return [os.path.splitext(os.path.basename(p))[0] for p in paths]


def cmd_synth(args):
    paths = write_synthetic_corpus(args.out, args.entities, args.variants, args.seed)
    emit(paths)


def cmd_train(args):
    run = run_config(args)
    vocab = require_vocab(run.run.vocab)
    kb = load_kb(args.kb)
    train_set = Dataset.concat([load_dataset(p, "train", kb) for p in args.train])
    dev_set = load_dataset(args.dev, "dev", kb) if args.dev else None
    embeddings = None
    if run.run.embeddings:
        embeddings = load_embeddings(run.run.embeddings, len(vocab))
    encoder = build_encoder(args.model, run.section(args.model), vocab,
                            embeddings=embeddings, seed=run.train.seed,
                            lowercase=run.run.lowercase)
    log_path = args.log or args.out + ".log"
    result = train(encoder, train_set, kb, run.train, dev_set=dev_set,
                   log_path=log_path, threads=_threads(args))
    fingerprint = save_checkpoint(args.out, checkpoint_from_encoder(encoder, run.effective_text()))
    if args.plot:
        visualizer.plot_training_log(result.log, args.plot)
    emit(OrderedDict([("checkpoint", args.out), ("fingerprint", fingerprint.hex()),
                      ("log", log_path), ("epochs", len(result.log)),
                      ("best_epoch", result.best_epoch),
                      ("final_loss", result.losses[-1] if result.losses else None)]))


def cmd_eval(args):
    _, encoder = open_checkpoint(args)
    kb = load_kb(args.kb)
    dataset = load_dataset(args.dataset, "test", kb)
    ks = sorted({1, args.k})
    result = evaluate_linking(encoder, dataset, kb, ks=ks, threads=_threads(args))
    payload = OrderedDict([("dataset", args.dataset)])
    payload.update(sorted(result.items()))
    emit(payload)


def cmd_probe(args):
    _, encoder = open_checkpoint(args)
    kb = load_kb(args.kb)
    names = _dataset_names(args.dataset, args.name)
    eval_sets = OrderedDict((name, load_dataset(path, "test", kb))
                            for name, path in zip(names, args.dataset))
    if args.sweep:
        specs = standard_probes(seed=args.seed)
    else:
        if args.probe is None:
            raise ConfigError("Pass --probe shuffle|scope or --sweep")
        specs = [ProbeSpec(args.probe, n=args.n, w=args.w, seed=args.seed)]
        check_supported(encoder, specs[0])
    if len(specs) == 1 and len(eval_sets) == 1:
        name, dataset = next(iter(eval_sets.items()))
        reports = [run_probe(encoder, dataset, kb, specs[0], name=name,
                             threads=_threads(args), exemption=args.cls_exemption)]
    else:
        reports = run_probe_suite(encoder, eval_sets, kb, specs, threads=_threads(args),
                                  exemption=args.cls_exemption)
    for report in reports:
        emit(report.to_dict())
    logger.info("Probe results:\n%s", format_probe_table(reports))
    if args.plot:
        visualizer.plot_probe_report(reports, args.plot)


def cmd_index(args):
    checkpoint, encoder = open_checkpoint(args)
    kb = load_kb(args.kb)
    index = build_index(encoder, kb, fingerprint=checkpoint.fingerprint,
                        threads=_threads(args))
    save_index(index, args.out)
    if args.h5:
        export_index_h5(index, args.h5)
    emit(OrderedDict([("index", args.out), ("names", len(index)),
                      ("entities", len(index.entity_ids))]))


def _read_mentions(args):
    if args.mentions and args.mentions != ["-"]:
        return args.mentions
    mentions = []
    for number, line in enumerate(sys.stdin, 1):
        line = line.rstrip("\r\n")
        if not line.strip():
            raise DataError("empty mention", path="<stdin>", line=number)
        mentions.append(line)
    return mentions


def cmd_link(args):
    checkpoint, encoder = open_checkpoint(args)
    if args.index:
        index = load_index(args.index)
        if index.fingerprint != checkpoint.fingerprint:
            raise DataError("index was built from a different checkpoint "
                            "({} vs {})".format(index.fingerprint.hex(),
                                                checkpoint.fingerprint.hex()),
                            path=args.index)
    else:
        if not args.kb:
            raise ConfigError("link needs --kb or --index")
        index = build_index(encoder, load_kb(args.kb), fingerprint=checkpoint.fingerprint,
                            threads=_threads(args))
    mentions = _read_mentions(args)
    results = link_batch(mentions, encoder, index, k=args.k, threads=_threads(args))
    for mention, ranked in zip(mentions, results):
        emit(OrderedDict([("mention", mention),
                          ("results", [OrderedDict([("entity_id", e), ("score", s)])
                                       for e, s in ranked])]))


def _fresh_encoder(args, run):
    if args.ckpt:
        return open_checkpoint(args)[1]
    vocab = require_vocab(run.run.vocab) if run.run.vocab else synthetic_vocab()
    return build_encoder(args.model, run.section(args.model), vocab,
                         seed=run.train.seed, lowercase=run.run.lowercase)


def cmd_bench(args):
    run = run_config(args)
    encoder = _fresh_encoder(args, run)
    if args.kb:
        names = [n for record in load_kb(args.kb) for n in record.names][:args.names]
    else:
        rng = make_rng(run.train.seed)
        names = [random_name(rng) for _ in range(args.names)]
    threads = _threads(args)
    encoder.encode_texts(names[:args.batch_size], threads=threads)
    start = time.perf_counter()
    encoder.encode_texts(names, batch_size=args.batch_size, threads=threads)
    seconds = time.perf_counter() - start
    emit(OrderedDict([("model", encoder.kind), ("names", len(names)),
                      ("threads", threads), ("seconds", seconds),
                      ("names_per_second", len(names) / seconds if seconds > 0 else None)]))


def cmd_params(args):
    run = run_config(args)
    encoder = _fresh_encoder(args, run)
    trainable, frozen = count_parameters(encoder)
    payload = OrderedDict([("model", encoder.kind)])
    if encoder.kind == "rescnn":
        payload["pooling"] = encoder.config.pooling
    payload["trainable"] = trainable
    payload["frozen"] = frozen
    emit(payload)


def _add_config_flags(parser):
    parser.add_argument('--config', help='key = value run-config file')
    parser.add_argument('--set', action='append', metavar='KEY=VALUE',
                        help='Override one config key (repeatable)')
    parser.add_argument('--seed', type=int, help='Training and initialization seed')
    parser.add_argument('--vocab', help='WordPiece vocabulary file')


def _add_threads(parser):
    parser.add_argument('--threads', type=int,
                        help='Worker threads for encoding and index scans '
                             '(default: all cores)')


def parse_input(argv=None):
    """
    Parse the command line into an argparse namespace.
    """
    parser = argparse.ArgumentParser(prog='reslink',
                                     description='Residual CNN entity linker')
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true', help='Debug logging')
    verbosity.add_argument('-q', '--quiet', action='store_true', help='Warnings only')
    commands = parser.add_subparsers(dest='command')
    commands.required = True

    p = commands.add_parser('synth', help='Write a synthetic corpus and vocabulary')
    p.add_argument('--out', required=True, help='Output directory')
    p.add_argument('--entities', type=int, default=500)
    p.add_argument('--variants', type=int, default=3)
    p.add_argument('--seed', type=int, default=1)
    p.set_defaults(func=cmd_synth)

    p = commands.add_parser('train', help='Train an encoder')
    p.add_argument('--model', choices=('rescnn', 'transformer'), default='rescnn')
    p.add_argument('--kb', required=True, help='kb.tsv')
    p.add_argument('--train', required=True, action='append',
                   help='Training dataset.tsv (repeatable; files are concatenated)')
    p.add_argument('--dev', help='Dev dataset.tsv for best-epoch selection')
    p.add_argument('--out', required=True, help='Checkpoint to write')
    p.add_argument('--log', help='JSON-lines training log (default: <out>.log)')
    p.add_argument('--plot', help='Write a loss curve image')
    p.add_argument('--epochs', type=int)
    p.add_argument('--lr', type=float, help='Adam learning rate')
    p.add_argument('--batch-size', dest='batch_size', type=int)
    p.add_argument('--pooling', choices=('max', 'self-attention'))
    p.add_argument('--embeddings', help='EMB1 pretrained wordpiece embeddings')
    _add_config_flags(p)
    _add_threads(p)
    p.set_defaults(func=cmd_train)

    p = commands.add_parser('eval', help='Top-k accuracy of a checkpoint')
    p.add_argument('--ckpt', required=True)
    p.add_argument('--kb', required=True)
    p.add_argument('--dataset', required=True)
    p.add_argument('--k', type=int, default=1)
    p.add_argument('--vocab', help='Vocabulary (default: the one recorded at training)')
    _add_threads(p)
    p.set_defaults(func=cmd_eval)

    p = commands.add_parser('probe', help='Word-order or attention-scope probe')
    p.add_argument('--ckpt', required=True)
    p.add_argument('--kb', required=True)
    p.add_argument('--dataset', required=True, action='append',
                   help='Evaluation dataset.tsv (repeatable)')
    p.add_argument('--name', action='append', help='Label of each --dataset')
    p.add_argument('--probe', choices=('shuffle', 'scope'))
    p.add_argument('--n', type=int, help='n-gram size of the shuffle probe')
    p.add_argument('--w', type=int, help='Window of the scope probe (odd)')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--sweep', action='store_true',
                   help='Run shuffle n=1,2,3 and scope w=3,5')
    p.add_argument('--cls-exemption', dest='cls_exemption', default='row',
                   choices=('row', 'row_and_column'))
    p.add_argument('--plot', help='Write a bar chart of the reports')
    p.add_argument('--vocab')
    _add_threads(p)
    p.set_defaults(func=cmd_probe)

    p = commands.add_parser('index', help='Precompute the name index')
    p.add_argument('--ckpt', required=True)
    p.add_argument('--kb', required=True)
    p.add_argument('--out', required=True, help='NIDX1 index file')
    p.add_argument('--h5', help='Also export the index to HDF5')
    p.add_argument('--vocab')
    _add_threads(p)
    p.set_defaults(func=cmd_index)

    p = commands.add_parser('link', help='Link mentions (arguments or stdin lines)')
    p.add_argument('--ckpt', required=True)
    p.add_argument('--index', help='Index written by `reslink index`')
    p.add_argument('--kb', help='kb.tsv, indexed on the fly without --index')
    p.add_argument('--k', type=int, default=1)
    p.add_argument('--vocab')
    p.add_argument('mentions', nargs='*', help="Mention texts; none or '-' reads stdin")
    _add_threads(p)
    p.set_defaults(func=cmd_link)

    p = commands.add_parser('bench', help='Encoding throughput on CPU')
    p.add_argument('--model', choices=('rescnn', 'transformer'), default='rescnn')
    p.add_argument('--ckpt', help='Benchmark a trained checkpoint instead')
    p.add_argument('--kb', help='Encode the names of this KB')
    p.add_argument('--names', type=int, default=2000)
    p.add_argument('--batch-size', dest='batch_size', type=int, default=256)
    p.add_argument('--pooling', choices=('max', 'self-attention'))
    _add_config_flags(p)
    _add_threads(p)
    p.set_defaults(func=cmd_bench)

    p = commands.add_parser('params', help='Count encoder parameters')
    p.add_argument('--model', choices=('rescnn', 'transformer'), default='rescnn')
    p.add_argument('--ckpt', help='Count a trained checkpoint instead')
    p.add_argument('--pooling', choices=('max', 'self-attention'))
    _add_config_flags(p)
    p.set_defaults(func=cmd_params)

    return parser.parse_args(argv)


def main(argv=None):
    args = parse_input(argv)
    if args.verbose:
        set_verbosity("DEBUG")
    elif args.quiet:
        set_verbosity("WARNING")
    else:
        set_verbosity("INFO")
    try:
        args.func(args)
    except ConfigError as e:
        logger.error("Configuration error: %s", e)
        return EXIT_CONFIG
    except DataError as e:
        logger.error("Data error: %s", e)
        return EXIT_DATA
    except OSError as e:
        logger.error("Data error: %s", e)
        return EXIT_DATA
    except InvariantError as e:
        logger.error("Internal invariant violated: %s", e)
        return EXIT_INTERNAL
    except ValueError as e:
        logger.error("Internal error: %s", e)
        return EXIT_INTERNAL
    return 0


if __name__ == '__main__':
    sys.exit(main())
