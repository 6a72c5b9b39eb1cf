from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from reslink.autodiff import Tensor, no_grad
from reslink.tokenizer import WordPieceTokenizer, pad_batch
from reslink.util import ConfigError, DataError, get_logger

logger = get_logger(__name__)


class EncoderBase(object):
    """
    Text encoder mapping a string to one raw vector.

    Parameters live in an ordered dict of named Tensors; frozen ones never
    take gradients and are skipped by the optimizer.
    """
    kind = None
    supports_scope = False

    def __init__(self, config, vocab, lowercase=True):
        """
        :param config: ResCNNConfig or TransformerConfig instance.
        :param vocab: Vocab the token ids refer to.
        :param lowercase: Tokenizer case folding.
        """
        self.config = config
        self.vocab = vocab
        self.lowercase = bool(lowercase)
        self.tokenizer = WordPieceTokenizer(vocab, max_len=config.max_len,
                                            lowercase=self.lowercase)
        self.params = OrderedDict()
        self.frozen = set()

    def add_param(self, name, data, frozen=False):
        tensor = Tensor(data, grad_enabled=not frozen, name=name)
        self.params[name] = tensor
        if frozen:
            self.frozen.add(name)
        return tensor

    def trainable(self):
        """Ordered dict of the parameters the optimizer updates."""
        return OrderedDict((name, t) for name, t in self.params.items()
                           if name not in self.frozen)

    def state(self):
        """Copy of every parameter array, in registration order."""
        return OrderedDict((name, t.data.copy()) for name, t in self.params.items())

    def load_state(self, arrays):
        """
        Replace parameter values.

        :param arrays: Mapping name -> array, one entry per parameter.
        """
        missing = [name for name in self.params if name not in arrays]
        extra = [name for name in arrays if name not in self.params]
        if missing or extra:
            raise ValueError("Parameter names differ: missing {}, unknown "
                             "{}".format(missing, extra))
        for name, tensor in self.params.items():
            data = np.asarray(arrays[name], dtype=np.float64)
            if data.shape != tensor.shape:
                raise ValueError("Parameter {} has shape {}, expected {}".format(
                    name, data.shape, tensor.shape))
            tensor.data = np.ascontiguousarray(data)

    @property
    def dim(self):
        raise NotImplementedError

    def forward(self, ids, valid, content, **options):
        """
        Encode a padded batch.

        :param ids: Token ids (B, L).
        :param valid: Non-pad positions (B, L).
        :param content: Non-special, non-pad positions (B, L).
        :return: Tensor (B, dim)
        """
        raise NotImplementedError

    def check_options(self, options):
        if options.get("window") is not None and not self.supports_scope:
            raise ConfigError("The {} encoder has no attention to restrict; "
                              "scope masks apply to attention models "
                              "only".format(self.kind))

    def encode_sequences(self, sequences, **options):
        """Differentiable encoding of already tokenized inputs."""
        self.check_options(options)
        ids, valid, content = pad_batch(sequences, self.vocab.pad_id)
        return self.forward(ids, valid, content, **options)

    def encode_texts(self, texts, batch_size=256, threads=1, transform=None,
                     what="text", **options):
        """
        Inference encoding of many texts.

        Batches are fixed by input order, so the result does not depend on
        the number of threads.

        :param texts: Strings to encode.
        :param batch_size: Texts per forward pass.
        :param threads: Worker threads; batches are spread over them.
        :param transform: Optional callable applied to each TokenSequence.
        :param what: Noun naming the texts in errors.
        :return: float64 array (N, dim)
        """
        self.check_options(options)
        sequences = self.tokenizer.batch(texts)
        check_content(sequences, texts, what)
        if transform is not None:
            sequences = [transform(s) for s in sequences]
        chunks = [sequences[i:i + batch_size]
                  for i in range(0, len(sequences), batch_size)]
        if not chunks:
            return np.zeros((0, self.dim))

        def run(chunk):
            with no_grad():
                return self.encode_sequences(chunk, **options).data

        if threads is None or threads <= 1 or len(chunks) == 1:
            parts = [run(chunk) for chunk in chunks]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(run, chunks))
        return np.concatenate(parts, axis=0)

    def encode(self, text, **options):
        """Raw vector of one text."""
        if not text or not text.strip():
            raise DataError("Cannot encode an empty text")
        return self.encode_texts([text], **options)[0]


def check_content(sequences, texts, what="text", path=None):
    """
    Reject texts that tokenize to no content wordpieces.

    A string may survive whitespace stripping and still clean down to
    [CLS] [SEP] only (zero-width or control characters); pooling has no
    position to read from such a sequence.

    :param sequences: TokenSequence per text.
    :param texts: The source strings, for the message.
    :param what: Noun used in the message.
    :param path: Optional source file of the texts.
    """
    for position, (sequence, text) in enumerate(zip(sequences, texts)):
        if len(sequence.content_ids()) == 0:
            raise DataError("{} {} ({!r}) has no content tokens".format(
                what, position, text), path=path)


def count_parameters(encoder):
    """
    :return: (trainable, frozen) element counts.
    """
    trainable = sum(t.size for name, t in encoder.params.items()
                    if name not in encoder.frozen)
    frozen = sum(encoder.params[name].size for name in encoder.frozen)
    return trainable, frozen


def normal_init(rng, shape, std):
    return rng.normal(0.0, std, size=shape)
