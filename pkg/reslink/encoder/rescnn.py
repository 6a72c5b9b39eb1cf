"""
Residual convolutional encoder.

Frozen (or random) wordpiece embeddings are projected to the model width,
passed through residual encoding blocks and pooled into one vector.
"""
from collections import OrderedDict

import numpy as np

import reslink.autodiff as ad
from reslink.config import ConfigBase, choice, parse_boolean, parse_int_tuple
from reslink.constants import DEFAULT_MAX_LEN, EMBED_DIM
from reslink.tokenizer import pad_batch, tokenize
from reslink.util import ConfigError, get_logger, make_rng

from .base import EncoderBase, normal_init

logger = get_logger(__name__)

POOLING_KINDS = ("max", "self-attention")


class ResCNNConfig(ConfigBase):
    fields = (
        ("d_model", int, 300),
        ("n_blocks", int, 4),
        ("kernel_widths", parse_int_tuple, (1, 3, 5)),
        ("filters_per_width", int, 100),
        ("pooling", choice(*POOLING_KINDS), "max"),
        ("max_len", int, DEFAULT_MAX_LEN),
        ("embed_dim", int, EMBED_DIM),
        ("freeze_embeddings", parse_boolean, True),
        ("init_std", float, 0.02),
    )

    def validate(self):
        if any(k < 1 or k % 2 == 0 for k in self.kernel_widths):
            raise ConfigError("kernel_widths must be odd and positive, got "
                              "{}".format(self.kernel_widths))
        if self.filters_per_width * len(self.kernel_widths) != self.d_model:
            raise ConfigError(
                "Filters across widths ({} x {}) must add up to d_model {} "
                "for the residual sum".format(self.filters_per_width,
                                              len(self.kernel_widths),
                                              self.d_model))
        if self.n_blocks < 0:
            raise ConfigError("n_blocks must be non-negative")
        if self.max_len < 3:
            raise ConfigError("max_len must leave room for one token besides "
                              "[CLS] and [SEP]")
        if self.init_std <= 0:
            raise ConfigError("init_std must be positive")


def embed(tokens, table):
    """
    Embedding rows of one token sequence.

    :param tokens: TokenSequence.
    :param table: Tensor (V, embed_dim).
    :return: Tensor (L, embed_dim)
    """
    return ad.gather_rows(table, tokens.ids)


def encoding_block(H, params, valid=None):
    """
    One residual block: parallel same-length convolutions, ReLU,
    a position-wise linear map and the skip connection.

    :param H: Tensor (..., L, d).
    :param params: Dict with "convs" (list of (kernel, bias)), "ffn.weight"
        and "ffn.bias".
    :param valid: Optional (..., L) mask; pad rows are zeroed before the
        convolutions so they never leak into real positions.
    :return: Tensor shaped like H
    """
    X = H if valid is None else ad.mask_rows(H, valid)
    C = ad.concat([ad.conv1d_same(X, kernel, bias)
                   for kernel, bias in params["convs"]], axis=-1)
    F = ad.linear(ad.relu(C), params["ffn.weight"], params["ffn.bias"])
    return ad.add(H, F)


def pool_max(H, valid):
    """Per-channel maximum over valid positions."""
    return ad.masked_max(H, valid)


def attention_pool_weights(H, valid, W_a, b_a, v):
    """
    Softmax weights of self-attention pooling.

    :return: Tensor (..., L)
    """
    valid = np.asarray(valid, dtype=bool)
    if not np.all(valid.any(axis=-1)):
        raise ValueError("pool_self_attention: a sequence has no valid positions")
    hidden = ad.tanh(ad.linear(H, W_a, b_a))
    scores = ad.linear(hidden, ad.reshape(v, (v.shape[0], 1)))
    scores = ad.reshape(scores, scores.shape[:-1])
    mask = np.where(valid, 0.0, -np.inf)
    return ad.masked_softmax(scores, mask)


def pool_self_attention(H, valid, W_a, b_a, v):
    """
    s_t = v . tanh(W_a H_t + b), alpha = softmax over valid t,
    output = sum_t alpha_t H_t.
    """
    alpha = attention_pool_weights(H, valid, W_a, b_a, v)
    # (..., 1, L) @ (..., L, d) -> (..., 1, d)
    pooled = ad.matmul(ad.reshape(alpha, alpha.shape[:-1] + (1, alpha.shape[-1])), H)
    return ad.reshape(pooled, pooled.shape[:-2] + (pooled.shape[-1],))


def block_params(params, index, config):
    prefix = "blocks.{}.".format(index)
    return {
        "convs": [(params[prefix + "conv{}.weight".format(k)],
                   params[prefix + "conv{}.bias".format(k)])
                  for k in config.kernel_widths],
        "ffn.weight": params[prefix + "ffn.weight"],
        "ffn.bias": params[prefix + "ffn.bias"],
    }


def rescnn_forward(params, config, ids, valid, content):
    """
    Batched encoder pass.

    :param params: Mapping of parameter name -> Tensor.
    :param config: ResCNNConfig.
    :param ids: Token ids (B, L).
    :param valid: Non-pad positions (B, L).
    :param content: Positions pooled over (B, L).
    :return: Tensor (B, d_model)
    """
    E = ad.gather_rows(params["embeddings"], ids)
    H = ad.linear(E, params["projection.weight"], params["projection.bias"])
    for i in range(config.n_blocks):
        H = encoding_block(H, block_params(params, i, config), valid)
    if config.pooling == "max":
        return pool_max(H, content)
    return pool_self_attention(H, content, params["pooling.weight"],
                               params["pooling.bias"], params["pooling.context"])


def init_rescnn_params(config, vocab_size, embeddings=None, seed=0):
    """
    Fresh parameters, weights ~ N(0, init_std), biases zero.

    :param embeddings: Optional (V, embed_dim) table; drawn at random otherwise.
    :return: OrderedDict name -> ndarray
    """
    rng = make_rng(seed)
    std = config.init_std
    d = config.d_model
    params = OrderedDict()
    if embeddings is None:
        params["embeddings"] = normal_init(rng, (vocab_size, config.embed_dim), std)
    else:
        embeddings = np.asarray(embeddings, dtype=np.float64)
        if embeddings.shape != (vocab_size, config.embed_dim):
            raise ConfigError("Embedding table {} does not match vocab size {} "
                              "and embed_dim {}".format(embeddings.shape,
                                                        vocab_size,
                                                        config.embed_dim))
        params["embeddings"] = embeddings
    params["projection.weight"] = normal_init(rng, (config.embed_dim, d), std)
    params["projection.bias"] = np.zeros(d)
    for i in range(config.n_blocks):
        prefix = "blocks.{}.".format(i)
        for k in config.kernel_widths:
            params[prefix + "conv{}.weight".format(k)] = normal_init(
                rng, (k, d, config.filters_per_width), std)
            params[prefix + "conv{}.bias".format(k)] = np.zeros(config.filters_per_width)
        params[prefix + "ffn.weight"] = normal_init(rng, (d, d), std)
        params[prefix + "ffn.bias"] = np.zeros(d)
    if config.pooling == "self-attention":
        params["pooling.weight"] = normal_init(rng, (d, d), std)
        params["pooling.bias"] = np.zeros(d)
        params["pooling.context"] = normal_init(rng, (d,), std)
    return params


def encode(text, vocab, table, config, params, lowercase=True):
    """
    Raw ResCNN vector of one text.

    :param table: Embedding Tensor (V, embed_dim).
    :param params: Mapping of the remaining parameters (no "embeddings").
    :return: ndarray (d_model,)
    """
    if not text or not text.strip():
        raise ValueError("Cannot encode an empty text")
    merged = dict(params)
    merged["embeddings"] = table
    seq = tokenize(text, vocab, max_len=config.max_len, lowercase=lowercase)
    ids, valid, content = pad_batch([seq], vocab.pad_id)
    with ad.no_grad():
        return rescnn_forward(merged, config, ids, valid, content).data[0]


class ResCNNEncoder(EncoderBase):
    """
    Residual CNN text encoder.
    """
    kind = "rescnn"
    supports_scope = False

    def __init__(self, config, vocab, embeddings=None, seed=0, lowercase=True):
        """
        :param config: ResCNNConfig.
        :param vocab: Vocab.
        :param embeddings: Optional pretrained (V, embed_dim) table.
        :param seed: Seed of the parameter initialization.
        :param lowercase: Tokenizer case folding.
        """
        super(ResCNNEncoder, self).__init__(config, vocab, lowercase)
        arrays = init_rescnn_params(config, len(vocab), embeddings, seed)
        for name, data in arrays.items():
            frozen = name == "embeddings" and config.freeze_embeddings
            self.add_param(name, data, frozen=frozen)
        logger.debug("ResCNN encoder: %d blocks, %s pooling, embeddings %s",
                     config.n_blocks, config.pooling,
                     "frozen" if config.freeze_embeddings else "trainable")

    @property
    def dim(self):
        return self.config.d_model

    def forward(self, ids, valid, content, **options):
        return rescnn_forward(self.params, self.config, ids, valid, content)
