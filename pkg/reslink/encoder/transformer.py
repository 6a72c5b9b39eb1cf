"""
Small pre-LayerNorm Transformer encoder with [CLS] pooling.

It hosts the attention-scope probe: a window given at evaluation time
installs a scope mask at every layer.
"""
from collections import OrderedDict

import numpy as np

import reslink.autodiff as ad
from reslink.config import ConfigBase
from reslink.constants import DEFAULT_MAX_LEN
from reslink.tokenizer import pad_batch
from reslink.util import ConfigError, get_logger, make_rng

from .attention import attention, build_scope_mask, padding_mask
from .base import EncoderBase, normal_init

logger = get_logger(__name__)


class TransformerConfig(ConfigBase):
    fields = (
        ("layers", int, 2),
        ("heads", int, 4),
        ("width", int, 128),
        ("ffn_width", int, 512),
        ("max_len", int, DEFAULT_MAX_LEN),
        ("init_std", float, 0.02),
    )

    def validate(self):
        if self.layers < 1 or self.heads < 1:
            raise ConfigError("layers and heads must be positive")
        if self.width % self.heads != 0:
            raise ConfigError("width {} is not divisible by heads {}".format(
                self.width, self.heads))
        if self.max_len < 3:
            raise ConfigError("max_len must leave room for one token besides "
                              "[CLS] and [SEP]")
        if self.init_std <= 0:
            raise ConfigError("init_std must be positive")

    @property
    def head_width(self):
        return self.width // self.heads


def split_heads(x, heads):
    # (B, L, d) -> (B, heads, L, d / heads)
    B, L, d = x.shape
    return ad.transpose(ad.reshape(x, (B, L, heads, d // heads)), (0, 2, 1, 3))


def merge_heads(x):
    B, H, L, p = x.shape
    return ad.reshape(ad.transpose(x, (0, 2, 1, 3)), (B, L, H * p))


def transformer_layer(X, params, prefix, heads, mask):
    """
    One pre-LN layer: X + MHA(LN(X)), then X + FFN(LN(X)).
    """
    def p(name):
        return params[prefix + name]

    h = ad.layer_norm(X, p("attn_norm.gamma"), p("attn_norm.beta"))
    q = split_heads(ad.linear(h, p("query.weight"), p("query.bias")), heads)
    k = split_heads(ad.linear(h, p("key.weight"), p("key.bias")), heads)
    v = split_heads(ad.linear(h, p("value.weight"), p("value.bias")), heads)
    ctx = merge_heads(attention(q, k, v, mask))
    X = ad.add(X, ad.linear(ctx, p("output.weight"), p("output.bias")))
    h = ad.layer_norm(X, p("ffn_norm.gamma"), p("ffn_norm.beta"))
    h = ad.relu(ad.linear(h, p("ffn_in.weight"), p("ffn_in.bias")))
    return ad.add(X, ad.linear(h, p("ffn_out.weight"), p("ffn_out.bias")))


def transformer_forward(params, config, ids, valid, window=None, exemption="row"):
    """
    Batched encoder pass returning the final hidden state at [CLS].

    :param ids: Token ids (B, L), [CLS] at position 0.
    :param valid: Non-pad positions (B, L).
    :param window: Odd scope window or None for full attention.
    :param exemption: CLS exemption variant of the scope mask.
    :return: Tensor (B, width)
    """
    ids = np.asarray(ids)
    L = ids.shape[1]
    if L > params["positions"].shape[0]:
        raise ValueError("Sequence length {} exceeds the {} learned "
                         "positions".format(L, params["positions"].shape[0]))
    X = ad.gather_rows(params["embeddings"], ids)
    X = ad.add(X, ad.gather_rows(params["positions"], np.arange(L)))
    key_mask = padding_mask(valid)
    for i in range(config.layers):
        mask = key_mask
        if window is not None:
            mask = key_mask + build_scope_mask(L, window,
                                               is_last_layer=i == config.layers - 1,
                                               exemption=exemption)
        X = transformer_layer(X, params, "layers.{}.".format(i), config.heads, mask)
    X = ad.layer_norm(X, params["final_norm.gamma"], params["final_norm.beta"])
    return ad.select(X, 0, axis=-2)


def init_transformer_params(config, vocab_size, seed=0):
    rng = make_rng(seed)
    std = config.init_std
    d, f = config.width, config.ffn_width
    params = OrderedDict()
    params["embeddings"] = normal_init(rng, (vocab_size, d), std)
    params["positions"] = normal_init(rng, (config.max_len, d), std)
    for i in range(config.layers):
        prefix = "layers.{}.".format(i)
        params[prefix + "attn_norm.gamma"] = np.ones(d)
        params[prefix + "attn_norm.beta"] = np.zeros(d)
        for name in ("query", "key", "value", "output"):
            params[prefix + name + ".weight"] = normal_init(rng, (d, d), std)
            params[prefix + name + ".bias"] = np.zeros(d)
        params[prefix + "ffn_norm.gamma"] = np.ones(d)
        params[prefix + "ffn_norm.beta"] = np.zeros(d)
        params[prefix + "ffn_in.weight"] = normal_init(rng, (d, f), std)
        params[prefix + "ffn_in.bias"] = np.zeros(f)
        params[prefix + "ffn_out.weight"] = normal_init(rng, (f, d), std)
        params[prefix + "ffn_out.bias"] = np.zeros(d)
    params["final_norm.gamma"] = np.ones(d)
    params["final_norm.beta"] = np.zeros(d)
    return params


def transformer_encode(tokens, params, config, pad_id, window=None, exemption="row"):
    """
    Final [CLS] state of one token sequence.

    :param tokens: TokenSequence with specials.
    :param params: Mapping name -> Tensor.
    :return: ndarray (width,)
    """
    ids, valid, _ = pad_batch([tokens], pad_id)
    with ad.no_grad():
        return transformer_forward(params, config, ids, valid, window,
                                   exemption).data[0]


class TransformerEncoder(EncoderBase):
    """
    Desk-scale attention baseline.
    """
    kind = "transformer"
    supports_scope = True

    def __init__(self, config, vocab, seed=0, lowercase=True):
        super(TransformerEncoder, self).__init__(config, vocab, lowercase)
        for name, data in init_transformer_params(config, len(vocab), seed).items():
            self.add_param(name, data)
        logger.debug("Transformer encoder: %d layers, %d heads, width %d",
                     config.layers, config.heads, config.width)

    @property
    def dim(self):
        return self.config.width

    def forward(self, ids, valid, content, window=None, exemption="row"):
        return transformer_forward(self.params, self.config, ids, valid,
                                   window, exemption)
