"""
Scaled dot-product attention with additive masks, and the scope mask that
restricts each query to a window of neighbouring positions.
"""
import numpy as np

import reslink.autodiff as ad
from reslink.util import ConfigError

EXEMPTIONS = ("row", "row_and_column")


def build_scope_mask(L, w, is_last_layer, cls_index=0, exemption="row"):
    """
    Additive attention mask limiting position i to keys j with
    |i - j| <= w // 2.

    At the last layer the [CLS] query row is released so [CLS] attends to
    every position. With exemption="row_and_column" every query may also
    attend to [CLS] at the last layer.

    :param L: Sequence length.
    :param w: Odd window size; None means unrestricted.
    :param is_last_layer: Whether the mask is for the final layer.
    :param cls_index: Position of [CLS].
    :param exemption: "row" or "row_and_column".
    :return: float array (L, L) with entries 0 or -inf
    """
    if exemption not in EXEMPTIONS:
        raise ConfigError("Unknown CLS exemption {!r}, expected one of "
                          "{}".format(exemption, ", ".join(EXEMPTIONS)))
    if w is None:
        return np.zeros((L, L))
    if w < 1 or w % 2 == 0:
        raise ConfigError("Scope window must be an odd positive integer, "
                          "got {}".format(w))
    pos = np.arange(L)
    distance = np.abs(pos[:, np.newaxis] - pos[np.newaxis, :])
    mask = np.where(distance <= w // 2, 0.0, -np.inf)
    if is_last_layer and 0 <= cls_index < L:
        mask[cls_index, :] = 0.0
        if exemption == "row_and_column":
            mask[:, cls_index] = 0.0
    return mask


def padding_mask(valid):
    """
    Key mask hiding pad positions; a pad query still attends to itself so
    no row is empty.

    :param valid: Boolean array (B, L).
    :return: float array (B, 1, L, L)
    """
    valid = np.asarray(valid, dtype=bool)
    L = valid.shape[-1]
    allowed = valid[:, np.newaxis, :] | np.eye(L, dtype=bool)[np.newaxis]
    return np.where(allowed, 0.0, -np.inf)[:, np.newaxis]


def attention(Q, K, V, mask=None):
    """
    masked_softmax(Q K^T / sqrt(p) + mask) V, rows independent.

    :param Q: Tensor (..., L, p).
    :param K: Tensor (..., L, p).
    :param V: Tensor (..., L, p).
    :param mask: Additive mask broadcastable to (..., L, L), or None.
    :return: Tensor (..., L, p)
    """
    Q, K, V = ad.as_tensor(Q), ad.as_tensor(K), ad.as_tensor(V)
    if Q.shape != K.shape or K.shape[:-1] != V.shape[:-1]:
        raise ValueError("attention: Q {}, K {}, V {} do not agree".format(
            Q.shape, K.shape, V.shape))
    p = Q.shape[-1]
    axes = tuple(range(K.ndim - 2)) + (K.ndim - 1, K.ndim - 2)
    logits = ad.scale(ad.matmul(Q, ad.transpose(K, axes)), 1.0 / np.sqrt(p))
    weights = ad.masked_softmax(logits, mask)
    return ad.matmul(weights, V)
