import numpy as np

import reslink.autodiff as ad


def contrastive_loss(mention_vecs, name_vecs, temperature):
    """
    In-batch softmax contrastive loss over cosine similarities.

    Row i of `name_vecs` is the positive of mention i; the other rows of
    the batch are its negatives.

    :param mention_vecs: Tensor (B, d).
    :param name_vecs: Tensor (B, d).
    :param temperature: tau > 0; logits are cosine / tau.
    :return: scalar Tensor, mean of -log softmax(logits_i)[i]
    """
    mention_vecs, name_vecs = ad.as_tensor(mention_vecs), ad.as_tensor(name_vecs)
    if mention_vecs.shape != name_vecs.shape or mention_vecs.ndim != 2:
        raise ValueError("contrastive_loss: batches {} and {} do not "
                         "agree".format(mention_vecs.shape, name_vecs.shape))
    if temperature <= 0:
        raise ValueError("contrastive_loss: temperature must be positive")
    m = ad.l2_normalize(mention_vecs)
    n = ad.l2_normalize(name_vecs)
    logits = ad.scale(ad.matmul(m, ad.transpose(n, (1, 0))), 1.0 / temperature)
    return ad.softmax_cross_entropy(logits, np.arange(mention_vecs.shape[0]))
