"""
Differentiable primitives.

Every primitive takes Tensors (constants are wrapped), computes its forward
result with numpy and registers a vector-Jacobian product on the active graph.
Leading batch dimensions are allowed where noted; there is no general
broadcasting.
"""
import numpy as np
from scipy.special import logsumexp

from reslink.util import InvariantError

from .tensor import apply_op, as_tensor


def _sum_to_shape(grad, shape):
    """Reduce a gradient over leading axes added by a batched operand."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    return grad


def add(a, b):
    """
    Elementwise sum. `b` may omit leading dimensions of `a`.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[a.ndim - b.ndim:] != b.shape:
        raise ValueError("add: shapes {} and {} do not "
                         "agree".format(a.shape, b.shape))

    def backward(g):
        return [g, _sum_to_shape(g, b.shape)]

    return apply_op("add", a.data + b.data, [a, b], backward)


def mul(a, b):
    """Elementwise product of two tensors of the same shape."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ValueError("mul: shapes {} and {} differ".format(a.shape, b.shape))
    return apply_op("mul", a.data * b.data, [a, b],
                    lambda g: [g * b.data, g * a.data])


def scale(x, factor):
    """Multiply by a Python scalar."""
    x = as_tensor(x)
    factor = float(factor)
    return apply_op("scale", x.data * factor, [x], lambda g: [g * factor])


def mask_rows(x, valid):
    """
    Zero the rows (second to last axis) where `valid` is False.

    :param x: Tensor (..., L, d).
    :param valid: Boolean array (..., L).
    """
    x = as_tensor(x)
    keep = np.asarray(valid, dtype=x.dtype)[..., np.newaxis]
    if keep.shape[:-1] != x.shape[:-1]:
        raise ValueError("mask_rows: mask {} does not match {}".format(
            np.shape(valid), x.shape))
    return apply_op("mask_rows", x.data * keep, [x], lambda g: [g * keep])


def linear(x, W, b=None):
    """
    Position-wise affine map out[i] = x[i]·W + b.

    :param x: Tensor (..., d_in).
    :param W: Tensor (d_in, d_out).
    :param b: Tensor (d_out,) or None.
    :return: Tensor (..., d_out)
    """
    x, W = as_tensor(x), as_tensor(W)
    inputs = [x, W]
    if W.ndim != 2 or x.shape[-1] != W.shape[0]:
        raise ValueError("linear: x {} and W {} have mismatched inner "
                         "dimensions".format(x.shape, W.shape))
    out = x.data @ W.data
    if b is not None:
        b = as_tensor(b)
        if b.shape != (W.shape[1],):
            raise ValueError("linear: bias {} does not match W {}".format(
                b.shape, W.shape))
        out = out + b.data
        inputs.append(b)
    d_in, d_out = W.shape

    def backward(g):
        g2 = g.reshape(-1, d_out)
        grads = [g @ W.data.T, x.data.reshape(-1, d_in).T @ g2]
        if b is not None:
            grads.append(g2.sum(axis=0))
        return grads

    return apply_op("linear", out, inputs, backward)


def matmul(a, b):
    """
    Batched matrix product. `b` is either batched like `a` or a plain matrix.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ValueError("matmul: shapes {} and {} do not "
                         "agree".format(a.shape, b.shape))
    if b.ndim > 2 and a.shape[:-2] != b.shape[:-2]:
        raise ValueError("matmul: batch dimensions {} and {} "
                         "differ".format(a.shape, b.shape))

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        if b.ndim == 2:
            gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        else:
            gb = np.swapaxes(a.data, -1, -2) @ g
        return [ga, gb]

    return apply_op("matmul", a.data @ b.data, [a, b], backward)


def relu(x):
    """
    max(0, x). The subgradient at exactly 0 is 0.
    """
    x = as_tensor(x)
    active = x.data > 0
    return apply_op("relu", np.where(active, x.data, 0.0), [x],
                    lambda g: [g * active])


def tanh(x):
    x = as_tensor(x)
    out = np.tanh(x.data)
    return apply_op("tanh", out, [x], lambda g: [g * (1.0 - out * out)])


def reshape(x, shape):
    x = as_tensor(x)
    original = x.shape
    return apply_op("reshape", x.data.reshape(shape), [x],
                    lambda g: [g.reshape(original)])


def transpose(x, axes):
    x = as_tensor(x)
    inverse = np.argsort(axes)
    return apply_op("transpose", np.transpose(x.data, axes), [x],
                    lambda g: [np.transpose(g, inverse)])


def concat(tensors, axis=-1):
    """Concatenate along one axis."""
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return np.split(g, splits, axis=axis)

    return apply_op("concat", np.concatenate([t.data for t in tensors], axis=axis),
                    tensors, backward)


def select(x, index, axis=-2):
    """Take one position along `axis`, dropping that axis."""
    x = as_tensor(x)
    axis = axis % x.ndim

    def backward(g):
        full = np.zeros_like(x.data)
        slicer = [slice(None)] * x.ndim
        slicer[axis] = index
        full[tuple(slicer)] = g
        return [full]

    return apply_op("select", np.take(x.data, index, axis=axis), [x], backward)


def gather_rows(table, ids):
    """
    Embedding lookup: out[..., :] = table[ids[...], :].

    :param table: Tensor (V, d).
    :param ids: Integer array of any shape.
    """
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ValueError("gather_rows: id out of range for a table of {} "
                         "rows".format(table.shape[0]))

    def backward(g):
        if not table.grad_enabled:
            return [None]
        full = np.zeros_like(table.data)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, table.shape[1]))
        return [full]

    return apply_op("gather_rows", table.data[ids], [table], backward)


def conv1d_same(x, kernel, bias):
    """
    Same-length 1-d convolution with zero padding.

    Output position t sums kernel tap j against input position t - (k-1)/2 + j.

    :param x: Tensor (..., L, d_in).
    :param kernel: Tensor (k, d_in, c), k odd.
    :param bias: Tensor (c,).
    :return: Tensor (..., L, c)
    """
    x, kernel, bias = as_tensor(x), as_tensor(kernel), as_tensor(bias)
    k, d_in, c = kernel.shape
    if k % 2 == 0:
        raise ValueError("conv1d_same: kernel width must be odd, got {}".format(k))
    if x.shape[-1] != d_in or bias.shape != (c,):
        raise ValueError("conv1d_same: x {}, kernel {}, bias {} do not "
                         "agree".format(x.shape, kernel.shape, bias.shape))
    length = x.shape[-2]
    if length < 1:
        raise ValueError("conv1d_same: empty sequence")
    pad = (k - 1) // 2
    lead = x.shape[:-2]
    widths = [(0, 0)] * len(lead) + [(pad, pad), (0, 0)]
    padded = np.pad(x.data, widths)
    cols = np.stack([padded[..., j:j + length, :] for j in range(k)], axis=-2)
    cols2 = cols.reshape(-1, k * d_in)
    weight2 = kernel.data.reshape(k * d_in, c)
    out = (cols2 @ weight2).reshape(lead + (length, c)) + bias.data

    def backward(g):
        g2 = g.reshape(-1, c)
        g_kernel = (cols2.T @ g2).reshape(k, d_in, c)
        g_bias = g2.sum(axis=0)
        g_cols = (g2 @ weight2.T).reshape(lead + (length, k, d_in))
        g_padded = np.zeros_like(padded)
        for j in range(k):
            g_padded[..., j:j + length, :] += g_cols[..., j, :]
        return [g_padded[..., pad:pad + length, :], g_kernel, g_bias]

    return apply_op("conv1d_same", out, [x, kernel, bias], backward)


def masked_softmax(logits, mask=None):
    """
    Softmax over the last axis of logits + mask.

    :param logits: Tensor (..., n).
    :param mask: Additive constant with entries in {0, -inf}, broadcastable to
        the logits; None means no masking.
    :return: Tensor of probabilities; masked entries are exactly 0.
    """
    logits = as_tensor(logits)
    z = logits.data if mask is None else logits.data + np.asarray(mask)
    if np.any(np.all(np.isneginf(z), axis=-1)):
        raise InvariantError("masked_softmax: a row has every entry masked")
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return [p * (g - (g * p).sum(axis=-1, keepdims=True))]

    return apply_op("masked_softmax", p, [logits], backward)


def masked_max(x, valid):
    """
    Per-channel maximum over valid positions (second to last axis).

    :param x: Tensor (..., L, d).
    :param valid: Boolean array (..., L) with at least one True per sequence.
    :return: Tensor (..., d)
    """
    x = as_tensor(x)
    valid = np.asarray(valid, dtype=bool)
    if valid.shape != x.shape[:-1]:
        raise ValueError("masked_max: mask {} does not match {}".format(
            valid.shape, x.shape))
    if not np.all(valid.any(axis=-1)):
        raise ValueError("masked_max: a sequence has no valid positions")
    held = np.where(valid[..., np.newaxis], x.data, -np.inf)
    winner = np.argmax(held, axis=-2)
    out = np.take_along_axis(x.data, winner[..., np.newaxis, :], axis=-2)
    out = np.squeeze(out, axis=-2)

    def backward(g):
        full = np.zeros_like(x.data)
        np.put_along_axis(full, winner[..., np.newaxis, :],
                          g[..., np.newaxis, :], axis=-2)
        return [full]

    return apply_op("masked_max", out, [x], backward)


def layer_norm(x, gamma, beta, eps=1e-5):
    """Normalize the last axis, then scale and shift."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv_std
    out = xhat * gamma.data + beta.data
    d = x.shape[-1]

    def backward(g):
        g_xhat = g * gamma.data
        g_x = inv_std * (g_xhat - g_xhat.mean(axis=-1, keepdims=True)
                         - xhat * (g_xhat * xhat).mean(axis=-1, keepdims=True))
        g_gamma = (g * xhat).reshape(-1, d).sum(axis=0)
        g_beta = g.reshape(-1, d).sum(axis=0)
        return [g_x, g_gamma, g_beta]

    return apply_op("layer_norm", out, [x, gamma, beta], backward)


def l2_normalize(x):
    """Scale each row (last axis) to unit L2 norm."""
    x = as_tensor(x)
    norm = np.sqrt((x.data * x.data).sum(axis=-1, keepdims=True))
    if np.any(norm == 0):
        raise ValueError("l2_normalize: zero vector has no direction")
    out = x.data / norm

    def backward(g):
        return [(g - out * (g * out).sum(axis=-1, keepdims=True)) / norm]

    return apply_op("l2_normalize", out, [x], backward)


def reduce_sum(x):
    x = as_tensor(x)
    shape = x.shape
    return apply_op("reduce_sum", np.asarray(x.data.sum()), [x],
                    lambda g: [np.full(shape, float(g))])


def weighted_sum(x, weights):
    """Sum of x * weights for a constant weight array of the same shape."""
    x = as_tensor(x)
    weights = np.asarray(weights, dtype=x.dtype)
    if weights.shape != x.shape:
        raise ValueError("weighted_sum: weights {} do not match {}".format(
            weights.shape, x.shape))
    return apply_op("weighted_sum", np.asarray((x.data * weights).sum()), [x],
                    lambda g: [float(g) * weights])


def softmax_cross_entropy(logits, targets):
    """
    Mean over rows of -log softmax(logits_i)[targets_i].

    :param logits: Tensor (B, C).
    :param targets: Integer array (B,).
    :return: scalar Tensor
    """
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    rows = np.arange(logits.shape[0])
    lse = logsumexp(logits.data, axis=1)
    loss = np.mean(lse - logits.data[rows, targets])

    def backward(g):
        probs = np.exp(logits.data - lse[:, np.newaxis])
        probs[rows, targets] -= 1.0
        return [float(g) * probs / logits.shape[0]]

    return apply_op("softmax_cross_entropy", np.asarray(loss), [logits], backward)
