from collections import OrderedDict

import numpy as np


class AdamState(object):
    """
    First and second moments per trainable parameter, plus the step count.
    """

    def __init__(self, params):
        """
        :param params: Mapping name -> Tensor of the parameters to update.
            Parameters absent here are never touched.
        """
        self.step = 0
        self.m = OrderedDict((name, np.zeros_like(t.data)) for name, t in params.items())
        self.v = OrderedDict((name, np.zeros_like(t.data)) for name, t in params.items())

    def __contains__(self, name):
        return name in self.m


def adam_step(params, grads, state, config):
    """
    One Adam update with bias correction, in place.

    :param params: Mapping name -> Tensor; frozen entries may be present and
        are skipped when the state does not track them.
    :param grads: Mapping name -> gradient array; missing entries count as 0.
    :param state: AdamState.
    :param config: Object with learning_rate, beta1, beta2, eps.
    :return: (params, state)
    """
    state.step += 1
    t = state.step
    lr, b1, b2, eps = config.learning_rate, config.beta1, config.beta2, config.eps
    correction1 = 1.0 - b1 ** t
    correction2 = 1.0 - b2 ** t
    for name, m in state.m.items():
        tensor = params[name]
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(tensor.data)
        if g.shape != tensor.shape:
            raise ValueError("adam_step: gradient {} of {} does not match "
                             "parameter {}".format(g.shape, name, tensor.shape))
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        tensor.data -= lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
    return params, state
