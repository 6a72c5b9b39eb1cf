import threading

import numpy as np

from reslink.util import InvariantError


# Graph stack per thread; a None entry disables recording.
_local = threading.local()


def _graph_stack():
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


def current_graph():
    """The graph ops record into on this thread, or None."""
    stack = _graph_stack()
    return stack[-1] if stack else None


class Tensor(object):
    """
    Dense float array with optional gradient participation.

    Tensors produced by a recorded op remember their node so the graph can
    tell leaves from intermediates.
    """

    def __init__(self, data, grad_enabled=False, name=None, dtype=np.float64):
        """
        :param data: Array-like payload, stored row-major.
        :param grad_enabled: Whether gradients flow into this tensor.
        :param name: Optional label used in reports and checkpoints.
        :param dtype: np.float64 for training, np.float32 allowed for inference.
        """
        data = np.asarray(data, dtype=dtype)
        if not data.flags["C_CONTIGUOUS"]:
            data = np.ascontiguousarray(data)
        self.data = data
        self.grad_enabled = bool(grad_enabled)
        self.grad = None
        self.name = name
        self._node = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self):
        return self.data

    def item(self):
        if self.data.size != 1:
            raise ValueError("item() needs a single element, tensor has shape "
                             "{}".format(self.shape))
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def is_leaf(self):
        return self._node is None

    def __repr__(self):
        label = " {}".format(self.name) if self.name else ""
        return "<Tensor{} shape={} grad_enabled={}>".format(
            label, self.shape, self.grad_enabled)


class Node(object):
    """One executed primitive: inputs, output and the vector-Jacobian product."""

    def __init__(self, op, inputs, output, backward):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.backward = backward


class Graph(object):
    """
    Tape of executed primitives for one forward trace.

    Used as a context manager: every op executed inside the block whose
    inputs carry gradients is appended in execution order, which is a
    topological order by construction.
    """

    def __init__(self):
        self.nodes = []
        self._consumed = False

    def __enter__(self):
        _graph_stack().append(self)
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        _graph_stack().pop()
        return False

    def __len__(self):
        return len(self.nodes)

    def record(self, node):
        if self._consumed:
            raise InvariantError("Graph already went through backward; "
                                 "start a new trace.")
        self.nodes.append(node)

    def backward(self, output):
        """
        Reverse-mode pass from a scalar output.

        Gradients of tensors used several times are summed. Leaf gradients are
        accumulated into `tensor.grad` and also returned.

        :param output: Scalar Tensor produced inside this graph.
        :return: dict mapping each grad-enabled leaf Tensor to its gradient.
        """
        if output.size != 1:
            raise InvariantError("backward needs a scalar output, got shape "
                                 "{}".format(output.shape))
        if self._consumed:
            raise InvariantError("Graph already went through backward.")
        self._consumed = True

        grads = {id(output): np.ones_like(output.data)}
        leaves = {}
        if output.grad_enabled and output.is_leaf():
            leaves[id(output)] = output

        for node in reversed(self.nodes):
            upstream = grads.pop(id(node.output), None)
            if upstream is None:
                continue
            input_grads = node.backward(upstream)
            for tensor, grad in zip(node.inputs, input_grads):
                if grad is None or not tensor.grad_enabled:
                    continue
                key = id(tensor)
                if key in grads:
                    grads[key] = grads[key] + grad
                else:
                    grads[key] = grad
                if tensor.is_leaf():
                    leaves[key] = tensor

        result = {}
        for key, tensor in leaves.items():
            grad = grads[key]
            tensor.grad = grad if tensor.grad is None else tensor.grad + grad
            result[tensor] = grad
        return result


class no_grad(object):
    """Context manager that suspends recording on this thread."""

    def __enter__(self):
        _graph_stack().append(None)
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        _graph_stack().pop()
        return False


def as_tensor(value):
    """Wrap constants; tensors pass through untouched."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def apply_op(op, data, inputs, backward):
    """
    Wrap a primitive's forward result and record it on the active graph.

    :param op: Primitive name, used in error messages.
    :param data: Forward result as an ndarray.
    :param inputs: Input tensors in the order `backward` returns gradients.
    :param backward: Callable mapping the output gradient to a list of input
        gradients (None for inputs without gradients).
    :return: Output Tensor.
    """
    if not np.all(np.isfinite(data)):
        raise InvariantError("Non-finite values in the output of "
                             "{}".format(op))
    out = Tensor(data, dtype=data.dtype)
    graph = current_graph()
    if graph is not None and any(t.grad_enabled for t in inputs):
        out.grad_enabled = True
        node = Node(op, inputs, out, backward)
        out._node = node
        graph.record(node)
    return out
