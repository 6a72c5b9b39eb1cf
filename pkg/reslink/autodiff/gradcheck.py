from collections import OrderedDict

import numpy as np

from reslink.constants import FD_ATOL, FD_RTOL, FD_STEP

from .tensor import Graph, no_grad


class GradCheckReport(object):
    """
    Outcome of a finite-difference check, one entry per checked input.

    Each entry holds the maximum relative error
    |a - n| / (|a| + |n| + 1e-12), the maximum absolute error, and whether
    every element passed (relative error within tol, or absolute error within
    atol for elements whose true gradient is numerically zero).
    """

    def __init__(self, tol, atol):
        self.tol = tol
        self.atol = atol
        self.entries = OrderedDict()

    def add(self, name, analytic, numeric):
        diff = np.abs(analytic - numeric)
        rel = diff / (np.abs(analytic) + np.abs(numeric) + 1e-12)
        ok = np.all((rel <= self.tol) | (diff <= self.atol))
        self.entries[name] = {
            "max_rel_error": float(rel.max()) if rel.size else 0.0,
            "max_abs_error": float(diff.max()) if diff.size else 0.0,
            "passed": bool(ok),
        }

    @property
    def passed(self):
        return all(entry["passed"] for entry in self.entries.values())

    def failures(self):
        return [name for name, entry in self.entries.items() if not entry["passed"]]

    def __getitem__(self, name):
        return self.entries[name]

    def __repr__(self):
        lines = ["GradCheckReport(passed={})".format(self.passed)]
        for name, entry in self.entries.items():
            lines.append("  {}: rel={:.3e} abs={:.3e} {}".format(
                name, entry["max_rel_error"], entry["max_abs_error"],
                "ok" if entry["passed"] else "FAIL"))
        return "\n".join(lines)


def numeric_gradient(func, inputs, target, h=FD_STEP):
    """
    Central finite differences of a scalar function with respect to one input.

    :param func: Callable taking the input tensors, returning a scalar Tensor.
    :param inputs: List of Tensors passed to func.
    :param target: The Tensor (one of inputs) to perturb in place.
    :param h: Step.
    :return: ndarray shaped like target.
    """
    grad = np.zeros_like(target.data)
    flat = target.data.reshape(-1)
    out = grad.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            plus = func(*inputs).item()
            flat[i] = original - h
            minus = func(*inputs).item()
            flat[i] = original
            out[i] = (plus - minus) / (2.0 * h)
    return grad


def finite_difference_check(func, inputs, h=FD_STEP, tol=FD_RTOL, atol=FD_ATOL):
    """
    Compare reverse-mode gradients with central finite differences.

    Inputs should avoid non-differentiable points (no ReLU pre-activation or
    max-pooling tie within h).

    :param func: Callable taking the input tensors, returning a scalar Tensor.
    :param inputs: List of Tensors; only grad-enabled ones are checked.
    :param h: Finite-difference step.
    :param tol: Relative tolerance.
    :param atol: Absolute floor for numerically-zero gradients.
    :return: GradCheckReport
    """
    for tensor in inputs:
        tensor.zero_grad()
    with Graph() as graph:
        output = func(*inputs)
    analytic = graph.backward(output) if output.grad_enabled else {}

    report = GradCheckReport(tol, atol)
    for position, tensor in enumerate(inputs):
        if not tensor.grad_enabled:
            continue
        a = analytic.get(tensor)
        if a is None:
            a = np.zeros_like(tensor.data)
        n = numeric_gradient(func, inputs, tensor, h)
        report.add(tensor.name or "input{}".format(position), a, n)
        tensor.zero_grad()
    return report
