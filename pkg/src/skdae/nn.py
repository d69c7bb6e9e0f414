"""Minimal dense-network machinery: a reverse-mode tape, sigmoid dense
layers, Xavier initialization, and Adam.

All arithmetic runs in float64.  Trainable parameters are kept on the
float32 grid (every stored value is an exact float32 image) so that
checkpoints, which serialize float32 payloads, round-trip bitwise.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from . import dcor
from .errors import DegenerateGradientError, DimensionMismatchError, TrainingDivergedError


def snap32(x):
    """Round to the nearest float32 and store as float64."""
    return np.asarray(x, dtype=np.float32).astype(np.float64)


class Tensor:
    """Node in the reverse-mode tape.

    ``data`` is always float64.  ``backward()`` on a scalar output
    accumulates gradients into every reachable node's ``grad``.
    """

    __slots__ = ("data", "grad", "_parents", "_backprop")

    def __init__(self, data, parents=(), backprop=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._backprop = backprop

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def backward(self) -> None:
        if self.data.size != 1:
            raise ValueError("backward() expects a scalar output")
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backprop is not None and node.grad is not None:
                node._backprop(node.grad)

    def _accumulate(self, g) -> None:
        self.grad = g if self.grad is None else self.grad + g

    # Scalar arithmetic used when assembling losses.
    def __add__(self, other: "Tensor") -> "Tensor":
        out = Tensor(self.data + other.data, parents=(self, other))

        def backprop(g):
            self._accumulate(g)
            other._accumulate(g)

        out._backprop = backprop
        return out

    def __mul__(self, c: float) -> "Tensor":
        c = float(c)
        out = Tensor(self.data * c, parents=(self,))
        out._backprop = lambda g: self._accumulate(g * c)
        return out

    __rmul__ = __mul__

    def __rsub__(self, c: float) -> "Tensor":
        c = float(c)
        out = Tensor(c - self.data, parents=(self,))
        out._backprop = lambda g: self._accumulate(-g)
        return out


def square(t: Tensor) -> Tensor:
    out = Tensor(t.data * t.data, parents=(t,))
    out._backprop = lambda g: t._accumulate(2.0 * t.data * g)
    return out


def tsum(t: Tensor) -> Tensor:
    """Sum of all entries, as a scalar node."""
    out = Tensor(np.sum(t.data), parents=(t,))
    out._backprop = lambda g: t._accumulate(np.full_like(t.data, float(g)))
    return out


def concat(a: Tensor, b: Tensor) -> Tensor:
    """Column-wise concatenation; backward splits at the same boundary."""
    if a.data.shape[0] != b.data.shape[0]:
        raise DimensionMismatchError(
            f"row counts differ: {a.data.shape[0]} vs {b.data.shape[0]}"
        )
    split = a.data.shape[1]
    out = Tensor(np.concatenate([a.data, b.data], axis=1), parents=(a, b))

    def backprop(g):
        a._accumulate(g[:, :split])
        b._accumulate(g[:, split:])

    out._backprop = backprop
    return out


def mse(pred: Tensor, target) -> Tensor:
    """Mean over the batch of the squared Euclidean error per row."""
    target = np.asarray(target, dtype=np.float64)
    if pred.data.shape != target.shape:
        raise DimensionMismatchError(
            f"shape mismatch: {pred.data.shape} vs {target.shape}"
        )
    n = pred.data.shape[0]
    diff = pred.data - target
    out = Tensor(np.sum(diff * diff) / n, parents=(pred,))
    out._backprop = lambda g: pred._accumulate((2.0 / n) * diff * float(g))
    return out


def dcor_penalty(y: Tensor, x_const) -> Tensor:
    """Distance correlation of ``y`` against a constant sample matrix,
    differentiable through ``y``.

    Raises :class:`DegenerateGradientError` when either side has zero
    distance variance; the caller decides whether to skip the term.
    """
    value, grad = dcor.dcor_with_gradient(x_const, y.data)
    out = Tensor(value, parents=(y,))
    out._backprop = lambda g: y._accumulate(grad * float(g))
    return out


class DenseLayer:
    """Fully connected layer with sigmoid activation.

    ``w`` is out x in, ``b`` is out.  Forward computes
    ``sigmoid(x @ w.T + b)`` row-wise over the batch.
    """

    def __init__(self, w, b):
        w = np.asarray(w, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if w.ndim != 2 or b.shape != (w.shape[0],):
            raise DimensionMismatchError("weight/bias shapes are inconsistent")
        self.w = Tensor(w)
        self.b = Tensor(b)

    @property
    def fan_in(self) -> int:
        return self.w.data.shape[1]

    @property
    def fan_out(self) -> int:
        return self.w.data.shape[0]

    def parameters(self):
        return [self.w, self.b]

    def forward(self, x: Tensor) -> Tensor:
        if x.data.shape[1] != self.fan_in:
            raise DimensionMismatchError(
                f"input has {x.data.shape[1]} columns, layer expects {self.fan_in}"
            )
        w, b = self.w, self.b
        act = expit(x.data @ w.data.T + b.data)
        out = Tensor(act, parents=(x, w, b))

        def backprop(g):
            dz = g * act * (1.0 - act)
            w._accumulate(dz.T @ x.data)
            b._accumulate(dz.sum(axis=0))
            x._accumulate(dz @ w.data)

        out._backprop = backprop
        return out

    __call__ = forward


def xavier_init(shape, rng) -> DenseLayer:
    """Uniform Xavier init: W ~ U(-a, a) with a = sqrt(6/(fan_in+fan_out)),
    zero bias.  ``rng`` is a seed or a numpy Generator."""
    n_out, n_in = shape
    if n_out < 1 or n_in < 1:
        raise ValueError(f"invalid layer shape {shape}")
    rng = np.random.default_rng(rng)
    bound = np.sqrt(6.0 / (n_in + n_out))
    w = snap32(rng.uniform(-bound, bound, size=(n_out, n_in)))
    return DenseLayer(w, np.zeros(n_out))


class Adam:
    """Bias-corrected Adam over a list of parameter tensors.

    Updated parameters are snapped back to the float32 grid; moment
    accumulators stay float64.
    """

    def __init__(self, params, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise TrainingDivergedError("non-finite gradient encountered")
            self._m[i] = self.beta1 * self._m[i] + (1.0 - self.beta1) * g
            self._v[i] = self.beta2 * self._v[i] + (1.0 - self.beta2) * g * g
            m_hat = self._m[i] / (1.0 - self.beta1 ** t)
            v_hat = self._v[i] / (1.0 - self.beta2 ** t)
            p.data = snap32(p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps))
