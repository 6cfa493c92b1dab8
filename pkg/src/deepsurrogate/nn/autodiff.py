"""Reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps a float64 array and records the operation that produced it;
``backward`` runs reverse accumulation over the recorded graph in topological
order. The op set is exactly what the residual losses need: broadcasting
elementwise arithmetic, matmul/transpose/reshape/slicing, tanh, exp, log,
sqrt, softplus, and sum/mean reductions.

The module-level math helpers (tanh, exp, ...) dispatch on type, so the same
forward code runs on plain numpy arrays (fast, untraced) and on Tensors
(traced). That keeps the jet propagation and every loss a single
implementation for both paths.
"""
from __future__ import annotations

import numpy as np


class NumericalError(RuntimeError):
    """A computation produced a non-finite value where the contract forbids it."""


def _unbroadcast(grad, shape):
    # Reverse numpy broadcasting: sum the gradient down to the parent's shape.
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(ax for ax, n in enumerate(shape) if n == 1 and grad.shape[ax] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """Node in the computation graph. Leaves have no parents."""

    __slots__ = ("data", "grad", "_backward", "_parents")
    __array_ufunc__ = None  # make ndarray <op> Tensor defer to our reflected ops

    def __init__(self, data, _parents=()):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._backward = None
        self._parents = _parents

    # -- graph bookkeeping -------------------------------------------------

    def _accum(self, g):
        if self.grad is None:
            self.grad = np.zeros(self.data.shape, dtype=np.float64)
        self.grad += _unbroadcast(g, self.data.shape)

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        if not np.isfinite(self.data):
            raise NumericalError("loss value is not finite")
        topo, visited, stack = [], set(), [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.ones(self.data.shape, dtype=np.float64)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- elementwise arithmetic -------------------------------------------

    def __add__(self, other):
        if isinstance(other, Tensor):
            out = Tensor(self.data + other.data, (self, other))

            def back(g):
                self._accum(g)
                other._accum(g)
        else:
            out = Tensor(self.data + other, (self,))

            def back(g):
                self._accum(g)
        out._backward = back
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor(-self.data, (self,))
        out._backward = lambda g: self._accum(-g)
        return out

    def __sub__(self, other):
        return self + (-other if isinstance(other, Tensor) else -np.asarray(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Tensor):
            out = Tensor(self.data * other.data, (self, other))

            def back(g):
                self._accum(g * other.data)
                other._accum(g * self.data)
        else:
            const = np.asarray(other, dtype=np.float64)
            out = Tensor(self.data * const, (self,))

            def back(g):
                self._accum(g * const)
        out._backward = back
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            out = Tensor(self.data / other.data, (self, other))

            def back(g):
                self._accum(g / other.data)
                other._accum(-g * self.data / (other.data * other.data))
        else:
            const = np.asarray(other, dtype=np.float64)
            out = Tensor(self.data / const, (self,))

            def back(g):
                self._accum(g / const)
        out._backward = back
        return out

    def __rtruediv__(self, other):
        const = np.asarray(other, dtype=np.float64)
        out = Tensor(const / self.data, (self,))
        out._backward = lambda g: self._accum(-g * const / (self.data * self.data))
        return out

    def __pow__(self, p):
        p = float(p)
        out = Tensor(self.data ** p, (self,))
        out._backward = lambda g: self._accum(g * p * self.data ** (p - 1.0))
        return out

    # -- linear algebra / shape -------------------------------------------

    def __matmul__(self, other):
        if isinstance(other, Tensor):
            out = Tensor(self.data @ other.data, (self, other))

            def back(g):
                self._accum(g @ other.data.T)
                other._accum(self.data.T @ g)
        else:
            const = np.asarray(other, dtype=np.float64)
            out = Tensor(self.data @ const, (self,))

            def back(g):
                self._accum(g @ const.T)
        out._backward = back
        return out

    def __rmatmul__(self, other):
        const = np.asarray(other, dtype=np.float64)
        out = Tensor(const @ self.data, (self,))
        out._backward = lambda g: self._accum(const.T @ g)
        return out

    @property
    def T(self):
        out = Tensor(self.data.T, (self,))
        out._backward = lambda g: self._accum(g.T)
        return out

    @property
    def shape(self):
        return self.data.shape

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.data.shape
        out = Tensor(self.data.reshape(shape), (self,))
        out._backward = lambda g: self._accum(g.reshape(old))
        return out

    def __getitem__(self, idx):
        out = Tensor(self.data[idx], (self,))

        def back(g):
            if self.grad is None:
                self.grad = np.zeros(self.data.shape, dtype=np.float64)
            np.add.at(self.grad, idx, g)
        out._backward = back
        return out

    # -- transcendental ----------------------------------------------------

    def tanh(self):
        t = np.tanh(self.data)
        out = Tensor(t, (self,))
        out._backward = lambda g: self._accum(g * (1.0 - t * t))
        return out

    def exp(self):
        e = np.exp(self.data)
        out = Tensor(e, (self,))
        out._backward = lambda g: self._accum(g * e)
        return out

    def log(self):
        out = Tensor(np.log(self.data), (self,))
        out._backward = lambda g: self._accum(g / self.data)
        return out

    def sqrt(self):
        r = np.sqrt(self.data)
        out = Tensor(r, (self,))
        out._backward = lambda g: self._accum(g * 0.5 / r)
        return out

    def softplus(self):
        out = Tensor(np.logaddexp(0.0, self.data), (self,))

        def back(g):
            with np.errstate(over="ignore"):
                sig = 1.0 / (1.0 + np.exp(-self.data))
            self._accum(g * sig)
        out._backward = back
        return out

    # -- reductions --------------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        out = Tensor(self.data.sum(axis=axis, keepdims=keepdims), (self,))
        shape = self.data.shape

        def back(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self._accum(np.broadcast_to(g, shape))
        out._backward = back
        return out

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"


# -- dual-dispatch helpers: same code path for ndarray and Tensor ----------

def tanh(x):
    return x.tanh() if isinstance(x, Tensor) else np.tanh(x)


def exp(x):
    return x.exp() if isinstance(x, Tensor) else np.exp(x)


def log(x):
    return x.log() if isinstance(x, Tensor) else np.log(x)


def sqrt(x):
    return x.sqrt() if isinstance(x, Tensor) else np.sqrt(x)


def softplus(x):
    return x.softplus() if isinstance(x, Tensor) else np.logaddexp(0.0, x)


def square(x):
    return x * x


def vsum(x, axis=None):
    return x.sum(axis=axis) if isinstance(x, Tensor) else np.sum(x, axis=axis)


def vmean(x, axis=None):
    return x.mean(axis=axis) if isinstance(x, Tensor) else np.mean(x, axis=axis)


def value_of(x):
    """The plain numpy value behind x, whether traced or not."""
    return x.data if isinstance(x, Tensor) else np.asarray(x)


def gradient(loss, leaves):
    """Gradient of a scalar loss Tensor w.r.t. each leaf, as numpy arrays.

    Leaves untouched by the loss get zero gradients of matching shape.
    """
    if not isinstance(loss, Tensor):
        raise TypeError("loss must be a traced Tensor")
    loss.backward()
    return [leaf.grad if leaf.grad is not None
            else np.zeros(leaf.data.shape, dtype=np.float64)
            for leaf in leaves]
