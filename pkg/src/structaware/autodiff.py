"""A small reverse-mode automatic differentiation engine over numpy float64 arrays.

Every op returns a new :class:`Tensor` that remembers its parents and a
closure mapping the output gradient to parent gradients.  ``backward`` walks
the graph in reverse topological order without recursion, so deep unrolled
graphs (long solver loops) are fine.
"""

from __future__ import annotations

import contextlib
import math

import numpy as np

_GRAD_ENABLED = [True]


@contextlib.contextmanager
def no_grad():
    """Build no graph inside the block (results are constants)."""
    prev = _GRAD_ENABLED[0]
    _GRAD_ENABLED[0] = False
    try:
        yield
    finally:
        _GRAD_ENABLED[0] = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED[0]


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (reverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")
    __array_priority__ = 100  # make ndarray <op> Tensor defer to Tensor

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward = None
        self.name = name

    # construction helpers
    @staticmethod
    def _make(data, parents, backward) -> "Tensor":
        parents = tuple(p for p in parents if isinstance(p, Tensor))
        needs = _GRAD_ENABLED[0] and any(p.requires_grad for p in parents)
        out = Tensor(data, requires_grad=needs)
        if needs:
            out._parents = parents
            out._backward = backward
        return out

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def T(self) -> "Tensor":
        return self.transpose()

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __len__(self):
        return len(self.data)

    # backward pass
    def backward(self, grad=None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed needs a scalar output")
            grad = np.ones_like(self.data)
        # post-order DFS; a node is marked when expanded so every parent finishes first
        order, expanded = [], set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in expanded:
                continue
            expanded.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in expanded and parent.requires_grad:
                    stack.append((parent, False))
        grads = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:  # leaf
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    def zero_grad(self) -> None:
        self.grad = None

    # arithmetic
    def __add__(self, other):
        o = as_tensor(other)
        return Tensor._make(self.data + o.data, (self, o),
                            lambda g: (_unbroadcast(g, self.shape), _unbroadcast(g, o.shape)))

    __radd__ = __add__

    def __sub__(self, other):
        o = as_tensor(other)
        return Tensor._make(self.data - o.data, (self, o),
                            lambda g: (_unbroadcast(g, self.shape), _unbroadcast(-g, o.shape)))

    def __rsub__(self, other):
        return as_tensor(other) - self

    def __mul__(self, other):
        o = as_tensor(other)
        return Tensor._make(self.data * o.data, (self, o),
                            lambda g: (_unbroadcast(g * o.data, self.shape),
                                       _unbroadcast(g * self.data, o.shape)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = as_tensor(other)
        return Tensor._make(self.data / o.data, (self, o),
                            lambda g: (_unbroadcast(g / o.data, self.shape),
                                       _unbroadcast(-g * self.data / o.data ** 2, o.shape)))

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __neg__(self):
        return Tensor._make(-self.data, (self,), lambda g: (-g,))

    def __pow__(self, k: float):
        if isinstance(k, Tensor):
            raise TypeError("only constant exponents are supported")
        return Tensor._make(self.data ** k, (self,),
                            lambda g: (g * k * self.data ** (k - 1),))

    def __matmul__(self, other):
        o = as_tensor(other)

        def back(g):
            ga = g @ np.swapaxes(o.data, -1, -2) if o.ndim > 1 else np.multiply.outer(g, o.data)
            gb = np.swapaxes(self.data, -1, -2) @ g if self.ndim > 1 else np.multiply.outer(self.data, g)
            return _unbroadcast(ga, self.shape), _unbroadcast(gb, o.shape)

        return Tensor._make(self.data @ o.data, (self, o), back)

    def __rmatmul__(self, other):
        return as_tensor(other) @ self

    # shape ops
    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return Tensor._make(self.data.reshape(shape), (self,),
                            lambda g: (g.reshape(self.shape),))

    def transpose(self, *axes) -> "Tensor":
        if not axes:
            axes = tuple(range(self.ndim))[::-1]
        inv = np.argsort(axes)
        return Tensor._make(self.data.transpose(axes), (self,),
                            lambda g: (g.transpose(inv),))

    def swapaxes(self, a: int, b: int) -> "Tensor":
        axes = list(range(self.ndim))
        axes[a], axes[b] = axes[b], axes[a]
        return self.transpose(*axes)

    def __getitem__(self, idx):
        if isinstance(idx, Tensor):
            raise TypeError("index with ints, slices or integer arrays")

        def back(g):
            out = np.zeros_like(self.data)
            np.add.at(out, idx, g)
            return (out,)

        return Tensor._make(self.data[idx], (self,), back)

    # reductions
    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        def back(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, self.shape).copy(),)

        return Tensor._make(self.data.sum(axis=axis, keepdims=keepdims), (self,), back)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        count = self.data.size if axis is None else np.prod(
            [self.shape[a] for a in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    def _extreme(self, fn, axis, keepdims):
        out = fn(self.data, axis=axis, keepdims=True)

        def back(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            elif axis is None:
                g = np.reshape(g, (1,) * self.ndim)
            # ties route the gradient to the first extremal entry
            hit = self.data == out
            first = np.cumsum(hit, axis=axis).reshape(self.shape) == 1 if axis is not None \
                else (np.cumsum(hit.ravel()) == 1).reshape(self.shape)
            return (np.where(hit & first, g, 0.0),)

        value = out if keepdims else (np.squeeze(out, axis=axis) if axis is not None
                                      else out.reshape(()))
        return Tensor._make(value, (self,), back)

    def max(self, axis=None, keepdims: bool = False) -> "Tensor":
        return self._extreme(np.max, axis, keepdims)

    def min(self, axis=None, keepdims: bool = False) -> "Tensor":
        return self._extreme(np.min, axis, keepdims)

    # elementwise
    def exp(self) -> "Tensor":
        out = np.exp(self.data)
        return Tensor._make(out, (self,), lambda g: (g * out,))

    def log(self) -> "Tensor":
        return Tensor._make(np.log(self.data), (self,), lambda g: (g / self.data,))

    def sqrt(self) -> "Tensor":
        out = np.sqrt(self.data)
        return Tensor._make(out, (self,), lambda g: (g * 0.5 / out,))

    def tanh(self) -> "Tensor":
        out = np.tanh(self.data)
        return Tensor._make(out, (self,), lambda g: (g * (1.0 - out ** 2),))

    def gelu(self) -> "Tensor":
        """tanh approximation; smooth everywhere, unlike ReLU."""
        x = self.data
        c = math.sqrt(2.0 / math.pi)
        inner = c * (x + 0.044715 * x ** 3)
        t = np.tanh(inner)
        out = 0.5 * x * (1.0 + t)

        def back(g):
            dinner = c * (1.0 + 3 * 0.044715 * x ** 2)
            return (g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * dinner),)

        return Tensor._make(out, (self,), back)

    def logsumexp(self, axis: int = -1, keepdims: bool = False) -> "Tensor":
        m = self.data.max(axis=axis, keepdims=True)
        s = np.exp(self.data - m).sum(axis=axis, keepdims=True)
        lse = m + np.log(s)

        def back(g):
            if not keepdims:
                g = np.expand_dims(g, axis)
            return (g * np.exp(self.data - lse),)

        return Tensor._make(lse if keepdims else np.squeeze(lse, axis), (self,), back)

    def softmax(self, axis: int = -1) -> "Tensor":
        z = self.data - self.data.max(axis=axis, keepdims=True)
        e = np.exp(z)
        out = e / e.sum(axis=axis, keepdims=True)

        def back(g):
            return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

        return Tensor._make(out, (self,), back)

    def log_softmax(self, axis: int = -1) -> "Tensor":
        z = self.data - self.data.max(axis=axis, keepdims=True)
        out = z - np.log(np.exp(z).sum(axis=axis, keepdims=True))

        def back(g):
            return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

        return Tensor._make(out, (self,), back)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data, name: str | None = None) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def back(g):
        return tuple(np.split(g, sizes, axis=axis))

    return Tensor._make(np.concatenate([t.data for t in tensors], axis=axis), tensors, back)


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]

    def back(g):
        return tuple(np.moveaxis(g, axis, 0))

    return Tensor._make(np.stack([t.data for t in tensors], axis=axis), tensors, back)


def where(mask, a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    mask = np.asarray(mask, dtype=bool)
    return Tensor._make(np.where(mask, a.data, b.data), (a, b),
                        lambda g: (_unbroadcast(np.where(mask, g, 0.0), a.shape),
                                   _unbroadcast(np.where(mask, 0.0, g), b.shape)))


def custom_op(data, parents, backward) -> Tensor:
    """Wrap a numpy result whose VJP is supplied by the caller."""
    return Tensor._make(data, parents, backward)
