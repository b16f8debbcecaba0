"""A small reverse-mode automatic differentiation tape over numpy arrays.

Only the primitives the network needs are implemented: elementwise
arithmetic, einsum, gather/segment-sum (the graph message-passing pair),
SiLU/sigmoid, abs, reductions, reshape and concatenation. Each primitive
records a closure that propagates the upstream cotangent to its parents;
``backward`` runs them in reverse topological order.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Tensor", "einsum", "gather", "segment_sum", "concatenate"]


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcasted gradient back to the original shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents if self.requires_grad else ()
        self._backward = _backward if self.requires_grad else None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def _accum(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output")
        # iterative DFS: deep graphs exceed the default recursion limit
        topo, seen, stack = [], set(), [(self, False)]
        while stack:
            t, expanded = stack.pop()
            if expanded:
                topo.append(t)
                continue
            if id(t) in seen:
                continue
            seen.add(id(t))
            stack.append((t, True))
            for p in t._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for t in reversed(topo):
            if t._backward is not None:
                t._backward(t.grad)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = _as_tensor(other)

        def bwd(g):
            if self.requires_grad:
                self._accum(_unbroadcast(g, self.data.shape))
            if other.requires_grad:
                other._accum(_unbroadcast(g, other.data.shape))

        return Tensor(self.data + other.data, _parents=(self, other), _backward=bwd)

    __radd__ = __add__

    def __neg__(self):
        def bwd(g):
            if self.requires_grad:
                self._accum(-g)

        return Tensor(-self.data, _parents=(self,), _backward=bwd)

    def __sub__(self, other):
        return self + (-_as_tensor(other))

    def __rsub__(self, other):
        return _as_tensor(other) + (-self)

    def __mul__(self, other):
        other = _as_tensor(other)

        def bwd(g):
            if self.requires_grad:
                self._accum(_unbroadcast(g * other.data, self.data.shape))
            if other.requires_grad:
                other._accum(_unbroadcast(g * self.data, other.data.shape))

        return Tensor(self.data * other.data, _parents=(self, other), _backward=bwd)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_tensor(other)

        def bwd(g):
            if self.requires_grad:
                self._accum(_unbroadcast(g / other.data, self.data.shape))
            if other.requires_grad:
                other._accum(
                    _unbroadcast(-g * self.data / other.data**2, other.data.shape)
                )

        return Tensor(self.data / other.data, _parents=(self, other), _backward=bwd)

    def __getitem__(self, idx):
        def bwd(g):
            if self.requires_grad:
                full = np.zeros_like(self.data)
                full[idx] = g
                self._accum(full)

        return Tensor(self.data[idx], _parents=(self,), _backward=bwd)

    # -- shape --------------------------------------------------------------

    def reshape(self, *shape):
        old = self.data.shape

        def bwd(g):
            if self.requires_grad:
                self._accum(g.reshape(old))

        return Tensor(self.data.reshape(*shape), _parents=(self,), _backward=bwd)

    # -- reductions ---------------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        def bwd(g):
            if not self.requires_grad:
                return
            if axis is None:
                self._accum(np.broadcast_to(g, self.data.shape).copy())
            else:
                gg = g if keepdims else np.expand_dims(g, axis)
                self._accum(np.broadcast_to(gg, self.data.shape).copy())

        return Tensor(
            self.data.sum(axis=axis, keepdims=keepdims), _parents=(self,), _backward=bwd
        )

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) / float(n)

    # -- elementwise nonlinear ----------------------------------------------

    def exp(self):
        out_data = np.exp(self.data)

        def bwd(g):
            if self.requires_grad:
                self._accum(g * out_data)

        return Tensor(out_data, _parents=(self,), _backward=bwd)

    def sqrt(self):
        out_data = np.sqrt(self.data)

        def bwd(g):
            if self.requires_grad:
                self._accum(g * 0.5 / out_data)

        return Tensor(out_data, _parents=(self,), _backward=bwd)

    def abs(self):
        def bwd(g):
            if self.requires_grad:
                self._accum(g * np.sign(self.data))

        return Tensor(np.abs(self.data), _parents=(self,), _backward=bwd)

    def sigmoid(self):
        out_data = 1.0 / (1.0 + np.exp(-self.data))

        def bwd(g):
            if self.requires_grad:
                self._accum(g * out_data * (1.0 - out_data))

        return Tensor(out_data, _parents=(self,), _backward=bwd)

    def silu(self):
        s = 1.0 / (1.0 + np.exp(-self.data))

        def bwd(g):
            if self.requires_grad:
                self._accum(g * s * (1.0 + self.data * (1.0 - s)))

        return Tensor(self.data * s, _parents=(self,), _backward=bwd)

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def einsum(subscripts: str, *tensors) -> Tensor:
    """Differentiable einsum; every index of an operand must appear in the
    output or another operand (true for all contractions used here)."""
    tensors = tuple(_as_tensor(t) for t in tensors)
    in_spec, out_spec = subscripts.replace(" ", "").split("->")
    specs = in_spec.split(",")
    out_data = np.einsum(subscripts, *[t.data for t in tensors], optimize=True)

    def bwd(g):
        for i, t in enumerate(tensors):
            if not t.requires_grad:
                continue
            others = [specs[j] for j in range(len(tensors)) if j != i]
            other_data = [tensors[j].data for j in range(len(tensors)) if j != i]
            sub = ",".join([out_spec] + others) + "->" + specs[i]
            t._accum(np.einsum(sub, g, *other_data, optimize=True))

    return Tensor(out_data, _parents=tensors, _backward=bwd)


def gather(t: Tensor, index: np.ndarray) -> Tensor:
    """Row gather ``t[index]`` along axis 0."""
    index = np.asarray(index)

    def bwd(g):
        if t.requires_grad:
            full = np.zeros_like(t.data)
            np.add.at(full, index, g)
            t._accum(full)

    return Tensor(t.data[index], _parents=(t,), _backward=bwd)


def segment_sum(t: Tensor, index: np.ndarray, num_segments: int) -> Tensor:
    """Sum rows of ``t`` into ``num_segments`` bins given by ``index``."""
    index = np.asarray(index)
    out_data = np.zeros((num_segments,) + t.data.shape[1:])
    np.add.at(out_data, index, t.data)

    def bwd(g):
        if t.requires_grad:
            t._accum(g[index])

    return Tensor(out_data, _parents=(t,), _backward=bwd)


def concatenate(tensors, axis=-1) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, a, b in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(a, b)
                t._accum(g[tuple(sl)])

    return Tensor(
        np.concatenate([t.data for t in tensors], axis=axis),
        _parents=tuple(tensors),
        _backward=bwd,
    )
