"""Reverse-mode automatic differentiation over dense 2-D float64 matrices.

Small define-by-run engine: every operation records its parents and a
backward closure on the result tensor; ``Tensor.backward()`` on a scalar
replays the recorded graph in reverse topological order and accumulates
exact gradients into every tensor created with ``requires_grad=True``.

Shape rules are strict: elementwise ops require identical shapes and the
only broadcasts are the explicit ones (``add_bias``, scalar arithmetic).
The ReLU subgradient at exactly 0 is fixed to 0 so gradients replay
bit-identically.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Tensor",
    "ShapeMismatchError",
    "matmul",
    "sparse_dense_matmul",
    "add",
    "sub",
    "mul",
    "add_bias",
    "relu",
    "sigmoid",
    "log",
    "log_sigmoid",
    "clip",
    "row_softmax",
    "column",
    "sum_all",
    "mean_all",
    "masked_mean",
    "edge_dot",
    "dropout",
    "BatchNormState",
    "batchnorm1d",
]


class ShapeMismatchError(ValueError):
    """Raised when operand shapes are incompatible; never silently broadcast."""


def _as_matrix(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ShapeMismatchError(f"tensors are 2-D matrices, got ndim={arr.ndim}")
    return arr


class Tensor:
    """Dense real matrix with an optional gradient slot."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_matrix(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn = None

    @classmethod
    def param(cls, data) -> "Tensor":
        return cls(data, requires_grad=True)

    @classmethod
    def constant(cls, data) -> "Tensor":
        return cls(data, requires_grad=False)

    @classmethod
    def _result(cls, data: np.ndarray, parents: tuple["Tensor", ...], backward_fn) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.requires_grad = any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = parents
            out._backward_fn = backward_fn
        else:
            out._parents = ()
            out._backward_fn = None
        return out

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeMismatchError(f"item() needs a scalar, shape is {self.shape}")
        return float(self.data[0, 0])

    def _accumulate(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Accumulate gradients of this scalar w.r.t. every grad-tracked input."""
        if self.data.size != 1:
            raise ShapeMismatchError("backward() starts from a scalar tensor")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.ones((1, 1)))
        for node in reversed(order):
            if node._backward_fn is not None and node.grad is not None:
                node._backward_fn(node.grad)

    # scalar/elementwise operator sugar
    def __add__(self, other):
        if isinstance(other, Tensor):
            return add(self, other)
        return _scalar_shift(self, float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Tensor):
            return sub(self, other)
        return _scalar_shift(self, -float(other))

    def __rsub__(self, other):
        return _scalar_shift(_scale(self, -1.0), float(other))

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return _scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return _scale(self, -1.0)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _check_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(f"{op}: shapes {a.shape} and {b.shape} differ")


def _scalar_shift(x: Tensor, c: float) -> Tensor:
    def backward(g):
        x._accumulate(g)

    return Tensor._result(x.data + c, (x,), backward)


def _scale(x: Tensor, c: float) -> Tensor:
    def backward(g):
        x._accumulate(g * c)

    return Tensor._result(x.data * c, (x,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(f"matmul: inner dims {a.shape} x {b.shape}")

    def backward(g):
        a._accumulate(g @ b.data.T)
        b._accumulate(a.data.T @ g)

    return Tensor._result(a.data @ b.data, (a, b), backward)


def sparse_dense_matmul(a: sp.spmatrix, x: Tensor) -> Tensor:
    """Product of a constant sparse matrix with a dense tensor."""
    if a.shape[1] != x.shape[0]:
        raise ShapeMismatchError(f"sparse_dense_matmul: dims {a.shape} x {x.shape}")

    def backward(g):
        x._accumulate(a.T @ g)

    return Tensor._result(a @ x.data, (x,), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "add")

    def backward(g):
        a._accumulate(g)
        b._accumulate(g)

    return Tensor._result(a.data + b.data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "sub")

    def backward(g):
        a._accumulate(g)
        b._accumulate(-g)

    return Tensor._result(a.data - b.data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "mul")

    def backward(g):
        a._accumulate(g * b.data)
        b._accumulate(g * a.data)

    return Tensor._result(a.data * b.data, (a, b), backward)


def add_bias(x: Tensor, bias: Tensor) -> Tensor:
    """Add a (1, k) bias row to every row of an (n, k) tensor."""
    if bias.shape != (1, x.shape[1]):
        raise ShapeMismatchError(f"add_bias: bias {bias.shape} for input {x.shape}")

    def backward(g):
        x._accumulate(g)
        bias._accumulate(g.sum(axis=0, keepdims=True))

    return Tensor._result(x.data + bias.data, (x, bias), backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0.0

    def backward(g):
        x._accumulate(g * mask)

    return Tensor._result(np.where(mask, x.data, 0.0), (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    out = np.empty_like(x.data)
    pos = x.data >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x.data[pos]))
    ex = np.exp(x.data[~pos])
    out[~pos] = ex / (1.0 + ex)

    def backward(g):
        x._accumulate(g * out * (1.0 - out))

    return Tensor._result(out, (x,), backward)


def log(x: Tensor) -> Tensor:
    def backward(g):
        x._accumulate(g / x.data)

    return Tensor._result(np.log(x.data), (x,), backward)


def log_sigmoid(x: Tensor) -> Tensor:
    """Numerically stable log(sigmoid(x)); safe for saturated inputs."""
    out = np.minimum(x.data, 0.0) - np.log1p(np.exp(-np.abs(x.data)))

    def backward(g):
        # d/dx log(sigmoid(x)) = sigmoid(-x)
        z = np.empty_like(x.data)
        pos = x.data >= 0
        z[pos] = np.exp(-x.data[pos]) / (1.0 + np.exp(-x.data[pos]))
        z[~pos] = 1.0 / (1.0 + np.exp(x.data[~pos]))
        x._accumulate(g * z)

    return Tensor._result(out, (x,), backward)


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values; gradient passes only strictly inside the bounds."""
    inside = (x.data > lo) & (x.data < hi)

    def backward(g):
        x._accumulate(g * inside)

    return Tensor._result(np.clip(x.data, lo, hi), (x,), backward)


def row_softmax(x: Tensor) -> Tensor:
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=1, keepdims=True)

    def backward(g):
        inner = (g * probs).sum(axis=1, keepdims=True)
        x._accumulate(probs * (g - inner))

    return Tensor._result(probs, (x,), backward)


def column(x: Tensor, j: int) -> Tensor:
    if not 0 <= j < x.shape[1]:
        raise ShapeMismatchError(f"column {j} out of range for shape {x.shape}")

    def backward(g):
        full = np.zeros_like(x.data)
        full[:, j : j + 1] = g
        x._accumulate(full)

    return Tensor._result(x.data[:, j : j + 1].copy(), (x,), backward)


def sum_all(x: Tensor) -> Tensor:
    def backward(g):
        x._accumulate(np.full_like(x.data, g[0, 0]))

    return Tensor._result(np.array([[x.data.sum()]]), (x,), backward)


def mean_all(x: Tensor) -> Tensor:
    inv = 1.0 / x.data.size

    def backward(g):
        x._accumulate(np.full_like(x.data, g[0, 0] * inv))

    return Tensor._result(np.array([[x.data.mean()]]), (x,), backward)


def masked_mean(x: Tensor, rows: np.ndarray) -> Tensor:
    """Mean of the selected rows of a column tensor, as a scalar tensor."""
    rows = np.asarray(rows, dtype=np.int64)
    if x.shape[1] != 1:
        raise ShapeMismatchError(f"masked_mean expects a column tensor, got {x.shape}")
    if rows.size == 0:
        raise ShapeMismatchError("masked_mean over an empty subset")
    inv = 1.0 / rows.size

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full[:, 0], rows, g[0, 0] * inv)
        x._accumulate(full)

    return Tensor._result(np.array([[x.data[rows, 0].mean()]]), (x,), backward)


def edge_dot(z: Tensor, left: np.ndarray, right: np.ndarray) -> Tensor:
    """Per-pair inner products ``z[left[k]] . z[right[k]]`` as an (m, 1) tensor."""
    left = np.asarray(left, dtype=np.int64)
    right = np.asarray(right, dtype=np.int64)
    if left.shape != right.shape:
        raise ShapeMismatchError("edge_dot index arrays differ in length")
    zl = z.data[left]
    zr = z.data[right]

    def backward(g):
        full = np.zeros_like(z.data)
        np.add.at(full, left, g * zr)
        np.add.at(full, right, g * zl)
        z._accumulate(full)

    return Tensor._result((zl * zr).sum(axis=1, keepdims=True), (z,), backward)


def dropout(x: Tensor, p: float, train: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: survivors are rescaled by 1/(1-p) in train mode."""
    if not 0.0 <= p < 1.0:
        raise ValueError("dropout rate must satisfy 0 <= p < 1")
    if not train or p == 0.0:
        return x
    if rng is None:
        raise ValueError("train-mode dropout needs an explicit rng")
    keep = rng.random(x.shape) >= p
    scale = 1.0 / (1.0 - p)

    def backward(g):
        x._accumulate(g * keep * scale)

    return Tensor._result(x.data * keep * scale, (x,), backward)


class BatchNormState:
    """Per-feature statistics reused by eval-mode forward passes.

    Under full-batch training there is no running average to maintain: the
    statistics of the last train-mode forward are stored verbatim.
    """

    def __init__(self, width: int, eps: float = 1e-5):
        self.mean = np.zeros((1, width))
        self.var = np.ones((1, width))
        self.eps = float(eps)

    def copy(self) -> "BatchNormState":
        out = BatchNormState(self.mean.shape[1], self.eps)
        out.mean = self.mean.copy()
        out.var = self.var.copy()
        return out


def batchnorm1d(
    x: Tensor, gamma: Tensor, beta: Tensor, state: BatchNormState, train: bool
) -> Tensor:
    """Column-wise batch normalization with affine parameters.

    Train mode normalizes with current-batch statistics and records them in
    ``state``; eval mode reuses the recorded statistics.
    """
    k = x.shape[1]
    if gamma.shape != (1, k) or beta.shape != (1, k):
        raise ShapeMismatchError("batchnorm scale/shift must be (1, width)")
    if train:
        mu = x.data.mean(axis=0, keepdims=True)
        var = x.data.var(axis=0, keepdims=True)
        state.mean = mu.copy()
        state.var = var.copy()
    else:
        mu = state.mean
        var = state.var
    inv_std = 1.0 / np.sqrt(var + state.eps)
    xhat = (x.data - mu) * inv_std
    out = gamma.data * xhat + beta.data

    if train:

        def backward(g):
            gamma._accumulate((g * xhat).sum(axis=0, keepdims=True))
            beta._accumulate(g.sum(axis=0, keepdims=True))
            g_mean = g.mean(axis=0, keepdims=True)
            gx_mean = (g * xhat).mean(axis=0, keepdims=True)
            x._accumulate(gamma.data * inv_std * (g - g_mean - xhat * gx_mean))

    else:

        def backward(g):
            gamma._accumulate((g * xhat).sum(axis=0, keepdims=True))
            beta._accumulate(g.sum(axis=0, keepdims=True))
            x._accumulate(g * gamma.data * inv_std)

    return Tensor._result(out, (x, gamma, beta), backward)
