"""Define-by-run reverse-mode autodiff over dense numpy arrays.

Every operator builds a new :class:`Tensor` that remembers its parents and a
closure propagating the output gradient back to them. :func:`backward` walks
the recorded graph in reverse topological order.
"""

from contextlib import contextmanager

import numpy as np

from .. import _kernels

_DTYPE = [np.float32]


class NumericError(ArithmeticError):
    """A forward or backward pass produced NaN/Inf."""


class ShapeError(ValueError):
    pass


def get_dtype():
    return _DTYPE[-1]


@contextmanager
def precision(dtype):
    """Temporarily change the storage dtype for newly created tensors."""
    _DTYPE.append(np.dtype(dtype).type)
    try:
        yield
    finally:
        _DTYPE.pop()


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, name=None, op="leaf", _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=get_dtype())
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self.op = op
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, op={self.op}{tag})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return index(self, idx)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(out, parents, backward, op):
    out = np.asarray(out)
    if not np.all(np.isfinite(out)):
        raise NumericError(f"non-finite output in '{op}'")
    needs = any(p.requires_grad for p in parents)
    t = Tensor(out, requires_grad=needs, op=op,
               _parents=tuple(parents) if needs else (),
               _backward=backward if needs else None)
    return t


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(a, b, op):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------- elementwise

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)
    return _node(a.data + b.data, (a, b), bw, "add")


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)
    return _node(a.data - b.data, (a, b), bw, "sub")


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")

    def bw(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)
    return _node(a.data * b.data, (a, b), bw, "mul")


def square(x):
    def bw(g):
        return (2.0 * g * x.data,)
    return _node(x.data * x.data, (x,), bw, "square")


def sqrt(x):
    with np.errstate(invalid="ignore"):
        out = np.sqrt(x.data)

    def bw(g):
        return (g * 0.5 / out,)
    return _node(out, (x,), bw, "sqrt")


def log(x):
    def bw(g):
        return (g / x.data,)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(x.data)
    return _node(out, (x,), bw, "log")


def clip(x, lo, hi):
    """Clamp values; the gradient passes only where the input was in range."""
    mask = (x.data >= lo) & (x.data <= hi)

    def bw(g):
        return (g * mask,)
    return _node(np.clip(x.data, lo, hi), (x,), bw, "clip")


def relu(x):
    mask = x.data > 0

    def bw(g):
        return (g * mask,)
    return _node(x.data * mask, (x,), bw, "relu")


def sigmoid(x):
    out = 0.5 * (1.0 + np.tanh(0.5 * x.data))

    def bw(g):
        return (g * out * (1.0 - out),)
    return _node(out, (x,), bw, "sigmoid")


def tanh(x):
    out = np.tanh(x.data)

    def bw(g):
        return (g * (1.0 - out * out),)
    return _node(out, (x,), bw, "tanh")


def softmax(x, axis=-1):
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)
    return _node(out, (x,), bw, "softmax")


def log_softmax(x, axis=-1):
    z = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    out = z - lse
    p = np.exp(out)

    def bw(g):
        return (g - p * g.sum(axis=axis, keepdims=True),)
    return _node(out, (x,), bw, "log_softmax")


# ---------------------------------------------------------------- linear algebra

def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")

    def bw(g):
        return g @ b.data.T, a.data.T @ g
    return _node(a.data @ b.data, (a, b), bw, "matmul")


def affine(x, w, b=None):
    """``x @ w + b`` for ``x`` of shape (batch, in) or (in,)."""
    x, w = as_tensor(x), as_tensor(w)
    squeeze = x.data.ndim == 1
    xd = x.data[None, :] if squeeze else x.data
    if xd.ndim != 2 or w.data.ndim != 2 or xd.shape[1] != w.shape[0]:
        raise ShapeError(f"affine: input {x.shape} incompatible with weight {w.shape}")
    if b is not None:
        b = as_tensor(b)
        if b.shape != (w.shape[1],):
            raise ShapeError(f"affine: bias {b.shape} does not match weight {w.shape}")
    out = xd @ w.data
    if b is not None:
        out = out + b.data
    if squeeze:
        out = out[0]

    def bw(g):
        g2 = g[None, :] if squeeze else g
        gx = g2 @ w.data.T
        gw = xd.T @ g2
        grads = [gx[0] if squeeze else gx, gw]
        if b is not None:
            grads.append(g2.sum(axis=0))
        return tuple(grads)
    parents = (x, w) if b is None else (x, w, b)
    return _node(out, parents, bw, "affine")


def conv2d(x, w, b=None, stride=1, padding=0):
    """2-D cross-correlation, NCHW input, OIHW weight, zero padding."""
    x, w = as_tensor(x), as_tensor(w)
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ShapeError(f"conv2d: expected 4-D input and weight, got {x.shape} and {w.shape}")
    if x.shape[1] != w.shape[1]:
        raise ShapeError(f"conv2d: input has {x.shape[1]} channels, weight expects {w.shape[1]}")
    if stride < 1:
        raise ShapeError("conv2d: stride must be >= 1")
    ho = _kernels.output_size(x.shape[2], w.shape[2], stride, padding)
    wo = _kernels.output_size(x.shape[3], w.shape[3], stride, padding)
    if ho < 1 or wo < 1:
        raise ShapeError(f"conv2d: kernel {w.shape[2:]} too large for input {x.shape[2:]}")
    bd = None if b is None else as_tensor(b).data
    dt = get_dtype()
    xd = x.data.astype(dt, copy=False)
    wd = w.data.astype(dt, copy=False)
    out = _kernels.conv2d_forward(xd, wd, bd, stride, padding)

    def bw(g):
        gx, gw, gb = _kernels.conv2d_backward(xd, wd, np.asarray(g, dtype=xd.dtype), stride, padding)
        return (gx, gw) if b is None else (gx, gw, gb)
    parents = (x, w) if b is None else (x, w, as_tensor(b))
    return _node(out, parents, bw, "conv2d")


# ---------------------------------------------------------------- reductions / shape

def sum(x, axis=None, keepdims=False):
    out = x.data.sum(axis=axis, keepdims=keepdims, dtype=np.float64)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape),)
    return _node(out, (x,), bw, "sum")


def mean(x, axis=None, keepdims=False):
    out = x.data.mean(axis=axis, keepdims=keepdims, dtype=np.float64)
    n = x.data.size / max(np.asarray(out).size, 1)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / n, x.shape),)
    return _node(out, (x,), bw, "mean")


def global_avg_pool(x):
    """Mean over the spatial dims of an NCHW tensor -> (N, C)."""
    if x.data.ndim != 4:
        raise ShapeError(f"global_avg_pool: expected NCHW input, got {x.shape}")
    return mean(x, axis=(2, 3))


def max_stack(tensors):
    """Elementwise maximum across equally-shaped tensors.

    Ties route the gradient to the lowest-index tensor.
    """
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("max_stack: empty input")
    shape = tensors[0].shape
    for t in tensors:
        if t.shape != shape:
            raise ShapeError(f"max_stack: shape {t.shape} differs from {shape}")
    stacked = np.stack([t.data for t in tensors])
    arg = stacked.argmax(axis=0)

    def bw(g):
        return tuple(np.where(arg == k, g, 0.0) for k in range(len(tensors)))
    return _node(stacked.max(axis=0), tuple(tensors), bw, "max_stack")


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {exc}") from None
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, splits, axis=axis))
    return _node(out, tuple(tensors), bw, "concat")


def reshape(x, shape):
    try:
        out = x.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"reshape: {exc}") from None

    def bw(g):
        return (g.reshape(x.shape),)
    return _node(out, (x,), bw, "reshape")


def transpose(x, axes):
    inv = np.argsort(axes)

    def bw(g):
        return (g.transpose(inv),)
    return _node(x.data.transpose(axes), (x,), bw, "transpose")


def index(x, idx):
    out = x.data[idx]

    def bw(g):
        full = np.zeros(x.shape, dtype=np.result_type(g, x.data))
        np.add.at(full, idx, g)
        return (full,)
    return _node(out, (x,), bw, "index")


# ---------------------------------------------------------------- losses

def mse(pred, target):
    """Mean squared error over all entries."""
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"mse: prediction {pred.shape} vs target {target.shape}")
    diff = pred.data.astype(np.float64) - target.data
    out = np.mean(diff * diff)
    n = diff.size

    def bw(g):
        d = 2.0 * g * diff / n
        return d, -d
    return _node(out, (pred, target), bw, "mse")


def l2_norm(x, axis=-1, eps=1e-12):
    """Euclidean norm along ``axis``; ``eps`` keeps the gradient finite at 0."""
    sq = np.sum(x.data.astype(np.float64) ** 2, axis=axis, keepdims=True)
    norm = np.sqrt(sq + eps)

    def bw(g):
        return (np.expand_dims(g, axis) * x.data / norm,)
    return _node(np.squeeze(norm, axis=axis), (x,), bw, "l2_norm")


PROB_CLAMP = 1e-7


def binary_cross_entropy(p, target):
    """Mean BCE on probabilities clamped to [1e-7, 1 - 1e-7]."""
    p, target = as_tensor(p), as_tensor(target)
    if p.shape != target.shape:
        raise ShapeError(f"binary_cross_entropy: {p.shape} vs {target.shape}")
    pc = np.clip(p.data.astype(np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)
    t = target.data.astype(np.float64)
    out = -np.mean(t * np.log(pc) + (1.0 - t) * np.log(1.0 - pc))
    inside = (p.data >= PROB_CLAMP) & (p.data <= 1.0 - PROB_CLAMP)
    n = pc.size

    def bw(g):
        gp = g * (-(t / pc) + (1.0 - t) / (1.0 - pc)) / n * inside
        gt = g * (-np.log(pc) + np.log(1.0 - pc)) / n
        return gp, gt
    return _node(out, (p, target), bw, "binary_cross_entropy")


def cross_entropy(logits, labels):
    """Mean categorical cross-entropy of (batch, k) logits vs integer labels."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if logits.data.ndim != 2 or logits.shape[0] != labels.shape[0]:
        raise ShapeError(f"cross_entropy: logits {logits.shape} vs labels {labels.shape}")
    k = logits.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"cross_entropy: labels must lie in [0, {k})")
    z = logits.data.astype(np.float64)
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    rows = np.arange(labels.size)
    out = -logp[rows, labels].mean()

    def bw(g):
        p = np.exp(logp)
        p[rows, labels] -= 1.0
        return (g * p / labels.size,)
    return _node(out, (logits,), bw, "cross_entropy")


# ---------------------------------------------------------------- backward

def _topo(root):
    order, seen = [], set()
    stack = [(root, False)]
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
    return order


def backward(loss, params=None):
    """Backpropagate from a scalar ``loss``.

    Leaf tensors with ``requires_grad`` receive ``.grad`` (accumulated).
    If ``params`` (a name -> Tensor mapping) is given, returns a dict of
    gradients for exactly those parameters; parameters the loss does not
    depend on get zeros.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
    grads = {id(loss): np.ones_like(loss.data, dtype=np.float64)}
    for node in reversed(_topo(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            g = np.asarray(g, dtype=node.data.dtype).reshape(node.shape)
            node.grad = g if node.grad is None else node.grad + g
            continue
        g = np.asarray(g, dtype=node.data.dtype)
        for parent, pg in zip(node._parents, node._backward(g)):
            if not parent.requires_grad or pg is None:
                continue
            if not np.all(np.isfinite(pg)):
                raise NumericError(f"non-finite gradient flowing out of '{node.op}'")
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg
    if params is None:
        return None
    return {name: (p.grad if p.grad is not None else np.zeros_like(p.data))
            for name, p in params.items()}


def zero_grad(params):
    for p in params.values():
        p.grad = None
