"""Parameter containers and the small layers used by every model."""

import numpy as np

from . import tensor as T
from .tensor import Tensor


def parameter(data, name=None):
    return Tensor(np.asarray(data, dtype=T.get_dtype()), requires_grad=True, name=name)


class Module:
    """Base class; parameters are discovered from attributes, in insertion order."""

    def named_parameters(self, prefix=""):
        out = {}
        for key, val in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(val, Tensor) and val.requires_grad:
                out[name] = val
            elif isinstance(val, Module):
                out.update(val.named_parameters(name + "."))
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        out.update(item.named_parameters(f"{name}.{i}."))
        return out

    def parameters(self):
        return list(self.named_parameters().values())

    def state_dict(self):
        return {k: v.data.copy() for k, v in self.named_parameters().items()}

    def load_state_dict(self, state):
        params = self.named_parameters()
        missing = set(params) - set(state)
        if missing:
            raise KeyError(f"missing parameters: {sorted(missing)}")
        for k, p in params.items():
            arr = np.asarray(state[k])
            if arr.shape != p.shape:
                raise ValueError(f"parameter {k}: expected shape {p.shape}, got {arr.shape}")
            p.data = arr.astype(p.data.dtype, copy=True)

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Linear(Module):
    def __init__(self, n_in, n_out, rng, zero=False):
        bound = np.sqrt(6.0 / (n_in + n_out))
        w = np.zeros((n_in, n_out)) if zero else rng.uniform(-bound, bound, size=(n_in, n_out))
        self.weight = parameter(w)
        self.bias = parameter(np.zeros(n_out))

    def forward(self, x):
        return T.affine(x, self.weight, self.bias)


class Conv2d(Module):
    def __init__(self, c_in, c_out, rng, kernel=3, stride=1, padding=1):
        fan_in = c_in * kernel * kernel
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(c_out, c_in, kernel, kernel))
        self.weight = parameter(w)
        self.bias = parameter(np.zeros(c_out))
        self.stride = stride
        self.padding = padding

    def forward(self, x):
        return T.conv2d(x, self.weight, self.bias, self.stride, self.padding)


_ACT = {"relu": T.relu, "tanh": T.tanh, "sigmoid": T.sigmoid}


class MLP(Module):
    """Stack of affine layers with an activation between them (none after the last)."""

    def __init__(self, sizes, rng, activation="relu", zero_last=False):
        self.layers = [Linear(a, b, rng, zero=zero_last and i == len(sizes) - 2)
                       for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:]))]
        self.activation = activation

    def forward(self, x):
        act = _ACT[self.activation]
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = act(x)
        return x


class ConvEncoder(Module):
    """Stride-2 conv blocks + global average pool + affine head.

    Accepts images as (N, H, W, 3) arrays in [0, 1].
    """

    def __init__(self, out_dim, rng, channels=(8, 16, 32), zero_head=False):
        cin = 3
        self.blocks = []
        for c in channels:
            self.blocks.append(Conv2d(cin, c, rng, kernel=3, stride=2, padding=1))
            cin = c
        self.head = Linear(cin, out_dim, rng, zero=zero_head)
        self.feature_dim = cin

    def trunk(self, images):
        x = images if isinstance(images, Tensor) else Tensor(images)
        if x.data.ndim != 4 or x.shape[-1] != 3:
            raise T.ShapeError(f"encoder expects (N, H, W, 3) images, got {x.shape}")
        x = T.transpose(x, (0, 3, 1, 2))
        for block in self.blocks:
            x = T.relu(block(x))
        return T.global_avg_pool(x)

    def forward(self, images):
        return self.head(self.trunk(images))
