"""Minimal reverse-mode autodiff: tensors, operators, layers, Adam, sampling."""

from .check import gradient_check
from .nn import MLP, Conv2d, ConvEncoder, Linear, Module, parameter
from .optim import Adam
from .sampling import sample_categorical
from .tensor import (
    NumericError,
    ShapeError,
    Tensor,
    add,
    affine,
    as_tensor,
    backward,
    binary_cross_entropy,
    clip,
    concat,
    conv2d,
    cross_entropy,
    get_dtype,
    global_avg_pool,
    index,
    l2_norm,
    log,
    log_softmax,
    matmul,
    max_stack,
    mean,
    mse,
    mul,
    precision,
    relu,
    reshape,
    sigmoid,
    softmax,
    sqrt,
    square,
    sub,
    sum,
    tanh,
    transpose,
    zero_grad,
)

__all__ = [name for name in dir() if not name.startswith("_")]
