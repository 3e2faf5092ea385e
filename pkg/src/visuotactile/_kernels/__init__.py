"""Hot convolution kernels.

The compiled extension ``_conv_ext`` is used when it was built; otherwise
the numpy implementation is selected. Set ``VISUOTACTILE_PURE_PYTHON=1``
to force the fallback.
"""

import os

from . import _conv_numpy

BACKEND = "numpy"

if os.environ.get("VISUOTACTILE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _conv_ext as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _conv_numpy
else:
    _impl = _conv_numpy

conv2d_forward = _impl.conv2d_forward
conv2d_backward = _impl.conv2d_backward
output_size = _conv_numpy.output_size

__all__ = ["BACKEND", "conv2d_forward", "conv2d_backward", "output_size"]
