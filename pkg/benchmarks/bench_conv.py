"""Time the compiled and numpy convolution kernels on training-sized batches.

    python benchmarks/bench_conv.py --repeats 20
"""

import argparse
import timeit

import numpy as np

from visuotactile._kernels import _conv_numpy

try:
    from visuotactile._kernels import _conv_ext
except ImportError:
    _conv_ext = None

# (batch, in channels, size, out channels): the encoder's three conv layers at 32px
SHAPES = [(16, 3, 32, 8), (16, 8, 16, 16), (16, 16, 8, 32), (64, 3, 64, 8)]


def bench(impl, x, w, b, gy, repeats):
    fwd = min(timeit.repeat(lambda: impl.conv2d_forward(x, w, b, 2, 1), number=1, repeat=repeats))
    bwd = min(timeit.repeat(lambda: impl.conv2d_backward(x, w, gy, 2, 1), number=1, repeat=repeats))
    return fwd, bwd


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    if _conv_ext is None:
        print("compiled extension not built; reporting numpy only")
    print(f"{'shape':>22} {'numpy fwd':>10} {'numpy bwd':>10} {'ext fwd':>10} {'ext bwd':>10} {'speedup':>8}")
    for n, c, s, o in SHAPES:
        x = rng.normal(size=(n, c, s, s)).astype(np.float32)
        w = rng.normal(size=(o, c, 3, 3)).astype(np.float32)
        b = rng.normal(size=o).astype(np.float32)
        h = _conv_numpy.output_size(s, 3, 2, 1)
        gy = rng.normal(size=(n, o, h, h)).astype(np.float32)
        nf, nb = bench(_conv_numpy, x, w, b, gy, args.repeats)
        row = f"{str((n, c, s, s)) + '->' + str(o):>22} {nf * 1e3:9.3f}m {nb * 1e3:9.3f}m"
        if _conv_ext is not None:
            np.testing.assert_allclose(_conv_ext.conv2d_forward(x, w, b, 2, 1),
                                       _conv_numpy.conv2d_forward(x, w, b, 2, 1), rtol=1e-4, atol=1e-4)
            ef, eb = bench(_conv_ext, x, w, b, gy, args.repeats)
            row += f" {ef * 1e3:9.3f}m {eb * 1e3:9.3f}m {(nf + nb) / (ef + eb):7.2f}x"
        print(row)
    print("times are best-of-repeats milliseconds")


if __name__ == "__main__":
    main()
