"""Compare the compiled and numpy im2col/col2im kernels, plus one ReCNN train step.

    python3 benchmarks/bench_kernels.py [--repeat 20] [--batch 40]

The train-step timing swaps the kernel functions in place, so both runs use
the same model, data and BLAS.
"""

import argparse
import timeit

import numpy as np

from dnsptl.nn import _pykernels, kernels
from dnsptl.nn.layers import mse_loss
from dnsptl.recnn import ReCNN, desk_scale_config


def _compiled():
    try:
        from dnsptl.nn import _ckernels
    except ImportError:
        return None
    return _ckernels


def _c_im2col(ck):
    def im2col(x, k):
        x = np.ascontiguousarray(x)
        B, H, W, C = x.shape
        out = np.empty((B * H * W, k * k * C), dtype=x.dtype)
        ck.im2col_into(x, k, out)
        return out
    return im2col


def _c_col2im(ck):
    def col2im(cols, shape, k):
        out = np.zeros(shape, dtype=cols.dtype)
        ck.col2im_into(np.ascontiguousarray(cols), k, out)
        return out
    return col2im


def best_ms(fn, repeat):
    return 1e3 * min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--batch", type=int, default=40, help="network rows per step (2 x complex batch)")
    args = ap.parse_args()

    ck = _compiled()
    impls = {"numpy": (_pykernels.im2col, _pykernels.col2im)}
    if ck is None:
        print("compiled extension not built; only the numpy path is timed")
    else:
        impls["cython"] = (_c_im2col(ck), _c_col2im(ck))

    rng = np.random.default_rng(0)
    x = rng.standard_normal((args.batch, 64, 8, 16)).astype(np.float32)
    cols = _pykernels.im2col(x, 5)
    print(f"kernels on {x.shape} float32, k=5 (best of {args.repeat}, ms)")
    print(f"{'backend':<8} {'im2col':>9} {'col2im':>9}")
    for name, (i2c, c2i) in impls.items():
        t1 = best_ms(lambda: i2c(x, 5), args.repeat)
        t2 = best_ms(lambda: c2i(cols, x.shape, 5), args.repeat)
        print(f"{name:<8} {t1:9.2f} {t2:9.2f}")
    if ck is not None:
        ref = _pykernels.col2im(cols, x.shape, 5)
        assert np.array_equal(impls["cython"][0](x, 5), cols)
        assert np.allclose(impls["cython"][1](cols, x.shape, 5), ref, rtol=1e-5, atol=1e-5)

    model = ReCNN(desk_scale_config("small"), seed=0)
    xb = rng.standard_normal((args.batch, 64, 8, 1)).astype(np.float32)
    yb = rng.standard_normal((args.batch, 512)).astype(np.float32)

    def step():
        _, g = mse_loss(model.forward(xb, train=True), yb)
        model.backward(g.astype(np.float32), input_grad=False)

    print(f"\nsmall ReCNN forward+backward, batch {args.batch} (ms)")
    saved = (kernels.im2col, kernels.col2im)
    try:
        for name, (i2c, c2i) in impls.items():
            kernels.im2col, kernels.col2im = i2c, c2i
            print(f"{name:<8} {best_ms(step, max(3, args.repeat // 4)):9.1f}")
    finally:
        kernels.im2col, kernels.col2im = saved


if __name__ == "__main__":
    main()
