"""Time the compiled convolution kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Each case also checks that both backends return bit-identical outputs and
equal multiply-add counts.
"""
import argparse
import timeit

import numpy as np

from falcontk import _kernels

CASES = [
    # name, H, W, M, N, D, s, p
    ("stconv 32x32 16->16 3x3", 32, 32, 16, 16, 3, 1, 1),
    ("stconv 16x16 64->64 3x3", 16, 16, 64, 64, 3, 1, 1),
    ("stconv 32x32 8->32 5x5 s2", 32, 32, 8, 32, 5, 2, 2),
    ("depthwise 32x32x64 3x3", 32, 32, 64, 64, 3, 1, 1),
    ("pointwise 32x32 64->64", 32, 32, 64, 64, 1, 1, 0),
]


def _make(name, H, W, M, N, D, s, p):
    rng = np.random.default_rng(0)
    I = rng.standard_normal((H, W, M))
    Ho = (H + 2 * p - D) // s + 1
    Wo = (W + 2 * p - D) // s + 1
    if name.startswith("pointwise"):
        P = rng.standard_normal((M, N))
        return lambda b: b.pointwise(I, P)
    if name.startswith("depthwise"):
        Dk = rng.standard_normal((D, D, M))
        return lambda b: b.depthwise(I, Dk, s, p, Ho, Wo)
    K = rng.standard_normal((D, D, M, N))
    return lambda b: b.conv2d(I, K, s, p, Ho, Wo)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    if _kernels.compiled is None:
        print("compiled kernels are not built; only the numpy fallback is available")
        return 1
    print(f"{'case':<28} {'numpy ms':>10} {'cython ms':>10} {'speedup':>8}  identical")
    for case in CASES:
        call = _make(*case)
        a_out, a_macs = call(_kernels.python)
        b_out, b_macs = call(_kernels.compiled)
        same = a_out.tobytes() == np.asarray(b_out).tobytes() and a_macs == b_macs
        t_py = min(timeit.repeat(lambda: call(_kernels.python), number=1, repeat=args.repeat))
        t_c = min(timeit.repeat(lambda: call(_kernels.compiled), number=1, repeat=args.repeat))
        print(f"{case[0]:<28} {1e3 * t_py:>10.2f} {1e3 * t_c:>10.2f} {t_py / t_c:>7.1f}x  {same}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
