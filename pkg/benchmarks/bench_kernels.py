"""Time the numpy kernels against their jitted twins on realistic shapes.

Both backends receive identical pre-conditioned inputs and must return
bit-identical outputs, so each row also reports an agreement check.

Usage: python3 benchmarks/bench_kernels.py [--size 512] [--repeats 5]
"""

import argparse
import time

import numpy as np

from lungprep._kernels import numba_impl, numpy_impl


def _conv_inputs(rng, size):
    img = rng.random((size, size))
    kernel = rng.normal(size=(3, 3))
    padded = np.pad(img, 1, mode="edge")
    kflip = np.ascontiguousarray(kernel[::-1, ::-1])
    return padded, kflip


def _mask(rng, size, density=0.5):
    return rng.random((size, size)) < density


def _split_inputs(rng, n):
    vs = np.sort(rng.random(n))
    gs = rng.normal(size=n)
    hs = rng.random(n) + 0.05
    return vs, gs, hs, 20


def _cases(rng, size):
    padded, kflip = _conv_inputs(rng, size)
    med_padded = np.pad(rng.random((size, size)), 1, mode="edge")
    speckle = _mask(rng, size)
    blob = _mask(rng, size, 0.6)
    vs, gs, hs, min_leaf = _split_inputs(rng, 20 * size)
    return (
        ("conv2d_padded", (padded, kflip)),
        ("median2d_padded", (med_padded, 3)),
        ("dilate_once", (speckle,)),
        ("fill_holes", (blob,)),
        ("largest_component", (blob,)),
        ("scan_split", (vs, gs, hs, min_leaf)),
    )


def _time(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _agree(a, b):
    if isinstance(a, tuple):
        return all(_agree(x, y) for x, y in zip(a, b)) and len(a) == len(b)
    if isinstance(a, np.ndarray):
        return np.array_equal(b, a)
    return a == b or (np.isnan(a) and np.isnan(b))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=512, help="square image side")
    ap.add_argument("--repeats", type=int, default=5, help="timed repetitions (best kept)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    cases = _cases(rng, args.size)

    # trigger jit compilation outside the timed region
    for name, inputs in cases:
        getattr(numba_impl, name)(*inputs)

    print(f"size={args.size} repeats={args.repeats} (best-of timing)")
    print(f"{'kernel':<18}{'numpy':>10}{'numba':>10}{'speedup':>9}  agree")
    for name, inputs in cases:
        np_fn = getattr(numpy_impl, name)
        nb_fn = getattr(numba_impl, name)
        out_np = np_fn(*inputs)
        out_nb = nb_fn(*inputs)
        agree = "yes" if _agree(out_np, out_nb) else "NO"
        t_np = _time(np_fn, inputs, args.repeats)
        t_nb = _time(nb_fn, inputs, args.repeats)
        print(
            f"{name:<18}{t_np * 1e3:>8.2f} ms{t_nb * 1e3:>8.2f} ms"
            f"{t_np / t_nb:>8.2f}x  {agree}"
        )


if __name__ == "__main__":
    main()
