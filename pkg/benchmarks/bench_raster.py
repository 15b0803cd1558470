"""Timing comparison between the compiled and pure-python raster backends.

Builds a seeded random splat scene, times the forward and backward passes
for every available backend, and cross-checks that the backends agree on
the rendered buffers and gradients before reporting.

Run from the repository root:

    python3 benchmarks/bench_raster.py --splats 2000 --size 256 --repeats 5
"""

import argparse
import time

import numpy as np

from lumisplat.raster import (available_backends, rasterize,
                              rasterize_backward)
from lumisplat.raster.types import SplatBatch


def random_scene(n: int, extent: float, seed: int) -> SplatBatch:
    """Anisotropic splats with rotated positive-definite conics."""
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, np.pi, n)
    s1 = rng.uniform(0.8, 6.0, n)
    s2 = rng.uniform(0.8, 6.0, n)
    ct, st = np.cos(theta), np.sin(theta)
    cov = np.empty((n, 3))
    cov[:, 0] = ct * ct * s1 ** 2 + st * st * s2 ** 2
    cov[:, 1] = ct * st * (s1 ** 2 - s2 ** 2)
    cov[:, 2] = st * st * s1 ** 2 + ct * ct * s2 ** 2
    det = cov[:, 0] * cov[:, 2] - cov[:, 1] ** 2
    conic = np.stack([cov[:, 2] / det, -cov[:, 1] / det, cov[:, 0] / det],
                     axis=1)
    return SplatBatch(
        mean2d=rng.uniform(-0.1 * extent, 1.1 * extent, (n, 2)),
        conic=conic,
        z=rng.uniform(0.2, 10.0, n),
        alpha=rng.uniform(0.01, 1.0, n),
        color=rng.uniform(0.0, 1.0, (n, 3)),
    )


def time_call(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--splats", type=int, default=2000)
    parser.add_argument("--size", type=int, default=256)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    side = args.size
    splats = random_scene(args.splats, float(side), args.seed)
    rng = np.random.default_rng(args.seed + 1)
    g_color = rng.standard_normal((side, side, 3))
    g_depth = rng.standard_normal((side, side))

    backends = available_backends()
    print(f"scene: {args.splats} splats, {side}x{side} px, "
          f"best of {args.repeats}")
    print(f"backends: {', '.join(backends)}")

    results = {}
    for backend in backends:
        buffers = rasterize(splats, side, side, backend=backend)
        fwd = time_call(lambda: rasterize(splats, side, side,
                                          backend=backend), args.repeats)
        bwd = time_call(lambda: rasterize_backward(splats, buffers, g_color,
                                                   g_depth, side, side,
                                                   backend=backend),
                        args.repeats)
        grads = rasterize_backward(splats, buffers, g_color, g_depth,
                                   side, side, backend=backend)
        results[backend] = (fwd, bwd, buffers, grads)
        print(f"{backend:>9}: forward {fwd * 1e3:8.2f} ms   "
              f"backward {bwd * 1e3:8.2f} ms")

    if len(results) == 2:
        (fa, ba, buf_a, gr_a), (fb, bb, buf_b, gr_b) = (
            results[b] for b in backends)
        diff = max(
            np.abs(buf_a.color - buf_b.color).max(),
            np.abs(buf_a.depth - buf_b.depth).max(),
            np.abs(buf_a.transmittance - buf_b.transmittance).max(),
            np.abs(gr_a.mean2d - gr_b.mean2d).max(),
            np.abs(gr_a.conic - gr_b.conic).max(),
            np.abs(gr_a.z - gr_b.z).max(),
            np.abs(gr_a.alpha - gr_b.alpha).max(),
            np.abs(gr_a.color - gr_b.color).max(),
        )
        first, second = backends
        print(f"max |{first} - {second}| over buffers and grads: {diff:.3e}")
        fast, slow = (first, second) if fa <= fb else (second, first)
        f_fast, b_fast = results[fast][:2]
        f_slow, b_slow = results[slow][:2]
        print(f"{fast} over {slow}: forward {f_slow / f_fast:.1f}x, "
              f"backward {b_slow / b_fast:.1f}x")
        if diff > 1e-9:
            print("PARITY FAILURE: backends disagree beyond tolerance")
            return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
