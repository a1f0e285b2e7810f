#!/usr/bin/env python3
"""Compare the compiled kernels against the numpy fallback.

Times the forward/backward chain at training-typical shapes and one full
training run per backend. Run after building the extension:

    python benchmarks/bench_backends.py
"""

import time

import numpy as np

import shiftscope as ss
from shiftscope import kernels


def best_of(fn, repeats=7, inner=50):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(inner):
            fn()
        best = min(best, (time.perf_counter() - t0) / inner)
    return best


def bench_chain(backend, batch, width, depth):
    impl = kernels.get_backend(backend)
    sizes = [2] + [width] * depth + [3]
    net = ss.init_net(sizes, seed=0)
    rng = np.random.default_rng(1)
    x = np.ascontiguousarray(rng.normal(size=(batch, 2)))
    d_logits = np.ascontiguousarray(rng.normal(size=(batch, 3)))
    act = kernels.ACT_RELU

    pre, post, _ = impl.forward_chain(net.weights, net.biases, x, act,
                                      net.skips)

    fwd = best_of(lambda: impl.forward_chain(net.weights, net.biases, x, act,
                                             net.skips))
    bwd = best_of(lambda: impl.backward_chain(net.weights, pre, post, x,
                                              d_logits, None, act, net.skips,
                                              False))
    return fwd, bwd


def bench_training(backend):
    original = kernels.backend_name()
    kernels.set_backend(backend)
    try:
        data = ss.gen_id(ss.SynthConfig(seed=11))
        net0 = ss.init_net([2, 16, 16, 16, 16, 3], seed=3)
        cfg = ss.LossConfig(w_dist=0.1, w_var=0.1, w_corr=0.001)
        t0 = time.perf_counter()
        ss.train(net0, data, cfg, epochs=50, seed=5)
        return time.perf_counter() - t0
    finally:
        kernels.set_backend(original)


def main():
    backends = kernels.available_backends()
    print(f"built backends: {', '.join(backends)}")
    if "c" not in backends:
        print("compiled kernels not built; nothing to compare")
        return

    print(f"\n{'shape':>22s} {'numpy':>10s} {'compiled':>10s} {'speedup':>8s}")
    for batch, width, depth in ((64, 16, 4), (256, 16, 4), (600, 16, 4),
                                (64, 64, 4), (600, 64, 4)):
        rows = {}
        for backend in ("py", "c"):
            fwd, bwd = bench_chain(backend, batch, width, depth)
            rows[backend] = fwd + bwd
        label = f"b={batch} w={width} d={depth}"
        print(f"{label:>22s} {rows['py'] * 1e6:9.1f}u {rows['c'] * 1e6:9.1f}u "
              f"{rows['py'] / rows['c']:7.2f}x")

    print("\nfull training run (600 samples, 50 epochs, composite loss):")
    for backend in ("py", "c"):
        t = bench_training(backend)
        print(f"  {backend:2s}: {t:6.2f}s")


if __name__ == "__main__":
    main()
