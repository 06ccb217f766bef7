#!/usr/bin/env python3
"""Compare the compiled kernels against the numpy fallback.

Times the three backend entry points at a few realistic sizes plus one full
training run, and prints a table with the speedup.  Run after `pip install
-e .`; if the extension is missing only the fallback column appears.
"""

import argparse
import time

import numpy as np

from avparse.backend import layout, pure
from avparse.labels import PseudoLabelMatrix, Stage
from avparse.network import TrainConfig, TrainExample, train
from avparse.synth import ScenarioConfig, generate_scenario

try:
    from avparse.backend import _core
except ImportError:
    _core = None


def bench(fn, *args, repeat=2000):
    fn(*args)
    best = float("inf")
    for _ in range(3):
        t0 = time.perf_counter()
        for _ in range(repeat):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / repeat)
    return best


def kernel_args(T, d_in, d_model, heads, C, seed=0):
    rng = np.random.default_rng(seed)
    dims = layout.NetDims(d_in, d_in, d_model, heads, C)
    theta = rng.standard_normal(layout.total_params(dims)) * 0.3
    audio = rng.standard_normal((T, d_in))
    visual = rng.standard_normal((T, d_in))
    y = (rng.random(C) < 0.6).astype(float)
    y[0] = 1.0
    pseudo = (rng.random((T, C)) < 0.5) * y[None, :]
    targets = (y, 0.8 * y + 0.1, pseudo.any(axis=0).astype(float),
               pseudo.sum(axis=1) / y.sum(), pseudo.mean(axis=0), float(y.sum()))
    return theta, dims, audio, visual, targets


def bench_kernels(repeat):
    shapes = [
        ("tiny  (T=4,  d=8,  C=4)", (4, 6, 8, 2, 4)),
        ("desk  (T=10, d=32, C=8)", (10, 16, 32, 4, 8)),
        ("bench (T=10, d=64, C=25)", (10, 16, 64, 4, 25)),
    ]
    print(f"{'kernel':<34} {'numpy':>10} {'compiled':>10} {'speedup':>8}")
    for label, shape in shapes:
        theta, dims, audio, visual, targets = kernel_args(*shape)
        for name, pa, ca in (
            ("forward", (theta, dims, audio, visual), None),
            ("loss_value", (theta, dims, audio, visual, targets, 0.5, 1e-7), None),
            ("loss_grad", (theta, dims, audio, visual, targets, 0.5, 1e-7), None),
        ):
            t_py = bench(getattr(pure, name), *pa, repeat=repeat)
            row = f"{label} {name:<12.12}"[:34]
            if _core is None:
                print(f"{row:<34} {t_py * 1e6:>8.1f}us {'-':>10} {'-':>8}")
            else:
                t_cy = bench(getattr(_core, name), *pa, repeat=repeat)
                print(f"{row:<34} {t_py * 1e6:>8.1f}us {t_cy * 1e6:>8.1f}us {t_py / t_cy:>7.1f}x")


def bench_training():
    scenario = generate_scenario(ScenarioConfig(n_videos=20, T=10, C=8, seed=0))
    dataset = [
        TrainExample(v.features, v.labels, PseudoLabelMatrix(v.gt_visual, Stage.PLG))
        for v in scenario.videos
    ]
    cfg = TrainConfig(epochs=10, batch_size=8, lr=3e-3, d_model=32, n_heads=4, seed=0)
    import avparse.backend as B

    t0 = time.perf_counter()
    train(dataset, cfg)
    dt = time.perf_counter() - t0
    print(f"\ntraining (20 videos x 10 epochs, d=32) on the {B.active_backend()} backend: {dt:.2f}s")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=2000)
    args = ap.parse_args()
    if _core is None:
        print("compiled extension not available; showing the numpy fallback only\n")
    bench_kernels(args.repeat)
    bench_training()


if __name__ == "__main__":
    main()
