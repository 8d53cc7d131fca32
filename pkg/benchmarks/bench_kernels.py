"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Times each kernel on batch-sized inputs, then one short end-to-end training
run per backend. The training comparison swaps the module that
``fairselect.neural_net`` dispatches to.
"""
import argparse
import timeit

import numpy as np

from fairselect import _kernels_py, neural_net
from fairselect.dataset import generate_synthetic, preprocess, stratified_split
from fairselect.losses import FairnessConfig
from fairselect.trainer import TrainConfig, train

try:
    from fairselect import _kernels as compiled
except ImportError:  # extension not built
    compiled = None


def kernel_cases(rng, n=32, d=14, h=64):
    X = rng.normal(size=(n, d))
    W, b = rng.normal(size=(d, h)), rng.normal(size=h)
    g, bt = np.ones(h), np.zeros(h)
    rm, rv = np.zeros(h), np.ones(h)
    _, xhat, inv, y, _, _ = _kernels_py.hidden_forward(X, W, b, g, bt, rm, rv, True, 1e-5)
    da = rng.normal(size=(n, h))
    a = rng.normal(size=(n, h))
    W3, b3 = rng.normal(size=(h, 1)), rng.normal(size=1)
    _, p = _kernels_py.output_forward(a, W3, b3)
    dp = rng.normal(size=n)
    P = rng.normal(size=(d, h))
    G = rng.normal(size=(d, h))
    return {
        "hidden_forward": lambda k: k.hidden_forward(X, W, b, g, bt, rm, rv, True, 1e-5),
        "hidden_backward": lambda k: k.hidden_backward(da, X, W, g, xhat, inv, y),
        "output_forward": lambda k: k.output_forward(a, W3, b3),
        "output_backward": lambda k: k.output_backward(dp, a, W3, p),
        "adam_update": lambda k: k.adam_update(P, G, np.zeros_like(P), np.zeros_like(P), 1e-3, 0.9, 0.999, 1e-8, 1),
    }


def time_training(backend, tr, va, repeat):
    saved = neural_net.kernels
    neural_net.kernels = backend
    try:
        cfg = TrainConfig(epochs=5, patience=5, fairness=FairnessConfig(lam=3.0, mode="race_only"))
        return min(timeit.repeat(lambda: train(tr, va, cfg), number=1, repeat=repeat))
    finally:
        neural_net.kernels = saved


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if compiled is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation`")

    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'python us':>12}{'compiled us':>14}{'speedup':>10}")
    for name, call in kernel_cases(rng).items():
        n = 2000
        t_py = min(timeit.repeat(lambda: call(_kernels_py), number=n, repeat=args.repeat)) / n * 1e6
        t_c = min(timeit.repeat(lambda: call(compiled), number=n, repeat=args.repeat)) / n * 1e6
        print(f"{name:<18}{t_py:>12.2f}{t_c:>14.2f}{t_py / t_c:>9.2f}x")

    tr, va = stratified_split(preprocess(generate_synthetic(seed=0)), 0.8, seed=0)
    t_py = time_training(_kernels_py, tr, va, args.repeat)
    t_c = time_training(compiled, tr, va, args.repeat)
    print(f"{'train (5 epochs)':<18}{t_py * 1e3:>10.1f}ms{t_c * 1e3:>12.1f}ms{t_py / t_c:>9.2f}x")


if __name__ == "__main__":
    main()
