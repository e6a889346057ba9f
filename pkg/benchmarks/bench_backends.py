"""Time the numba kernels against the numpy fallback.

    python3 benchmarks/bench_backends.py [--repeats 5]

Both variants are called directly from espca.accel, so ESPCA_BACKEND does
not matter here. Numba kernels are warmed up once before timing.
"""
import argparse
import time

import numpy as np

from espca import accel
from espca.gp import random_tree
from espca.transforms import TransformStack, VariableSchema


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    # one ES generation: P=200 candidates, batch 128, p=3 numerical nets
    stack = TransformStack(tuple(VariableSchema(f"x{j}") for j in range(3)))
    theta = rng.standard_normal((200, stack.n_params))
    U = rng.standard_normal((128, 3))
    fargs = (theta, U, stack.in_off, stack.par_off, stack.hidden)
    T = accel.forward_population_np(*fargs)
    S = accel.standardized_covariance_np(T)

    # one GP generation: 1000 individuals x 2 trees on 750 rows
    trees = [random_tree(rng, int(rng.integers(2, 8)), bool(rng.integers(2))) for _ in range(2000)]
    ops = np.array([o for t in trees for o in t.ops], dtype=np.int64)
    vals = np.array([v for t in trees for v in t.vals])
    starts = np.cumsum([0] + [len(t) for t in trees]).astype(np.int64)
    cols = (np.arange(2000) % 2).astype(np.int64)
    X = rng.uniform(-12, 12, (750, 2))
    gargs = (ops, vals, starts, cols, X)

    return [
        ("forward_population P=200 m=128 p=3", accel.forward_population_np, accel.forward_population_nb, fargs),
        ("standardized_covariance P=200", accel.standardized_covariance_np, accel.standardized_covariance_nb, (T,)),
        ("eigh_population P=200 p=3", accel.eigh_population_np, accel.eigh_population_nb, (S,)),
        ("eval_forest 2000 trees x 750 rows", accel.eval_forest_np, accel.eval_forest_nb, gargs),
    ]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':40s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for name, f_np, f_nb, a in cases(rng):
        f_nb(*a)  # compile
        r_np, r_nb = f_np(*a), f_nb(*a)
        for x, y in zip(r_np if isinstance(r_np, tuple) else (r_np,), r_nb if isinstance(r_nb, tuple) else (r_nb,)):
            assert np.allclose(x, y, atol=1e-8), name
        t_np = best_of(lambda: f_np(*a), args.repeats)
        t_nb = best_of(lambda: f_nb(*a), args.repeats)
        print(f"{name:40s} {1e3 * t_np:10.2f} {1e3 * t_nb:10.2f} {t_np / t_nb:7.1f}x")


if __name__ == "__main__":
    main()
