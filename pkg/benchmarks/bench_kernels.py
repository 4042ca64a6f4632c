"""Time the numba kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--horizon 100000]

Each case runs once for warm-up (jit compilation), then the best of
``--repeat`` timings is reported per backend.
"""

import argparse
from timeit import default_timer as timer

import numpy as np

from turnpike import IdealKind, IdealSpec, cantor_orbit, cluster_estimate, named_set
from turnpike import _kernels as K


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = timer()
        fn()
        times.append(timer() - t0)
    return min(times)


def cases(N):
    H = K.harmonic_numbers(N)
    sq = named_set("squares", N).indices
    ev = named_set("evens", N).indices
    rng = np.random.default_rng(0)
    sparse = np.sort(rng.choice(np.arange(1, N + 1), size=min(N, 2000), replace=False))
    x = cantor_orbit(N)[:, None]
    pts2 = rng.uniform(size=(N, 2))
    return [
        ("density_sup evens", lambda: K.density_sup(ev, N // 10)),
        ("log_density_sup evens", lambda: K.log_density_sup(ev, N // 10, H)),
        ("longest_ap squares", lambda: K.longest_ap(sq)),
        ("longest_ap random 2000", lambda: K.longest_ap(sparse)),
        ("cluster Cantor density", lambda: cluster_estimate(x, IdealSpec(IdealKind.DENSITY), 0.01)),
        ("cluster Cantor logarithmic", lambda: cluster_estimate(x, IdealSpec(IdealKind.LOGARITHMIC), 0.01)),
        ("cluster uniform 2-D fin", lambda: cluster_estimate(pts2, IdealSpec(IdealKind.FIN), 0.02)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--horizon", type=int, default=100_000)
    args = ap.parse_args()
    if not K.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    prev = K.backend()
    print(f"{'case':32s} {'numpy [s]':>11s} {'numba [s]':>11s} {'speedup':>9s}")
    try:
        for name, fn in cases(args.horizon):
            K.set_backend("numpy")
            t_np = best_of(fn, args.repeat)
            K.set_backend("numba")
            t_nb = best_of(fn, args.repeat)
            print(f"{name:32s} {t_np:11.4f} {t_nb:11.4f} {t_np / t_nb:8.1f}x")
    finally:
        K.set_backend(prev)


if __name__ == "__main__":
    main()
