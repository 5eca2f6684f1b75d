"""Time every kernel under numba and pure numpy on the same inputs.

    python benchmarks/bench_kernels.py [--repeat 3] [--schedules 4000]

Each workload is run once per backend to compile and check that both backends
agree, then timed ``--repeat`` times; the best time is reported.
"""

import argparse
import time

import numpy as np

from ctconsensus import corpus, kernels
from ctconsensus.conditions import fault_diameter
from ctconsensus.graph import complete
from ctconsensus.impossibility import counterexample_graph, table_count, table_luts
from ctconsensus.sync_engine import all_binary_inputs, input_planes, random_schedule_arrays


def workloads(n_schedules):
    codes = corpus.isomorphism_class_codes(5)
    masks = corpus.codes_to_out_masks(5, codes)
    subsets = kernels.subset_masks(5, 2)

    G = complete(5)
    d = fault_diameter(G, 1)
    rng = np.random.default_rng(0)
    cr, cm = random_schedule_arrays(G, 1, d, 4, rng, n_schedules)
    v0 = np.ascontiguousarray(np.broadcast_to(input_planes(all_binary_inputs(5)), (n_schedules, 5)))
    om = np.asarray(G.out_masks, dtype=np.int64)

    K = 3
    n_mvc = n_schedules // 4
    mcr, mcm = random_schedule_arrays(G, 1, d, (K + 1) * 4, rng, n_mvc)
    minputs = rng.integers(0, K + 1, size=(n_mvc, 5))

    H = counterexample_graph(2)
    luts = table_luts(6, np.arange(table_count(6)))
    x0 = np.array([1, 0, 0, 0, 0], dtype=np.int8)

    return {
        f"ct_connectivity ({len(codes)} classes, k<=2)": lambda k: k.ct_connectivity(masks, subsets),
        f"first_failing_partition ({len(codes)} classes)": lambda k: k.first_failing_partition(masks, 1),
        f"minmax_bits (K5, {n_schedules} schedules x 32 inputs)": lambda k: k.minmax_bits(om, cr, cm, v0, 4, d),
        f"mvc (K5, K=3, {n_mvc} runs)": lambda k: k.mvc(om, mcr, mcm, minputs, K, 4, d),
        f"fixed_iterative (f=2, {luts.shape[0]} tables)": lambda k: k.fixed_iterative(np.asarray(H.in_masks, dtype=np.int64), 0b11011, luts, x0, 32),
    }


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--schedules", type=int, default=4000)
    args = ap.parse_args()

    nb, npy = kernels.backend("numba"), kernels.backend("numpy")
    print(f"{'kernel':<52} {'numba s':>10} {'numpy s':>10} {'speedup':>8}  agree")
    for name, run in workloads(args.schedules).items():
        agree = _same(run(nb), run(npy))
        t_nb = best_of(lambda: run(nb), args.repeat)
        t_np = best_of(lambda: run(npy), args.repeat)
        print(f"{name:<52} {t_nb:>10.4f} {t_np:>10.4f} {t_np / t_nb:>7.1f}x  {agree}")


if __name__ == "__main__":
    main()
