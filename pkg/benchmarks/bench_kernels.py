"""Compare the numba kernels with their numpy fallbacks.

Both paths are called directly in one process, so the environment flag does
not matter here. Each timing is the best of ``--repeat`` runs after one
warm-up call (which also triggers compilation).

    python3 benchmarks/bench_kernels.py --n 2000 --d 20
"""

import argparse
import time

import numpy as np

from torusrgg import kernels
from torusrgg._accel import HAVE_NUMBA
from torusrgg.geometry import derive_tau_lambda
from torusrgg.patterns import complete_bipartite
from torusrgg.polymer import _bfs


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def alcove_args(block):
    nv = block.n_vertices
    adj = [set() for _ in range(nv)]
    masks = np.zeros(nv, dtype=np.int64)
    for a, b in block.index_edges:
        adj[a].add(b)
        adj[b].add(a)
        masks[a] |= 1 << b
        masks[b] |= 1 << a
    order, parent, _ = _bfs(nv, adj)
    return nv, masks, np.array(order), np.array(parent)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1500)
    ap.add_argument("--d", type=int, default=20)
    ap.add_argument("--q", type=float, default=2.0)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    gen = np.random.default_rng(args.seed)
    x = gen.random((args.n, args.d)) * 2.0
    linf = derive_tau_lambda(args.n, args.d, "inf", 0.5)
    lq = derive_tau_lambda(args.n, args.d, args.q, 0.5)
    tau_q = lq.tau ** args.q
    k = int(args.q) if float(args.q).is_integer() and args.q <= kernels.INT_POWER_MAX else 0
    adj = kernels._linf_adjacency_np(x, linf.tau).astype(bool)
    rows = kernels.pack_rows(adj)
    deg = np.bitwise_count(rows).sum(axis=1).astype(np.int64)
    alc = alcove_args(complete_bipartite(3, 4))

    cases = [
        ("linf_adjacency", lambda: kernels._linf_adjacency_nb(x, linf.tau), lambda: kernels._linf_adjacency_np(x, linf.tau)),
        ("lq_adjacency", lambda: kernels._lq_adjacency_nb(x, args.q, tau_q, k), lambda: kernels._lq_adjacency_np(x, args.q, tau_q, k)),
        ("pair_counts", lambda: kernels._pair_counts_nb(rows, deg), lambda: kernels._pair_counts_np(rows, deg)),
        ("alcove_count K34", lambda: kernels._alcove_count_nb(*alc), lambda: kernels._alcove_count_np(*alc)),
    ]
    print(f"n={args.n} d={args.d} q={args.q} repeat={args.repeat}")
    print(f"{'kernel':<18}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}  agree")
    for name, fast, slow in cases:
        tf, of = best_of(fast, args.repeat)
        ts, os_ = best_of(slow, 1 if name.startswith("alcove") else args.repeat)
        same = np.array_equal(np.asarray(of), np.asarray(os_))
        print(f"{name:<18}{tf:>12.4f}{ts:>12.4f}{ts / tf:>10.1f}  {same}")


if __name__ == "__main__":
    main()
