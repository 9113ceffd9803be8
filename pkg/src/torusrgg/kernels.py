"""Hot loops: adjacency construction, bit-packed pair counting, alcove counting.

Every kernel exists twice, a numba ``@njit`` version (``*_nb``) and a numpy
version (``*_np``). The public names dispatch on :data:`torusrgg._accel.USE_NUMBA`.
Both paths are deterministic and agree exactly on integer outputs.
"""

from __future__ import annotations

import numpy as np

from ._accel import HAVE_NUMBA, USE_NUMBA, njit

INT_POWER_MAX = 16

__all__ = [
    "pack_rows",
    "unpack_rows",
    "linf_adjacency",
    "lq_adjacency",
    "pair_counts",
    "alcove_count",
]


# ---------------------------------------------------------------------------
# bit packing (numpy only, shared by both backends)
# ---------------------------------------------------------------------------

def pack_rows(dense: np.ndarray) -> np.ndarray:
    """Pack a boolean (n, n) matrix into little-endian uint64 rows.

    Bit ``j`` of row ``i`` lives in word ``j // 64`` at position ``j % 64``.
    """
    dense = np.asarray(dense, dtype=bool)
    n = dense.shape[1]
    words = max(1, (n + 63) // 64)
    packed = np.packbits(dense, axis=1, bitorder="little")
    out = np.zeros((dense.shape[0], words * 8), dtype=np.uint8)
    out[:, : packed.shape[1]] = packed
    return out.view("<u8").astype(np.uint64, copy=False)


def unpack_rows(rows: np.ndarray, n: int) -> np.ndarray:
    as_bytes = np.ascontiguousarray(rows).astype("<u8", copy=False).view(np.uint8)
    return np.unpackbits(as_bytes, axis=1, count=n, bitorder="little").astype(bool)


# ---------------------------------------------------------------------------
# adjacency
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _linf_adjacency_nb(x, tau):
    n, d = x.shape
    adj = np.zeros((n, n), dtype=np.uint8)
    for i in range(n):
        for j in range(i + 1, n):
            ok = True
            for u in range(d):
                diff = abs(x[i, u] - x[j, u])
                if diff > 1.0:
                    diff = 2.0 - diff
                if diff > tau:
                    ok = False
                    break
            if ok:
                adj[i, j] = 1
                adj[j, i] = 1
    return adj


def _linf_adjacency_np(x, tau):
    n, d = x.shape
    adj = np.ones((n, n), dtype=bool)
    for u in range(d):
        diff = np.abs(x[:, u, None] - x[None, :, u])
        np.minimum(diff, 2.0 - diff, out=diff)
        adj &= diff <= tau
    np.fill_diagonal(adj, False)
    return adj.astype(np.uint8)


@njit(cache=True, nogil=True)
def _lq_adjacency_nb(x, q, tau_q, k):
    # k > 0 means q == k and powers are formed by repeated multiplication
    n, d = x.shape
    adj = np.zeros((n, n), dtype=np.uint8)
    for i in range(n):
        for j in range(i + 1, n):
            s = 0.0
            ok = True
            for u in range(d):
                diff = abs(x[i, u] - x[j, u])
                if diff > 1.0:
                    diff = 2.0 - diff
                if k > 0:
                    t = diff
                    for _ in range(k - 1):
                        t *= diff
                else:
                    t = diff ** q
                s += t
                if s > tau_q:
                    ok = False
                    break
            if ok:
                adj[i, j] = 1
                adj[j, i] = 1
    return adj


def _lq_adjacency_np(x, q, tau_q, k):
    n, d = x.shape
    acc = np.zeros((n, n))
    for u in range(d):
        diff = np.abs(x[:, u, None] - x[None, :, u])
        np.minimum(diff, 2.0 - diff, out=diff)
        if k > 0:
            t = diff.copy()
            for _ in range(k - 1):
                t *= diff
        else:
            t = diff**q
        acc += t
    adj = acc <= tau_q
    np.fill_diagonal(adj, False)
    return adj.astype(np.uint8)


# ---------------------------------------------------------------------------
# pair counts on packed rows
# ---------------------------------------------------------------------------

if HAVE_NUMBA:
    from numba import types
    from numba.extending import intrinsic

    @intrinsic
    def _ctpop(typingctx, x):
        sig = types.uint64(types.uint64)

        def codegen(context, builder, signature, args):
            return builder.ctpop(args[0])

        return sig, codegen
else:  # pragma: no cover
    def _ctpop(x):
        return bin(int(x)).count("1")


@njit(cache=True, nogil=True)
def _pair_counts_nb(rows, deg):
    n, words = rows.shape
    tri = 0
    c4 = 0
    p3 = 0
    one = np.uint64(1)
    for i in range(n):
        for j in range(i + 1, n):
            c = 0
            for w in range(words):
                c += _ctpop(rows[i, w] & rows[j, w])
            c4 += c * (c - 1) // 2
            bit = (rows[i, j >> 6] >> np.uint64(j & 63)) & one
            if bit:
                tri += c
                p3 += (deg[i] - 1) * (deg[j] - 1)
    tri //= 3
    c4 //= 2
    p3 -= 3 * tri
    return tri, c4, p3


def _pair_counts_np(rows, deg):
    n = rows.shape[0]
    a = unpack_rows(rows, n).astype(np.float64)
    co = a @ a
    iu = np.triu_indices(n, 1)
    c = co[iu]
    tri = int(round((c * a[iu]).sum())) // 3
    c4 = int(round((c * (c - 1) / 2).sum())) // 2
    dm1 = deg.astype(np.float64) - 1.0
    p3 = int(round((np.outer(dm1, dm1)[iu] * a[iu]).sum())) - 3 * tri
    return tri, c4, p3


# ---------------------------------------------------------------------------
# alcove counting for bipartite blocks
# ---------------------------------------------------------------------------

def _alcove_count_py(nv, nbr_mask, order, parent):
    """Count alcoves of {z : z_0 = 0, |z_a - z_b| <= 1 on edges}.

    ``nbr_mask[v]`` is the neighbour bitmask of ``v``; ``order`` is a BFS
    order starting at vertex 0 and ``parent`` the BFS tree.
    """
    k = np.zeros(nv, dtype=np.int64)
    delta = np.full(nv + 1, -2, dtype=np.int64)
    placed_at = np.zeros(nv, dtype=np.int64)
    for idx in range(nv):
        placed_at[order[idx]] = idx
    nsub = 1 << (nv - 1)
    dp = np.zeros(nsub, dtype=np.int64)
    pred = np.zeros(nv, dtype=np.int64)
    total = 0
    pos = 1
    while pos >= 1:
        if pos == nv:
            # precedence masks over non-root vertices (bit v-1)
            feasible = True
            for v in range(nv):
                pred[v] = 0
            for a in range(nv):
                m = nbr_mask[a]
                for b in range(nv):
                    if (m >> b) & 1 and k[a] == k[b] + 1:
                        # a must precede b in fractional order
                        if b == 0:
                            feasible = False
                        elif a != 0:
                            pred[b] |= 1 << (a - 1)
            if feasible:
                for s in range(nsub):
                    dp[s] = 0
                dp[0] = 1
                for s in range(nsub):
                    if dp[s] == 0:
                        continue
                    for v in range(1, nv):
                        bit = 1 << (v - 1)
                        if (s & bit) == 0 and (pred[v] & s) == pred[v]:
                            dp[s | bit] += dp[s]
                total += dp[nsub - 1]
            pos -= 1
            continue
        v = order[pos]
        delta[pos] += 1
        if delta[pos] > 1:
            delta[pos] = -2
            pos -= 1
            continue
        k[v] = k[parent[v]] + delta[pos]
        ok = True
        m = nbr_mask[v]
        for u in range(nv):
            if (m >> u) & 1 and placed_at[u] < pos:
                if abs(k[v] - k[u]) > 1:
                    ok = False
                    break
        if ok:
            pos += 1
    return total


_alcove_count_nb = njit(cache=True, nogil=True)(_alcove_count_py)


def _alcove_count_np(nv, nbr_mask, order, parent):
    return _alcove_count_py(nv, nbr_mask, order, parent)


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def linf_adjacency(x: np.ndarray, tau: float) -> np.ndarray:
    """Dense uint8 adjacency of points ``x`` (n, d) under the L-infinity rule."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if USE_NUMBA:
        return _linf_adjacency_nb(x, float(tau))
    return _linf_adjacency_np(x, float(tau))


def lq_adjacency(x: np.ndarray, q: float, tau: float) -> np.ndarray:
    """Dense uint8 adjacency under ``sum |x_i - y_i|_C^q <= tau^q``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    q = float(q)
    tau_q = float(tau) ** q
    k = int(q) if q.is_integer() and q <= INT_POWER_MAX else 0
    if USE_NUMBA:
        return _lq_adjacency_nb(x, q, tau_q, k)
    return _lq_adjacency_np(x, q, tau_q, k)


def pair_counts(rows: np.ndarray, deg: np.ndarray) -> tuple[int, int, int]:
    """Return (triangles, 4-cycles, 3-edge paths) of a packed graph."""
    rows = np.ascontiguousarray(rows, dtype=np.uint64)
    deg = np.ascontiguousarray(deg, dtype=np.int64)
    if USE_NUMBA:
        tri, c4, p3 = _pair_counts_nb(rows, deg)
    else:
        tri, c4, p3 = _pair_counts_np(rows, deg)
    return int(tri), int(c4), int(p3)


def alcove_count(nv: int, nbr_mask, order, parent) -> int:
    nbr_mask = np.asarray(nbr_mask, dtype=np.int64)
    order = np.asarray(order, dtype=np.int64)
    parent = np.asarray(parent, dtype=np.int64)
    if nv == 1:
        return 1
    if USE_NUMBA:
        return int(_alcove_count_nb(nv, nbr_mask, order, parent))
    return int(_alcove_count_np(nv, nbr_mask, order, parent))
