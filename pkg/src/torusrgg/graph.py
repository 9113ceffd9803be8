"""Bit-packed graphs, samplers and serialisation.

Random draws always come from numpy generators before any kernel runs, so
the numba and numpy backends produce identical graphs for identical seeds.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ValidationError
from .geometry import ModelParams
from .hypercube import MAX_TABLE_D, SigmaSpec
from .rng import as_generator

MAX_N = 2**20
MAGIC = b"TRGG"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHQ")


class Graph:
    """Simple undirected graph on vertices ``0..n-1`` with packed rows.

    Instances are immutable: the row array is marked read-only.
    """

    __slots__ = ("n", "rows")

    def __init__(self, n: int, rows: np.ndarray):
        if n < 1:
            raise ValidationError("a graph needs n >= 1")
        if n > MAX_N:
            raise ValidationError(f"n={n} exceeds the cap {MAX_N}")
        rows = np.ascontiguousarray(rows, dtype=np.uint64)
        if rows.shape != (n, max(1, (n + 63) // 64)):
            raise ValidationError(f"row array has shape {rows.shape} for n={n}")
        rows.setflags(write=False)
        self.n = int(n)
        self.rows = rows

    # construction ---------------------------------------------------------
    @classmethod
    def from_dense(cls, adj, *, check: bool = True) -> "Graph":
        a = np.asarray(adj).astype(bool)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValidationError("adjacency must be square")
        if check:
            if np.any(np.diagonal(a)):
                raise ValidationError("adjacency must have zero diagonal")
            if not np.array_equal(a, a.T):
                raise ValidationError("adjacency must be symmetric")
        return cls(a.shape[0], kernels.pack_rows(a))

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        a = np.zeros((n, n), dtype=bool)
        e = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if e.size:
            if e.min() < 0 or e.max() >= n:
                raise ValidationError("edge endpoint out of range")
            if np.any(e[:, 0] == e[:, 1]):
                raise ValidationError("self-loops are not allowed")
            a[e[:, 0], e[:, 1]] = True
            a[e[:, 1], e[:, 0]] = True
        return cls.from_dense(a, check=False)

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls.from_dense(np.zeros((n, n), dtype=bool), check=False)

    @classmethod
    def complete(cls, n: int) -> "Graph":
        a = ~np.eye(n, dtype=bool)
        return cls.from_dense(a, check=False)

    # queries --------------------------------------------------------------
    def dense(self) -> np.ndarray:
        return kernels.unpack_rows(self.rows, self.n)

    def has_edge(self, i: int, j: int) -> bool:
        return bool((int(self.rows[i, j >> 6]) >> (j & 63)) & 1)

    def degrees(self) -> np.ndarray:
        return np.bitwise_count(self.rows).sum(axis=1).astype(np.int64)

    @property
    def n_edges(self) -> int:
        return int(self.degrees().sum()) // 2

    def density(self) -> float:
        pairs = self.n * (self.n - 1) // 2
        return self.n_edges / pairs if pairs else 0.0

    def edge_list(self) -> np.ndarray:
        i, j = np.nonzero(np.triu(self.dense(), 1))
        return np.stack([i, j], axis=1)

    def complement(self) -> "Graph":
        a = ~self.dense()
        np.fill_diagonal(a, False)
        return Graph.from_dense(a, check=False)

    def permuted(self, perm) -> "Graph":
        """Relabel so that new vertex ``perm[i]`` is old vertex ``i``."""
        perm = np.asarray(perm, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(self.n)):
            raise ValidationError("perm must be a permutation of range(n)")
        inv = np.argsort(perm)
        a = self.dense()[np.ix_(inv, inv)]
        return Graph.from_dense(a, check=False)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.rows, other.rows)

    __hash__ = None

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, edges={self.n_edges})"

    # serialisation --------------------------------------------------------
    def to_bytes(self) -> bytes:
        iu = np.triu_indices(self.n, 1)
        bits = np.packbits(self.dense()[iu], bitorder="little")
        return _HEADER.pack(MAGIC, FORMAT_VERSION, self.n) + bits.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Graph":
        if len(data) < _HEADER.size:
            raise ValidationError("truncated graph header")
        magic, version, n = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise ValidationError("not a graph file (bad magic)")
        if version != FORMAT_VERSION:
            raise ValidationError(f"unsupported graph format version {version}")
        pairs = n * (n - 1) // 2
        payload = np.frombuffer(data, dtype=np.uint8, offset=_HEADER.size)
        if payload.size != (pairs + 7) // 8:
            raise ValidationError("graph payload has the wrong length")
        flat = np.unpackbits(payload, count=pairs, bitorder="little").astype(bool)
        a = np.zeros((n, n), dtype=bool)
        iu = np.triu_indices(n, 1)
        a[iu] = flat
        return cls.from_dense(a | a.T, check=False)

    def write_binary(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def read_binary(cls, path) -> "Graph":
        return cls.from_bytes(Path(path).read_bytes())

    def write_edgelist(self, path_or_buf) -> None:
        lines = [f"# n {self.n}"] + [f"{i} {j}" for i, j in self.edge_list()]
        text = "\n".join(lines) + "\n"
        if isinstance(path_or_buf, io.TextIOBase):
            path_or_buf.write(text)
        else:
            Path(path_or_buf).write_text(text)

    @classmethod
    def read_edgelist(cls, path, n: int | None = None) -> "Graph":
        edges = []
        header_n = None
        for raw in Path(path).read_text().splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "n":
                    header_n = int(parts[1])
                continue
            a, b = line.split()
            edges.append((int(a), int(b)))
        if n is None:
            n = header_n
        if n is None:
            n = 1 + max((max(e) for e in edges), default=0)
        return cls.from_edges(n, edges)


@dataclass(frozen=True)
class LatentSample:
    """Latent positions: (n, d) floats on the torus or (n,) cube bitmasks."""

    points: np.ndarray
    space: str = "torus"

    @property
    def d(self) -> int:
        return 1 if self.points.ndim == 1 else self.points.shape[1]


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

def _upper_to_graph(n: int, upper: np.ndarray) -> Graph:
    a = np.zeros((n, n), dtype=bool)
    iu = np.triu_indices(n, 1)
    a[iu] = upper
    return Graph.from_dense(a | a.T, check=False)


def sample_er(n: int, p: float, rng=None) -> Graph:
    """Erdos-Renyi graph: every pair present independently with probability p."""
    if not (0.0 <= p <= 1.0):
        raise ValidationError(f"p must lie in [0, 1], got {p}")
    gen = as_generator(rng)
    u = gen.random(n * (n - 1) // 2)
    return _upper_to_graph(n, u < p)


def rgg_from_latents(points: np.ndarray, params: ModelParams) -> Graph:
    """Deterministic adjacency of given torus points under ``params``."""
    x = np.mod(np.asarray(points, dtype=np.float64), 2.0)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[1] != params.d:
        raise ValidationError("latent dimension does not match params.d")
    if params.is_linf:
        adj = kernels.linf_adjacency(x, params.tau)
    else:
        adj = kernels.lq_adjacency(x, params.q, params.tau)
    return Graph.from_dense(adj.view(bool), check=False)


def sample_rgg(params: ModelParams, rng=None) -> tuple[Graph, LatentSample]:
    """Random geometric graph on the L_q torus with marginal density p."""
    gen = as_generator(rng)
    x = gen.random((params.n, params.d)) * 2.0
    return rgg_from_latents(x, params), LatentSample(x)


def complement_1d_from_latents(x: np.ndarray, lam: float) -> Graph:
    x = np.asarray(x, dtype=np.float64).ravel()
    diff = np.abs(x[:, None] - x[None, :])
    np.minimum(diff, 2.0 - diff, out=diff)
    adj = diff >= 1.0 - lam
    np.fill_diagonal(adj, False)
    return Graph.from_dense(adj, check=False)


def sample_rgg_1d_complement(n: int, lam: float, rng=None) -> tuple[Graph, LatentSample]:
    """1-D torus graph joining near-antipodal points: ``|x - y|_C >= 1 - lam``."""
    if not (0.0 < lam < 1.0):
        raise ValidationError(f"lambda must lie in (0, 1), got {lam}")
    gen = as_generator(rng)
    x = gen.random(n) * 2.0
    return complement_1d_from_latents(x, lam), LatentSample(x)


def sample_hypercube_rag(n: int, d: int, sigma: SigmaSpec, rng=None) -> tuple[Graph, LatentSample]:
    """Random algebraic graph over {+-1}^d with connection function sigma.

    Edge (i, j) appears with probability ``sigma(x_i * x_j)``; coins are only
    drawn when sigma takes values strictly between 0 and 1.
    """
    if d < 1 or d > 63:
        raise ValidationError("cube dimension must lie in [1, 63]")
    if sigma.kind == "table" and d > MAX_TABLE_D:
        raise ValidationError(f"table sigma limited to d <= {MAX_TABLE_D}")
    gen = as_generator(rng)
    masks = gen.integers(0, 2**d, size=n, dtype=np.uint64, endpoint=False)
    iu = np.triu_indices(n, 1)
    diff = masks[iu[0]] ^ masks[iu[1]]
    prob = sigma.values(diff, d)
    if sigma.is_boolean():
        upper = prob > 0.5
    else:
        upper = gen.random(prob.shape) < prob
    return _upper_to_graph(n, upper), LatentSample(masks, space="cube")


def edge_pair_marginal(graphs, i: int = 0, j: int = 1) -> float:
    """Fraction of graphs containing edge (i, j)."""
    graphs = list(graphs)
    return sum(g.has_edge(i, j) for g in graphs) / max(1, len(graphs))


def binomial_se(p: float, count: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / max(count, 1))
