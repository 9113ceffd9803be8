"""Signed subgraph counts and the Monte Carlo harness.

The centred adjacency ``B = A - p`` (zero diagonal) only takes two values, so
signed cycle counts are polynomials in p whose coefficients are plain
subgraph counts: edges, 2-paths, 3-paths, triangles and 4-cycles. Those are
computed from popcounts of packed rows; dense float routes are kept as
cross-checks.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from ._accel import default_threads
from .errors import ValidationError
from .geometry import ModelParams
from .graph import Graph, sample_er, sample_hypercube_rag, sample_rgg, sample_rgg_1d_complement
from .hypercube import SigmaSpec
from .patterns import EdgePattern, placements_in_kn
from .rng import RngSpec, as_generator

STAT_KINDS = ("C3", "C4", "pattern")


# ---------------------------------------------------------------------------
# statistics on one graph
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SubgraphCounts:
    n: int
    edges: int
    paths2: int
    paths3: int
    triangles: int
    four_cycles: int


def subgraph_counts(g: Graph) -> SubgraphCounts:
    deg = g.degrees()
    tri, c4, p3 = kernels.pair_counts(g.rows, deg)
    m = int(deg.sum()) // 2
    p2 = int((deg * (deg - 1) // 2).sum())
    return SubgraphCounts(g.n, m, p2, p3, tri, c4)


def _check_p(p: float) -> None:
    if not (0.0 <= p <= 1.0):
        raise ValidationError(f"centering density must lie in [0, 1], got {p}")


def signed_triangle_count(g: Graph, p: float, counts: SubgraphCounts | None = None) -> float:
    """Sum over vertex triples of ``(A_ij - p)(A_jk - p)(A_ik - p)``."""
    _check_p(p)
    c = counts or subgraph_counts(g)
    n = c.n
    return math.fsum([
        float(c.triangles),
        -p * c.paths2,
        p * p * c.edges * (n - 2),
        -(p**3) * math.comb(n, 3),
    ])


def signed_4cycle_count(g: Graph, p: float, counts: SubgraphCounts | None = None) -> float:
    """Sum over the 4-cycles of K_n of the product of the four centred entries.

    Grouping by how many of the four edges are present gives
    ``sum_k (-p)^{4-k} N_k`` with N_0 = 3 C(n,4), N_1 = m (n-2)(n-3),
    N_2 = P_2 (n-3) + 2 (C(m,2) - P_2), N_3 = P_3 and N_4 = #4-cycles.
    """
    _check_p(p)
    c = counts or subgraph_counts(g)
    n, m = c.n, c.edges
    disjoint = math.comb(m, 2) - c.paths2
    n2 = c.paths2 * (n - 3) + 2 * disjoint
    return math.fsum([
        float(c.four_cycles),
        -p * c.paths3,
        p**2 * n2,
        -(p**3) * m * (n - 2) * (n - 3),
        p**4 * 3 * math.comb(n, 4),
    ])


def centered_dense(g: Graph, p: float) -> np.ndarray:
    b = g.dense().astype(np.float64) - p
    np.fill_diagonal(b, 0.0)
    return b


def signed_triangle_count_dense(g: Graph, p: float) -> float:
    """``trace(B^3) / 6`` with dense float matrices."""
    b = centered_dense(g, p)
    return float(np.einsum("ij,ji->", b @ b, b)) / 6.0


def signed_4cycle_count_dense(g: Graph, p: float) -> float:
    """``(trace(B^4) - 2 sum_i r_i^2 + sum_ij B_ij^4) / 8`` with ``r_i = sum_j B_ij^2``.

    ``trace(B^4)`` counts each 4-cycle eight times plus the degenerate closed
    walks i-j-i-k-i and j-i-k-i-j; the walks i-j-i-j-i appear in both
    families, which the ``B_ij^4`` term repairs.
    """
    b = centered_dense(g, p)
    b2 = b @ b
    r = (b * b).sum(axis=1)
    return float((np.sum(b2 * b2.T) - 2.0 * np.dot(r, r) + np.sum(b**4)) / 8.0)


def _injective_tuples(n: int, v: int, count: int, gen: np.random.Generator) -> np.ndarray:
    idx = gen.integers(0, n, size=(count, v))
    while True:
        s = np.sort(idx, axis=1)
        bad = np.nonzero(np.any(s[:, 1:] == s[:, :-1], axis=1))[0]
        if bad.size == 0:
            return idx
        idx[bad] = gen.integers(0, n, size=(bad.size, v))


def signed_pattern_estimate(
    h: EdgePattern, g: Graph, p: float, tuples: int, rng=None
) -> tuple[float, float]:
    """Unbiased estimate of SC_H(G) from uniformly random injective vertex tuples.

    Returns ``(estimate, standard_error)``.
    """
    _check_p(p)
    if tuples < 1:
        raise ValidationError("tuple budget must be positive")
    v = h.n_vertices
    if v > g.n:
        raise ValidationError("pattern has more vertices than the graph")
    gen = as_generator(rng)
    a = g.dense()
    idx = _injective_tuples(g.n, v, tuples, gen)
    sw = np.ones(tuples)
    for x, y in h.index_edges:
        sw *= a[idx[:, x], idx[:, y]] - p
    scale = placements_in_kn(h, g.n)
    sd = sw.std(ddof=1) if tuples > 1 else 0.0
    return scale * float(sw.mean()), scale * float(sd) / math.sqrt(tuples)


@dataclass(frozen=True)
class StatSpec:
    """Which signed count to evaluate and around which density."""

    kind: str
    p: float
    pattern: EdgePattern | None = None
    tuples: int = 20000

    def __post_init__(self):
        if self.kind not in STAT_KINDS:
            raise ValidationError(f"stat kind must be one of {STAT_KINDS}")
        if not (0.0 <= self.p <= 1.0):
            raise ValidationError("centering density must lie in [0, 1]")
        if self.kind == "pattern" and self.pattern is None:
            raise ValidationError("pattern statistics need a pattern")

    def evaluate(self, g: Graph, rng=None) -> float:
        if self.kind == "C3":
            return signed_triangle_count(g, self.p)
        if self.kind == "C4":
            return signed_4cycle_count(g, self.p)
        return signed_pattern_estimate(self.pattern, g, self.p, self.tuples, rng)[0]

    def label(self) -> str:
        return self.kind if self.kind != "pattern" else f"pattern[{self.pattern}]"


def er_null_variance(stat: StatSpec, n: int) -> float:
    """Exact ER variance of a signed count: placements times (p(1-p))^|E|."""
    from .patterns import cycle

    h = {"C3": cycle(3), "C4": cycle(4)}.get(stat.kind, stat.pattern)
    return placements_in_kn(h, n) * (stat.p * (1 - stat.p)) ** h.n_edges


# ---------------------------------------------------------------------------
# models and the Monte Carlo harness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    """A graph distribution: ``er``, ``rgg``, ``complement1d`` or ``hypercube``."""

    kind: str
    n: int
    p: float = 0.5
    params: ModelParams | None = None
    lam: float = 0.0
    d: int = 0
    sigma: SigmaSpec | None = None

    def __post_init__(self):
        if self.kind not in ("er", "rgg", "complement1d", "hypercube"):
            raise ValidationError(f"unknown model kind {self.kind!r}")
        if self.n < 1:
            raise ValidationError("n must be >= 1")
        if self.kind == "rgg" and self.params is None:
            raise ValidationError("rgg model needs ModelParams")
        if self.kind == "hypercube" and (self.sigma is None or self.d < 1):
            raise ValidationError("hypercube model needs d and sigma")

    @classmethod
    def er(cls, n: int, p: float) -> "ModelSpec":
        return cls("er", n, p)

    @classmethod
    def rgg(cls, params: ModelParams) -> "ModelSpec":
        return cls("rgg", params.n, params.p, params=params)

    def sample(self, gen: np.random.Generator) -> Graph:
        if self.kind == "er":
            return sample_er(self.n, self.p, gen)
        if self.kind == "rgg":
            return sample_rgg(self.params, gen)[0]
        if self.kind == "complement1d":
            return sample_rgg_1d_complement(self.n, self.lam, gen)[0]
        return sample_hypercube_rag(self.n, self.d, self.sigma, gen)[0]

    def describe(self) -> str:
        if self.kind == "rgg":
            q = self.params.q
            return f"rgg(n={self.n},d={self.params.d},q={'inf' if math.isinf(q) else q},p={self.p})"
        if self.kind == "er":
            return f"er(n={self.n},p={self.p})"
        if self.kind == "complement1d":
            return f"complement1d(n={self.n},lambda={self.lam})"
        return f"hypercube(n={self.n},d={self.d},sigma={self.sigma.describe()})"


def replicate_generator(spec: RngSpec, r: int) -> np.random.Generator:
    ss = np.random.SeedSequence([spec.master_seed, spec.stream_index, int(r)])
    return np.random.Generator(np.random.Philox(ss))


def run_replicates(fn, replicates: int, spec: RngSpec, threads: int | None = None) -> np.ndarray:
    """Evaluate ``fn(gen, r)`` for every replicate with its own sub-stream.

    Replicates are split into contiguous chunks across a thread pool and
    written back by index, so the output never depends on ``threads``.
    """
    threads = threads or default_threads()
    out = np.empty(replicates)

    def work(lo: int, hi: int) -> None:
        for r in range(lo, hi):
            out[r] = fn(replicate_generator(spec, r), r)

    if threads <= 1 or replicates < 2:
        work(0, replicates)
        return out
    bounds = np.linspace(0, replicates, min(threads, replicates) + 1).astype(int)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(work, int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:])]
        for f in futures:
            f.result()
    return out


@dataclass(frozen=True)
class ExperimentReport:
    model: str
    stat: str
    replicates: int
    mean: float
    variance: float
    std_error: float
    z_score_vs_null: float
    seeds: RngSpec
    wall_time: float
    values: np.ndarray | None = field(default=None, repr=False, compare=False)
    decisions: dict | None = None

    def summary(self) -> dict:
        return {
            "model": self.model,
            "stat": self.stat,
            "replicates": self.replicates,
            "mean": self.mean,
            "variance": self.variance,
            "std_error": self.std_error,
            "z_score_vs_null": self.z_score_vs_null,
            "master_seed": self.seeds.master_seed,
            "stream_index": self.seeds.stream_index,
        }


def summarize(values: np.ndarray, *, model: str, stat: str, spec: RngSpec, wall: float,
              null_variance: float = math.nan, keep_values: bool = False) -> ExperimentReport:
    reps = len(values)
    mean = float(np.mean(values))
    var = float(np.var(values, ddof=1)) if reps > 1 else 0.0
    se = math.sqrt(var / reps)
    z = mean / math.sqrt(null_variance / reps) if null_variance and null_variance > 0 else math.nan
    return ExperimentReport(model, stat, reps, mean, var, se, z, spec, wall,
                            values.copy() if keep_values else None)


def mc_run(
    model: ModelSpec,
    stat: StatSpec,
    replicates: int,
    rng: RngSpec | int,
    *,
    threads: int | None = None,
    keep_values: bool = False,
) -> ExperimentReport:
    """Sample ``replicates`` graphs, evaluate ``stat`` and aggregate.

    ``z_score_vs_null`` is the mean divided by the null standard error
    ``sqrt(Var_ER / replicates)`` computed from the exact ER variance.
    """
    if replicates < 2:
        raise ValidationError("mc_run needs at least 2 replicates")
    spec = rng if isinstance(rng, RngSpec) else RngSpec(int(rng))
    start = time.perf_counter()

    def one(gen, r):
        g = model.sample(gen)
        return stat.evaluate(g, gen)

    values = run_replicates(one, replicates, spec, threads)
    wall = time.perf_counter() - start
    null_var = er_null_variance(stat, model.n) if 0 < stat.p < 1 else math.nan
    return summarize(values, model=model.describe(), stat=stat.label(), spec=spec, wall=wall,
                     null_variance=null_var, keep_values=keep_values)


def write_replicates_csv(report: ExperimentReport, path, header: dict | None = None) -> None:
    """Replicate-level dump: columns replicate, statistic, seed."""
    if report.values is None:
        raise ValidationError("report was created without keep_values")
    path = Path(path)
    with path.open("w", newline="") as fh:
        for key, val in (header or {}).items():
            fh.write(f"# {key}: {val}\n")
        w = csv.writer(fh)
        w.writerow(["replicate", "statistic", "seed"])
        for r, v in enumerate(report.values):
            w.writerow([r, repr(float(v)), f"{report.seeds.master_seed}:{report.seeds.stream_index}:{r}"])
