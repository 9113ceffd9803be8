"""One-dimensional polymer quantities chi, psi and Err.

``chi(A)`` is the probability that every edge of ``A`` appears in the 1-D
complement model, where points on a circle of circumference 2 are joined when
``|x - y|_C >= 1 - lam``. It factorises over 2-connected blocks. For a
bipartite block, shifting one colour class by 1 turns each edge constraint
into ``|y_a - y_b|_C <= lam``; without wrap-around the block contributes
``(lam/2)^{v-1} * Vol(P)`` with ``P = {z : z_0 = 0, |z_a - z_b| <= 1 on edges}``.
``P`` is an alcoved polytope, so its volume is an alcove count over
``(v-1)!``, which makes every chi an exact rational multiple of a power of lam.

Wrap-around cannot occur while ``v * lam < 1`` for every block (the
``"exact"`` guard). The stricter ``"claim"`` guard requires
``|V(A)| <= 1/(8 lam)``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import InternalConsistencyError, ValidationError
from .geometry import phi_fraction
from .patterns import EdgePattern, PatternFacts, pattern_facts
from .rng import as_generator

MAX_ERR_EDGES = 20
ALCOVE_MAX_VERTICES = 11
DEFAULT_MC_SAMPLES = 10**6
GUARDS = ("exact", "claim")
PIE_RTOL = 1e-12


@dataclass(frozen=True)
class ChiResult:
    value: float
    method: str  # "closed-form" or "monte-carlo"
    se: float = 0.0

    def __iter__(self):
        return iter((self.value, self.method, self.se))


@dataclass(frozen=True)
class PolymerEntry:
    mask: int
    chi: float
    psi: float
    method: str
    se: float


@dataclass(frozen=True)
class PolymerTable:
    """chi/psi for every edge subset of a pattern, keyed by subset bitmask."""

    pattern: EdgePattern
    lam: float
    entries: dict

    def __getitem__(self, mask: int) -> PolymerEntry:
        return self.entries[mask]

    def __len__(self) -> int:
        return len(self.entries)


# ---------------------------------------------------------------------------
# guards
# ---------------------------------------------------------------------------

def check_guard(h: EdgePattern, lam: float, guard: str = "exact", facts: PatternFacts | None = None) -> None:
    """Raise if chi values for sub-patterns of ``h`` may not be exact at ``lam``."""
    if guard not in GUARDS:
        raise ValidationError(f"guard must be one of {GUARDS}")
    if not (0.0 < lam < 1.0):
        raise ValidationError(f"lambda must lie in (0, 1), got {lam}")
    if guard == "claim":
        if h.n_vertices > 1.0 / (8.0 * lam):
            raise ValidationError(
                f"|V(A)| = {h.n_vertices} exceeds 1/(8*lambda) = {1.0 / (8.0 * lam):.4g}"
            )
        return
    facts = facts or pattern_facts(h)
    sizes = facts.block_vertex_counts(h)
    worst = max(sizes) if sizes else 0
    if worst * lam >= 1.0:
        raise ValidationError(
            f"largest block has {worst} vertices and lambda={lam:.4g}; "
            f"need block_vertices * lambda < 1 (got {worst * lam:.4g})"
        )


# ---------------------------------------------------------------------------
# exact chi
# ---------------------------------------------------------------------------

def _bfs(nv: int, adj) -> tuple[list[int], list[int], list[int]]:
    order = [0]
    parent = [0] * nv
    depth = [0] * nv
    seen = [False] * nv
    seen[0] = True
    dq = deque([0])
    while dq:
        v = dq.popleft()
        for u in sorted(adj[v]):
            if not seen[u]:
                seen[u] = True
                parent[u] = v
                depth[u] = depth[v] + 1
                order.append(u)
                dq.append(u)
    return order, parent, depth


@lru_cache(maxsize=4096)
def _alcove_count_key(nv: int, edges: tuple) -> int:
    adj = [set() for _ in range(nv)]
    masks = [0] * nv
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
        masks[a] |= 1 << b
        masks[b] |= 1 << a
    order, parent, _ = _bfs(nv, adj)
    return kernels.alcove_count(nv, masks, order, parent)


def alcove_count(block: EdgePattern) -> int:
    """Number of alcoves in ``{z : z_0 = 0, |z_a - z_b| <= 1 on edges}``."""
    return _alcove_count_key(*block.edge_key())


def _block_coefficient(block: EdgePattern, facts: PatternFacts) -> tuple[Fraction, int] | None:
    nv, ne = block.n_vertices, block.n_edges
    if ne == 1:
        return Fraction(1), 1
    if not facts.bipartite:
        return Fraction(0), 0
    if ne == nv:  # a cycle
        return phi_fraction(nv - 1), nv - 1
    if nv > ALCOVE_MAX_VERTICES:
        return None
    count = alcove_count(block)
    return Fraction(count, 2 ** (nv - 1) * math.factorial(nv - 1)), nv - 1


def split_blocks(a: EdgePattern, facts: PatternFacts | None = None) -> list[EdgePattern]:
    facts = facts or pattern_facts(a)
    return [EdgePattern.from_edges([a.edges[i] for i in blk]) for blk in facts.blocks]


@lru_cache(maxsize=1 << 17)
def _exact_coefficient_key(nv: int, edges: tuple) -> tuple[Fraction, int] | None:
    a = EdgePattern(tuple(range(nv)), edges)
    facts = pattern_facts(a)
    coef, expo = Fraction(1), 0
    for blk in split_blocks(a, facts):
        part = _block_coefficient(blk, pattern_facts(blk))
        if part is None:
            return None
        if part[0] == 0:
            return Fraction(0), 0
        coef *= part[0]
        expo += part[1]
    return coef, expo


def exact_coefficient(a: EdgePattern) -> tuple[Fraction, int] | None:
    """``(c, e)`` with ``chi(A) = c * lam^e`` exactly, or None if unavailable.

    ``e`` equals ``|V(A)| - numc(A)`` whenever ``c != 0``.
    """
    return _exact_coefficient_key(*a.edge_key())


# ---------------------------------------------------------------------------
# Monte Carlo oracles
# ---------------------------------------------------------------------------

def tree_conditioned_mc(
    a: EdgePattern, lam: float, samples: int = DEFAULT_MC_SAMPLES, rng=None, chunk: int = 1 << 16
) -> ChiResult:
    """Estimate chi of a connected pattern by conditioning on a spanning tree.

    Given the tree edges, each non-root vertex sits at its parent plus
    ``1 + lam * u`` with ``u ~ Unif[-1, 1]``; a non-tree edge between opposite
    depth parities holds iff the offset sums differ by at most 1.
    """
    facts = pattern_facts(a)
    if facts.numc != 1:
        raise ValidationError("tree_conditioned_mc needs a connected pattern")
    if samples < 1:
        raise ValidationError("samples must be positive")
    nv = a.n_vertices
    order, parent, depth = _bfs(nv, a.adjacency)
    tree = {frozenset((v, parent[v])) for v in order[1:]}
    extra = [(x, y) for x, y in a.index_edges if frozenset((x, y)) not in tree]
    scale = lam ** (nv - 1)
    if any((depth[x] - depth[y]) % 2 == 0 for x, y in extra):
        return ChiResult(0.0, "monte-carlo", 0.0)
    if not extra:
        return ChiResult(scale, "monte-carlo", 0.0)
    gen = as_generator(rng)
    hits = 0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        u = gen.uniform(-1.0, 1.0, size=(m, nv - 1))
        s = np.zeros((m, nv))
        for idx, v in enumerate(order[1:]):
            s[:, v] = s[:, parent[v]] + u[:, idx]
        ok = np.ones(m, dtype=bool)
        for x, y in extra:
            ok &= np.abs(s[:, x] - s[:, y]) <= 1.0
        hits += int(ok.sum())
        done += m
    phat = hits / samples
    return ChiResult(scale * phat, "monte-carlo", scale * math.sqrt(phat * (1 - phat) / samples))


def direct_mc_all_edges(
    h: EdgePattern, lam: float, samples: int, rng=None, chunk: int = 1 << 18
) -> tuple[float, int]:
    """Sample independent uniform points on the circle for every vertex of ``h``
    and count how often all edges satisfy ``|x - y|_C >= 1 - lam``.

    Returns ``(estimate, hits)``.
    """
    gen = as_generator(rng)
    nv = h.n_vertices
    hits = 0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        x = gen.random((m, nv)) * 2.0
        ok = np.ones(m, dtype=bool)
        for a, b in h.index_edges:
            diff = np.abs(x[:, a] - x[:, b])
            ok &= np.minimum(diff, 2.0 - diff) >= 1.0 - lam
        hits += int(ok.sum())
        done += m
    return hits / samples, hits


# ---------------------------------------------------------------------------
# chi / psi / err
# ---------------------------------------------------------------------------

def _assert_bounds(a: EdgePattern, facts: PatternFacts, lam: float, value: float) -> None:
    nv = a.n_vertices
    tol = 1e-12 * max(abs(value), 1e-300)
    if facts.numc == 1 and value > lam ** (nv - 1) + tol:
        raise InternalConsistencyError(f"chi={value} exceeds lam^(|V|-1) for {a}")
    psi_v = value - lam**a.n_edges
    bound = 2.0 * lam ** max(nv / 2 + 1, nv - facts.numc)
    if abs(psi_v) > bound * (1 + 1e-12):
        raise InternalConsistencyError(f"|psi|={abs(psi_v)} exceeds {bound} for {a}")


def chi(
    a: EdgePattern,
    lam: float,
    *,
    method: str = "auto",
    guard: str = "exact",
    samples: int = DEFAULT_MC_SAMPLES,
    rng=None,
) -> ChiResult:
    """Probability that all edges of ``a`` appear in the 1-D complement model.

    Parameters
    ----------
    a : EdgePattern
    lam : float
        Complement rate in (0, 1).
    method : {"auto", "exact", "mc"}
        ``auto`` uses closed forms and alcove counts, falling back to the
        tree-conditioned estimator for blocks beyond the alcove size limit.
        ``mc`` forces the estimator for every block with a cycle.
    guard : {"exact", "claim"}
        Validity condition checked before evaluating, see module docstring.
    """
    facts = pattern_facts(a)
    check_guard(a, lam, guard, facts)
    if method not in ("auto", "exact", "mc"):
        raise ValidationError(f"unknown chi method {method!r}")
    if method != "mc":
        coef = exact_coefficient(a)
        if coef is not None:
            value = float(coef[0]) * lam ** coef[1] if coef[0] else 0.0
            _assert_bounds(a, facts, lam, value)
            return ChiResult(value, "closed-form", 0.0)
        if method == "exact":
            raise ValidationError(f"no exact route for {a} (block too large)")
    gen = as_generator(rng)
    value, var, tag = 1.0, 0.0, "closed-form"
    for blk in split_blocks(a, facts):
        bf = pattern_facts(blk)
        if blk.n_edges == 1:
            part = ChiResult(lam, "closed-form")
        elif not bf.bipartite and method != "mc":
            part = ChiResult(0.0, "closed-form")
        else:
            part = tree_conditioned_mc(blk, lam, samples, gen)
            tag = "monte-carlo"
        if part.value == 0.0:
            return ChiResult(0.0, tag, 0.0)
        # first-order delta method for a product of independent estimates
        var = var * part.value**2 + (value * part.se) ** 2
        value *= part.value
    return ChiResult(value, tag, math.sqrt(var))


def psi(a: EdgePattern, lam: float, **kw) -> float:
    """``chi(a) - lam^{|E(a)|}``."""
    return chi(a, lam, **kw).value - lam**a.n_edges


def _subset_masks(k: int):
    return range(1 << k)


def build_polymer_table(h: EdgePattern, lam: float, **kw) -> PolymerTable:
    if h.n_edges > MAX_ERR_EDGES:
        raise ValidationError(f"pattern has {h.n_edges} edges; limit is {MAX_ERR_EDGES}")
    check_guard(h, lam, kw.get("guard", "exact"))
    entries = {0: PolymerEntry(0, 1.0, 0.0, "closed-form", 0.0)}
    for mask in range(1, 1 << h.n_edges):
        sub = h.sub(mask)
        r = chi(sub, lam, **kw)
        entries[mask] = PolymerEntry(mask, r.value, r.value - lam**sub.n_edges, r.method, r.se)
    return PolymerTable(h, lam, entries)


def err(h: EdgePattern, lam: float, **kw) -> float:
    """Signed sum of psi over all edge subsets; forests contribute nothing."""
    if h.n_edges > MAX_ERR_EDGES:
        raise ValidationError(f"pattern has {h.n_edges} edges; limit is {MAX_ERR_EDGES}")
    check_guard(h, lam, kw.get("guard", "exact"))
    terms = []
    for mask in range(1, 1 << h.n_edges):
        sub = h.sub(mask)
        if pattern_facts(sub).is_forest:
            continue
        sign = -1.0 if bin(mask).count("1") % 2 else 1.0
        terms.append(sign * psi(sub, lam, **kw))
    return math.fsum(terms)


def expected_weight_1d(h: EdgePattern, lam: float, **kw) -> float:
    """E[W_H] in the 1-D torus graph of density ``1 - lam``.

    Computed twice, by inclusion-exclusion over chi and as
    ``(1 - lam)^{|E|} + Err``; the two must agree to 1e-12 relative.
    """
    if h.n_edges > MAX_ERR_EDGES:
        raise ValidationError(f"pattern has {h.n_edges} edges; limit is {MAX_ERR_EDGES}")
    check_guard(h, lam, kw.get("guard", "exact"))
    pie_terms = [1.0]
    for mask in range(1, 1 << h.n_edges):
        sign = -1.0 if bin(mask).count("1") % 2 else 1.0
        pie_terms.append(sign * chi(h.sub(mask), lam, **kw).value)
    pie = math.fsum(pie_terms)
    alt = math.fsum([(1.0 - lam) ** h.n_edges, err(h, lam, **kw)])
    scale = max(abs(pie), abs(alt), 1e-300)
    if abs(pie - alt) > PIE_RTOL * scale:
        raise InternalConsistencyError(f"inclusion-exclusion mismatch: {pie!r} vs {alt!r}")
    return pie


def alternating_subset_sum(k: int) -> int:
    """sum over subsets A of a k-set of (-1)^{k - |A|}; zero for k >= 1."""
    return sum((-1) ** (k - j) * math.comb(k, j) for j in range(k + 1))


# ---------------------------------------------------------------------------
# exact polynomial forms
# ---------------------------------------------------------------------------

def subset_weight_numerators(h: EdgePattern) -> tuple[int, np.ndarray]:
    """Exact 1-D weights of every edge subset as polynomials in lam.

    Returns ``(den, num)`` with ``num`` an object array of Python ints of
    shape ``(2^k, |V|+1)`` such that for each subset ``B``
    ``E[W_B] (1-D) = sum_j num[B, j] lam^j / den``.
    """
    k, nv = h.n_edges, h.n_vertices
    if k > MAX_ERR_EDGES:
        raise ValidationError(f"pattern has {k} edges; limit is {MAX_ERR_EDGES}")
    den = 2 ** max(nv - 1, 0) * math.factorial(max(nv - 1, 0))
    num = np.zeros((1 << k, nv + 1), dtype=object)
    num[:, :] = 0
    num[0, 0] = den
    for mask in range(1, 1 << k):
        coef = exact_coefficient(h.sub(mask))
        if coef is None:
            raise ValidationError(f"no exact chi for a sub-pattern of {h}")
        c, e = coef
        if c == 0:
            continue
        scaled = c * den
        if scaled.denominator != 1:  # pragma: no cover - guaranteed by construction
            raise InternalConsistencyError("common denominator does not clear chi")
        sign = -1 if bin(mask).count("1") % 2 else 1
        num[mask, e] = sign * scaled.numerator
    # zeta transform: F[B] = sum over A within B of f[A]
    for bit in range(k):
        step = 1 << bit
        idx = np.array([m for m in range(1 << k) if m & step], dtype=np.int64)
        if idx.size:
            num[idx] = num[idx] + num[idx ^ step]
    return den, num


def weight_polynomial_1d(h: EdgePattern) -> list[Fraction]:
    """Coefficients ``c_j`` with ``E[W_H] (1-D) = sum_j c_j lam^j``."""
    den, num = subset_weight_numerators(h)
    return [Fraction(int(v), den) for v in num[(1 << h.n_edges) - 1]]
