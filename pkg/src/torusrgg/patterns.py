"""Small edge-defined patterns H and their structural facts.

Everything here works on graphs with at most a few dozen edges, so plain
Python over neighbour sets is fast enough; networkx is used only for
isomorphism tests and automorphism counting.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path

import networkx as nx

from .errors import ValidationError

MAX_FACT_EDGES = 24
DEFAULT_CYCLE_CAP = 8


@dataclass(frozen=True)
class EdgePattern:
    """A pattern given by its edge set; vertices are the edge endpoints.

    Labels can be any hashable, orderable values. ``edges`` holds pairs in the
    order supplied with each pair's endpoints in vertex order.
    """

    vertices: tuple
    edges: tuple

    def __post_init__(self):
        vset = set(self.vertices)
        if len(vset) != len(self.vertices):
            raise ValidationError("duplicate vertex labels")
        seen = set()
        touched = set()
        for e in self.edges:
            if len(e) != 2:
                raise ValidationError(f"edge {e!r} is not a pair")
            a, b = e
            if a == b:
                raise ValidationError(f"self-loop at {a!r}")
            if a not in vset or b not in vset:
                raise ValidationError(f"edge {e!r} uses an unknown vertex")
            key = frozenset(e)
            if key in seen:
                raise ValidationError(f"duplicate edge {e!r}")
            seen.add(key)
            touched.update(e)
        if touched != vset:
            raise ValidationError("every vertex must be an endpoint of some edge")

    @classmethod
    def from_edges(cls, edges) -> "EdgePattern":
        edges = [tuple(e) for e in edges]
        verts = []
        seen = set()
        for a, b in edges:
            for v in (a, b):
                if v not in seen:
                    seen.add(v)
                    verts.append(v)
        pos = {v: i for i, v in enumerate(verts)}
        norm = tuple((a, b) if pos[a] < pos[b] else (b, a) for a, b in edges)
        return cls(tuple(verts), norm)

    # index views ---------------------------------------------------------
    @cached_property
    def index_edges(self) -> tuple:
        pos = {v: i for i, v in enumerate(self.vertices)}
        return tuple((pos[a], pos[b]) for a, b in self.edges)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def adjacency(self) -> tuple:
        nb = [set() for _ in self.vertices]
        for a, b in self.index_edges:
            nb[a].add(b)
            nb[b].add(a)
        return tuple(frozenset(s) for s in nb)

    def degrees(self) -> tuple:
        return tuple(len(s) for s in self.adjacency)

    def sub(self, mask: int) -> "EdgePattern":
        """Sub-pattern made of the edges selected by bitmask ``mask``."""
        return EdgePattern.from_edges(
            [e for i, e in enumerate(self.edges) if (mask >> i) & 1]
        )

    def relabeled(self) -> "EdgePattern":
        """Same pattern on labels ``0..v-1`` in vertex order."""
        return EdgePattern(tuple(range(self.n_vertices)), self.index_edges)

    def edge_key(self) -> tuple:
        """Label-free key: sorted index edges after relabelling."""
        return (self.n_vertices, tuple(sorted(self.index_edges)))

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n_vertices))
        g.add_edges_from(self.index_edges)
        return g

    def to_text(self) -> str:
        return "\n".join(f"{a} {b}" for a, b in self.edges) + "\n"

    def __str__(self) -> str:
        return ",".join(f"{a}-{b}" for a, b in self.edges)


@dataclass(frozen=True)
class PatternFacts:
    """Exact structural facts of a pattern."""

    n_vertices: int
    n_edges: int
    numc: int
    bipartite: bool
    girth: int | None
    cycle_counts: dict
    blocks: tuple  # tuple of tuples of edge indices
    spanning_forest_edges: int
    has_leaf: bool

    @property
    def is_forest(self) -> bool:
        return self.girth is None

    def block_vertex_counts(self, pattern: EdgePattern) -> tuple:
        ie = pattern.index_edges
        return tuple(len({v for i in blk for v in ie[i]}) for blk in self.blocks)


def _components(nv: int, adj) -> list[list[int]]:
    seen = [False] * nv
    comps = []
    for s in range(nv):
        if seen[s]:
            continue
        stack = [s]
        seen[s] = True
        comp = []
        while stack:
            v = stack.pop()
            comp.append(v)
            for u in adj[v]:
                if not seen[u]:
                    seen[u] = True
                    stack.append(u)
        comps.append(comp)
    return comps


def _is_bipartite(nv: int, adj) -> bool:
    color = [-1] * nv
    for s in range(nv):
        if color[s] >= 0:
            continue
        color[s] = 0
        stack = [s]
        while stack:
            v = stack.pop()
            for u in adj[v]:
                if color[u] < 0:
                    color[u] = 1 - color[v]
                    stack.append(u)
                elif color[u] == color[v]:
                    return False
    return True


def _girth(nv: int, adj) -> int | None:
    best = None
    for root in range(nv):
        dist = [-1] * nv
        parent = [-1] * nv
        dist[root] = 0
        frontier = [root]
        while frontier:
            nxt = []
            for v in frontier:
                for u in adj[v]:
                    if dist[u] < 0:
                        dist[u] = dist[v] + 1
                        parent[u] = v
                        nxt.append(u)
                    elif parent[v] != u:
                        length = dist[u] + dist[v] + 1
                        if best is None or length < best:
                            best = length
            frontier = nxt
    return best


def _cycle_counts(nv: int, adj, cap: int) -> dict:
    """N(u) = number of simple cycles of length u, for 3 <= u <= cap."""
    counts = dict.fromkeys(range(3, cap + 1), 0)

    def extend(start, v, visited, length):
        for u in adj[v]:
            if u == start and length >= 3:
                counts[length] += 1
            elif u > start and not (visited >> u) & 1 and length < cap:
                extend(start, u, visited | (1 << u), length + 1)

    for s in range(nv):
        extend(s, s, 1 << s, 1)
    return {k: v // 2 for k, v in counts.items()}


def _blocks(nv: int, edges) -> list[tuple]:
    """Biconnected components as tuples of edge indices (Tarjan)."""
    inc = [[] for _ in range(nv)]
    for idx, (a, b) in enumerate(edges):
        inc[a].append((b, idx))
        inc[b].append((a, idx))
    disc = [-1] * nv
    low = [0] * nv
    timer = [0]
    stack: list[int] = []
    out: list[tuple] = []

    def dfs(v, parent_edge):
        disc[v] = low[v] = timer[0]
        timer[0] += 1
        for u, idx in inc[v]:
            if idx == parent_edge:
                continue
            if disc[u] < 0:
                stack.append(idx)
                dfs(u, idx)
                low[v] = min(low[v], low[u])
                if low[u] >= disc[v]:
                    blk = []
                    while True:
                        e = stack.pop()
                        blk.append(e)
                        if e == idx:
                            break
                    out.append(tuple(sorted(blk)))
            elif disc[u] < disc[v]:
                stack.append(idx)
                low[v] = min(low[v], disc[u])

    for s in range(nv):
        if disc[s] < 0:
            dfs(s, -1)
    return out


@lru_cache(maxsize=65536)
def _facts_cached(nv: int, edges: tuple, cap: int) -> PatternFacts:
    adj = [set() for _ in range(nv)]
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    comps = _components(nv, adj)
    girth = _girth(nv, adj)
    return PatternFacts(
        n_vertices=nv,
        n_edges=len(edges),
        numc=len(comps),
        bipartite=_is_bipartite(nv, adj),
        girth=girth,
        cycle_counts=_cycle_counts(nv, adj, cap) if girth is not None else dict.fromkeys(range(3, cap + 1), 0),
        blocks=tuple(_blocks(nv, list(edges))),
        spanning_forest_edges=nv - len(comps),
        has_leaf=any(len(s) == 1 for s in adj),
    )


def pattern_facts(h: EdgePattern, cycle_cap: int = DEFAULT_CYCLE_CAP) -> PatternFacts:
    """Components, bipartiteness, girth, cycle counts and block structure.

    Raises
    ------
    ValidationError
        If the pattern has more than 24 edges.
    """
    if h.n_edges > MAX_FACT_EDGES:
        raise ValidationError(f"pattern has {h.n_edges} edges; limit is {MAX_FACT_EDGES}")
    return _facts_cached(h.n_vertices, h.index_edges, cycle_cap)


# ---------------------------------------------------------------------------
# graph inequalities used as property checks
# ---------------------------------------------------------------------------

def _rank(h: EdgePattern) -> int:
    return pattern_facts(h).spanning_forest_edges


def check_subadditivity(g1: EdgePattern, g2: EdgePattern) -> bool:
    """|V(G)| - numc(G) <= sum of the same quantity over G1 and G2, G = G1 u G2."""
    union = EdgePattern.from_edges(
        list(g1.edges) + [e for e in g2.edges if frozenset(e) not in {frozenset(x) for x in g1.edges}]
    )
    return _rank(union) <= _rank(g1) + _rank(g2)


def is_two_connected(h: EdgePattern) -> bool:
    f = pattern_facts(h)
    return f.numc == 1 and len(f.blocks) == 1 and h.n_vertices >= 3


def check_two_connected_inequality(h: EdgePattern, k: EdgePattern) -> bool:
    """|E(H)| - |E(K)| >= numc(K) + |V(H)| - |V(K)| - 1 for K within 2-connected H."""
    if not is_two_connected(h):
        raise ValidationError("H must be 2-connected")
    hset = {frozenset(e) for e in h.edges}
    if not all(frozenset(e) in hset for e in k.edges):
        raise ValidationError("K must be a sub-pattern of H")
    fk = pattern_facts(k)
    return h.n_edges - k.n_edges >= fk.numc + h.n_vertices - k.n_vertices - 1


# ---------------------------------------------------------------------------
# built-ins and parsing
# ---------------------------------------------------------------------------

def cycle(m: int) -> EdgePattern:
    if m < 3:
        raise ValidationError("cycles need m >= 3")
    return EdgePattern.from_edges([(i, (i + 1) % m) for i in range(m)])


def path(k: int) -> EdgePattern:
    if k < 1:
        raise ValidationError("paths need at least one edge")
    return EdgePattern.from_edges([(i, i + 1) for i in range(k)])


def star(k: int) -> EdgePattern:
    return EdgePattern.from_edges([(0, i) for i in range(1, k + 1)])


def complete(k: int) -> EdgePattern:
    if k < 2:
        raise ValidationError("complete graphs need k >= 2")
    return EdgePattern.from_edges(list(itertools.combinations(range(k), 2)))


def complete_bipartite(a: int, b: int) -> EdgePattern:
    return EdgePattern.from_edges([(i, a + j) for i in range(a) for j in range(b)])


def bowtie() -> EdgePattern:
    return EdgePattern.from_edges([(0, 1), (1, 2), (2, 0), (0, 3), (3, 4), (4, 0)])


def theta() -> EdgePattern:
    """Two vertices joined by paths of lengths 1, 3 and 3 (bipartite, 2-connected)."""
    return EdgePattern.from_edges([(0, 1), (0, 2), (2, 3), (3, 1), (0, 4), (4, 5), (5, 1)])


def diamond() -> EdgePattern:
    return EdgePattern.from_edges([(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)])


def matching(k: int) -> EdgePattern:
    return EdgePattern.from_edges([(2 * i, 2 * i + 1) for i in range(k)])


BUILTIN_NAMES = ("C3", "C4", "C5", "C6", "K4", "K23", "bowtie", "theta")


def builtin(name: str) -> EdgePattern:
    """Named patterns: Cm, Pk (k edges), Sk (star), Kk, Kab, bowtie, theta, diamond."""
    s = name.strip()
    low = s.lower()
    if low == "bowtie":
        return bowtie()
    if low == "theta":
        return theta()
    if low == "diamond":
        return diamond()
    m = re.fullmatch(r"[cC](\d+)", s)
    if m:
        return cycle(int(m.group(1)))
    m = re.fullmatch(r"[pP](\d+)", s)
    if m:
        return path(int(m.group(1)))
    m = re.fullmatch(r"[sS](\d+)", s)
    if m:
        return star(int(m.group(1)))
    m = re.fullmatch(r"[mM](\d+)", s)
    if m:
        return matching(int(m.group(1)))
    m = re.fullmatch(r"[kK](\d)(\d)", s)
    if m:
        return complete_bipartite(int(m.group(1)), int(m.group(2)))
    m = re.fullmatch(r"[kK](\d+)", s)
    if m:
        return complete(int(m.group(1)))
    raise ValidationError(f"unknown built-in pattern {name!r}")


def parse_edge_text(text: str) -> EdgePattern:
    """Parse ``"u v"`` lines or ``"u-v,u-v"`` inline lists; labels become ints when possible."""
    def label(tok: str):
        return int(tok) if re.fullmatch(r"-?\d+", tok) else tok

    edges = []
    chunks = re.split(r"[\n,;]+", text)
    for chunk in chunks:
        line = chunk.split("#", 1)[0].strip()
        if not line:
            continue
        parts = re.split(r"[\s\-]+", line)
        if len(parts) != 2:
            raise ValidationError(f"cannot parse edge {chunk!r}")
        edges.append((label(parts[0]), label(parts[1])))
    if not edges:
        raise ValidationError("pattern has no edges")
    return EdgePattern.from_edges(edges)


def parse_pattern(spec: str) -> EdgePattern:
    """A built-in name, a path to an edge-list file, or inline edge text."""
    try:
        return builtin(spec)
    except ValidationError:
        pass
    p = Path(spec)
    if p.is_file():
        return parse_edge_text(p.read_text())
    return parse_edge_text(spec)


# ---------------------------------------------------------------------------
# isomorphism utilities
# ---------------------------------------------------------------------------

def automorphism_count(h: EdgePattern) -> int:
    g = h.to_networkx()
    gm = nx.algorithms.isomorphism.GraphMatcher(g, g)
    return sum(1 for _ in gm.isomorphisms_iter())


def placements_in_kn(h: EdgePattern, n: int) -> int:
    """Number of subgraphs of K_n isomorphic to h."""
    v = h.n_vertices
    if v > n:
        return 0
    return math.perm(n, v) // automorphism_count(h)


def isomorphic(a: EdgePattern, b: EdgePattern) -> bool:
    if (a.n_vertices, a.n_edges) != (b.n_vertices, b.n_edges):
        return False
    if sorted(a.degrees()) != sorted(b.degrees()):
        return False
    return nx.is_isomorphic(a.to_networkx(), b.to_networkx())


def enumerate_min_degree2(vmax: int, max_edges: int) -> list[EdgePattern]:
    """Isomorphism classes of graphs with all degrees >= 2, <= vmax vertices
    and <= max_edges edges (no isolated vertices).

    Classes are grown edge by edge on a fixed vertex set and deduplicated
    with Weisfeiler-Lehman hash buckets plus exact isomorphism checks.
    """
    found: list[EdgePattern] = []
    for v in range(3, vmax + 1):
        all_pairs = list(itertools.combinations(range(v), 2))
        layer = [nx.empty_graph(v)]
        for e in range(1, max_edges + 1):
            buckets: dict = {}
            nxt = []
            for g in layer:
                for a, b in all_pairs:
                    if g.has_edge(a, b):
                        continue
                    h = g.copy()
                    h.add_edge(a, b)
                    deficit = sum(max(0, 2 - d) for _, d in h.degree())
                    if deficit > 2 * (max_edges - e):
                        continue
                    key = nx.weisfeiler_lehman_graph_hash(h, iterations=3)
                    bucket = buckets.setdefault(key, [])
                    if any(nx.is_isomorphic(h, other) for other in bucket):
                        continue
                    bucket.append(h)
                    nxt.append(h)
            layer = nxt
            for g in layer:
                if min(d for _, d in g.degree()) >= 2:
                    found.append(EdgePattern.from_edges(sorted(g.edges())))
    return found
