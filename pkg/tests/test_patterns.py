import itertools
import math

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torusrgg.errors import ValidationError
from torusrgg.patterns import (
    BUILTIN_NAMES,
    EdgePattern,
    automorphism_count,
    builtin,
    check_subadditivity,
    check_two_connected_inequality,
    complete,
    complete_bipartite,
    cycle,
    enumerate_min_degree2,
    is_two_connected,
    isomorphic,
    parse_pattern,
    path,
    pattern_facts,
    placements_in_kn,
    star,
)


@st.composite
def patterns(draw, max_v=7):
    nv = draw(st.integers(2, max_v))
    pairs = list(itertools.combinations(range(nv), 2))
    chosen = draw(st.lists(st.sampled_from(pairs), min_size=1, max_size=min(len(pairs), 12), unique=True))
    return EdgePattern.from_edges(chosen)


@given(patterns())
@settings(max_examples=150, deadline=None)
def test_facts_match_networkx(h):
    g = h.to_networkx()
    f = pattern_facts(h, cycle_cap=8)
    assert f.numc == nx.number_connected_components(g)
    assert f.bipartite == nx.is_bipartite(g)
    girth = nx.girth(g)
    assert f.girth == (None if math.isinf(girth) else girth)
    ie = h.index_edges
    ours = sorted(sorted(frozenset(ie[i]) for i in blk) for blk in f.blocks)
    ref = sorted(sorted(frozenset(e) for e in comp) for comp in nx.biconnected_component_edges(g))
    assert [sorted(map(sorted, b)) for b in ours] == [sorted(map(sorted, b)) for b in ref]
    lengths = [len(c) for c in nx.simple_cycles(g, length_bound=8)]
    for u in range(3, 9):
        assert f.cycle_counts[u] == lengths.count(u)
    assert f.has_leaf == any(d == 1 for _, d in g.degree())


def _brute_automorphisms(h):
    nv = h.n_vertices
    es = {frozenset(e) for e in h.index_edges}
    return sum(
        all(frozenset((perm[a], perm[b])) in es for a, b in h.index_edges)
        for perm in itertools.permutations(range(nv))
    )


@given(patterns(max_v=6))
@settings(max_examples=80, deadline=None)
def test_automorphisms_brute_force(h):
    assert automorphism_count(h) == _brute_automorphisms(h)


def test_placements_known_values():
    assert placements_in_kn(cycle(3), 10) == math.comb(10, 3)
    assert placements_in_kn(cycle(4), 10) == 3 * math.comb(10, 4)
    assert placements_in_kn(cycle(5), 9) == 12 * math.comb(9, 5)
    assert placements_in_kn(complete(4), 7) == math.comb(7, 4)
    assert placements_in_kn(path(1), 6) == 15
    assert placements_in_kn(cycle(5), 4) == 0


def test_builtins():
    for name in BUILTIN_NAMES:
        h = builtin(name)
        assert h.n_edges > 0
    assert isomorphic(builtin("K23"), complete_bipartite(2, 3))
    assert builtin("bowtie").n_vertices == 5
    assert is_two_connected(builtin("theta")) and pattern_facts(builtin("theta")).bipartite
    assert builtin("P3") == path(3) and builtin("S4") == star(4)
    with pytest.raises(ValidationError):
        builtin("Q7")


def test_parse_pattern(tmp_path):
    assert isomorphic(parse_pattern("a-b, b-c, c-a"), cycle(3))
    f = tmp_path / "h.txt"
    f.write_text("# a square\n0 1\n1 2\n2 3\n3 0\n")
    assert isomorphic(parse_pattern(str(f)), cycle(4))
    for bad in ("0-1-2", "", "1-1"):
        with pytest.raises(ValidationError):
            parse_pattern(bad)


def test_pattern_validation():
    with pytest.raises(ValidationError):
        EdgePattern((0, 1, 2), ((0, 1),))
    with pytest.raises(ValidationError):
        EdgePattern.from_edges([(0, 1), (1, 0)])


@given(patterns(), patterns())
@settings(max_examples=80, deadline=None)
def test_subadditivity(g1, g2):
    assert check_subadditivity(g1, g2)


@pytest.mark.parametrize("name", ["C5", "K4", "K23", "theta", "diamond"])
def test_two_connected_inequality_all_subpatterns(name):
    h = builtin(name)
    for mask in range(1, 1 << h.n_edges):
        assert check_two_connected_inequality(h, h.sub(mask))
    with pytest.raises(ValidationError):
        check_two_connected_inequality(path(3), path(1))


def test_enumeration_matches_atlas():
    ours = enumerate_min_degree2(6, 8)
    ref = [
        g for g in nx.graph_atlas_g()
        if 3 <= g.number_of_nodes() <= 6 and g.number_of_edges() <= 8
        and min(dict(g.degree()).values()) >= 2
    ]
    assert len(ours) == len(ref)
    for a, b in itertools.combinations(ours, 2):
        assert not isomorphic(a, b)
    assert all(min(h.degrees()) >= 2 for h in ours)
