import math

import numpy as np
import pytest

from torusrgg.errors import UnsupportedGeometryError, ValidationError
from torusrgg.expansion import (
    cycle_placements,
    er_variance,
    expected_signed_cycle_mean,
    expected_weight,
    params_for,
    signed_count_variance,
    signed_cycle_asymptotic,
    signed_weight,
    signed_weight_bound,
    signed_weight_factorized,
    signed_weight_mc,
    unsigned_graph_asymptotic,
    variance_predictor,
)
from torusrgg.geometry import connected, derive_tau_lambda
from torusrgg.graph import sample_rgg
from torusrgg.patterns import EdgePattern, builtin, cycle, path, star
from torusrgg.rng import RngSpec
from torusrgg.statistics import run_replicates, signed_4cycle_count, signed_triangle_count


def _mc_all_edges(h, params, samples, seed):
    gen = RngSpec(seed, 0).generator()
    x = gen.random((samples, h.n_vertices, params.d)) * 2
    ok = np.ones(samples, dtype=bool)
    for a, b in h.index_edges:
        ok &= connected(x[:, a] - x[:, b], params.q, params.tau)
    return ok.mean()


@pytest.mark.parametrize("name", ["C3", "C4", "K4", "bowtie"])
def test_expected_weight_against_mc(name):
    h = builtin(name)
    prm = params_for(10, 4, 0.5)
    emp = _mc_all_edges(h, prm, 400_000, 41)
    want = expected_weight(h, prm).value
    assert abs(emp - want) <= 4 * math.sqrt(want * (1 - want) / 400_000)


def test_forest_weight_is_power_of_p():
    prm = params_for(10, 25, 0.3)
    for h in (path(4), star(3)):
        assert expected_weight(h, prm).value == pytest.approx(0.3**h.n_edges, rel=1e-12)


@pytest.mark.parametrize("name", ["C3", "C4", "K23"])
def test_signed_weight_against_mc_low_dimension(name):
    h = builtin(name)
    prm = params_for(10, 4, 0.5)
    est, se = signed_weight_mc(h, prm, 400_000, RngSpec(42, 0))
    assert abs(est - signed_weight(h, prm).value) <= 4 * se


@pytest.mark.parametrize("name", ["C3", "C4", "C5", "K4", "bowtie", "diamond", "theta"])
def test_factorized_matches_direct(name):
    prm = params_for(10, 40, 0.5)
    h = builtin(name)
    assert signed_weight_factorized(h, prm) == pytest.approx(signed_weight(h, prm).value, rel=1e-9, abs=1e-300)


def test_leaf_patterns_vanish():
    prm = params_for(10, 20, 0.5)
    lollipop = EdgePattern.from_edges([(0, 1), (1, 2), (2, 0), (2, 3)])
    for h in (path(3), star(4), lollipop):
        assert abs(signed_weight(h, prm).value) < 1e-40


def test_disconnected_pattern_factorizes():
    prm = params_for(10, 20, 0.5)
    two = EdgePattern.from_edges([(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])
    assert signed_weight(two, prm).value == pytest.approx(signed_weight(cycle(3), prm).value ** 2, rel=1e-9)


@pytest.mark.parametrize("m", [3, 4, 5, 6])
def test_cycle_asymptotic_converges(m):
    errs = []
    for d in (100, 1000, 10000):
        prm = params_for(10, d, 0.5)
        exact = signed_weight(cycle(m), prm).value
        lead = signed_cycle_asymptotic(m, prm)
        assert abs(exact - lead.value) <= 10 * lead.remainder_bound
        errs.append(abs(exact / lead.value - 1))
    assert errs[2] < errs[0]


def test_odd_and_even_cycle_signs():
    prm = params_for(10, 50, 0.5)
    for m in range(3, 9):
        assert signed_weight(cycle(m), prm).value > 0


def test_unsigned_asymptotic():
    prm = params_for(10, 10**6, 0.5)
    for name in ("C3", "C4", "K4"):
        h = builtin(name)
        exact = expected_weight(h, prm).value
        approx = unsigned_graph_asymptotic(h, prm).value
        assert approx == pytest.approx(exact, rel=1e-4)
    with pytest.raises(ValidationError):
        unsigned_graph_asymptotic(builtin("K4"), params_for(10, 20, 0.5))


def test_signed_weight_bound_checks():
    prm = params_for(10, 10**6, 0.5)
    assert abs(signed_weight(cycle(4), prm).value) <= signed_weight_bound(cycle(4), prm, 1.0)
    with pytest.raises(ValidationError):
        signed_weight_bound(cycle(4), params_for(10, 2, 0.5), 1.0)


def test_cycle_mean_variants():
    n = 500
    prm = params_for(n, 5000, 0.5)
    exact = expected_signed_cycle_mean(4, n, prm)
    assert exact == pytest.approx(cycle_placements(4, n) * signed_weight(cycle(4), prm).value)
    assert expected_signed_cycle_mean(4, n, prm, variant="asymptotic") == pytest.approx(exact, rel=1e-3)
    assert expected_signed_cycle_mean(3, n, prm, variant="refined") == pytest.approx(
        expected_signed_cycle_mean(3, n, prm), rel=1e-3)
    with pytest.raises(ValidationError):
        expected_signed_cycle_mean(4, n, prm, variant="other")


def test_finite_q_rejected():
    prm = derive_tau_lambda(10, 4, 2, 0.5)
    with pytest.raises(UnsupportedGeometryError):
        signed_weight(cycle(3), prm)
    with pytest.raises(UnsupportedGeometryError):
        expected_weight(cycle(3), prm)
    est, se = signed_weight_mc(cycle(3), prm, 50_000, RngSpec(43, 0))
    assert se > 0 and math.isfinite(est)


def test_guard_blocks_small_dimension():
    with pytest.raises(ValidationError):
        signed_weight(cycle(6), params_for(10, 2, 0.5))


def test_er_variance_formula():
    prm = params_for(30, 10, 0.3)
    assert er_variance("C3", 30, 0.3) == math.comb(30, 3) * 0.21**3
    assert signed_count_variance(cycle(4), 30, prm, "ER") == pytest.approx(er_variance("C4", 30, 0.3))
    vp = variance_predictor("C4", 30, prm, "ER")
    assert vp.exact and vp.value == vp.er_term


@pytest.mark.parametrize("stat", ["C3", "C4"])
def test_rgg_variance_against_simulation(stat):
    n, d, p = 8, 5, 0.5
    prm = params_for(n, d, p)
    fn = signed_triangle_count if stat == "C3" else signed_4cycle_count
    vals = run_replicates(lambda gen, r: fn(sample_rgg(prm, gen)[0], p), 40_000, RngSpec(44, 0))
    pred = variance_predictor(stat, n, prm, "RGG").value
    # standard error of a sample variance, using the fourth moment
    m4 = np.mean((vals - vals.mean()) ** 4)
    se = math.sqrt(max(m4 - vals.var() ** 2, 0) / len(vals))
    assert abs(vals.var(ddof=1) - pred) <= 4 * se
    mean_pred = expected_signed_cycle_mean(int(stat[1]), n, prm)
    assert abs(vals.mean() - mean_pred) <= 4 * vals.std() / math.sqrt(len(vals))
