import json
import math
import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from torusrgg.bounds import (
    conv_moment_bracket,
    gamma_moment_mc,
    hypercube_influences,
    hypercube_tv_bound,
    kl_bound,
    low_degree_advantage_small,
    moment_table,
    overlap_f,
    sigma_conv_moment_linfty,
    small_ball_bound,
    small_ball_check,
)
from torusrgg.errors import UnsupportedGeometryError, ValidationError
from torusrgg.expansion import params_for, signed_weight
from torusrgg.geometry import derive_tau_lambda
from torusrgg.hypercube import SigmaSpec
from torusrgg.patterns import cycle
from torusrgg.rng import RngSpec


def test_overlap_function_against_grid():
    lam = 0.15
    z = np.linspace(0, 2, 400_001)[:-1]
    inside = lambda u: np.minimum(np.abs(u) % 2, 2 - np.abs(u) % 2) <= 1 - lam
    for x in (0.0, 0.1, 0.3, 0.7, 1.0, 1.8):
        emp = np.mean(inside(z) & inside(x - z))  # uniform probability on the circle
        assert overlap_f(x, lam) == pytest.approx(emp, abs=1e-4)
    with pytest.raises(ValidationError):
        overlap_f(0.1, 0.6)


@pytest.mark.parametrize("t", [1, 2, 3, 4])
def test_bracket_matches_quadrature(t):
    lam = 0.08
    val = quad(lambda u: overlap_f(u, lam) ** t, 0, 1, points=[2 * lam], epsabs=1e-14)[0]
    assert conv_moment_bracket(t, lam) == pytest.approx(val, abs=1e-12)


def test_moment_roundtrip_and_first_moment():
    for d, p in ((7, 0.5), (1000, 0.3), (10**5, 0.8)):
        prm = params_for(5, d, p)
        assert sigma_conv_moment_linfty(1, prm) == pytest.approx(p * p, abs=1e-12)
        for t in (2, 3):
            assert sigma_conv_moment_linfty(t, prm) ** (1 / d) == pytest.approx(conv_moment_bracket(t, prm.lam), rel=1e-12)
    tab = moment_table(params_for(5, 100, 0.5))
    assert tab[1] == pytest.approx(0.25) and tab.method == "closed-form"


def test_moment_ratio_scales_like_d_lam3_t2():
    p = 0.5
    ratios = []
    for d in (100, 1000, 10000):
        prm = params_for(5, d, p)
        for t in (2, 3, 4, 6):
            excess = sigma_conv_moment_linfty(t, prm) / p ** (2 * t) - 1
            ratios.append(excess / (d * prm.lam**3 * t * t))
    assert max(ratios) / min(ratios) <= 3.0


def test_moment_warning_and_validation():
    prm = params_for(5, 2, 0.5)
    with pytest.warns(UserWarning):
        sigma_conv_moment_linfty(3, prm)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        sigma_conv_moment_linfty(3, prm, warn=False)
    with pytest.raises(UnsupportedGeometryError):
        sigma_conv_moment_linfty(2, derive_tau_lambda(5, 3, 2, 0.5))


def test_kl_trivial_cases_and_monotonicity():
    prm = params_for(50, 10**5, 0.5)
    assert kl_bound(1, prm).kl == 0.0
    assert kl_bound(2, prm).kl == pytest.approx(0.0, abs=1e-30)
    ns = [kl_bound(n, prm).kl for n in (5, 10, 20, 40)]
    assert all(a <= b for a, b in zip(ns, ns[1:]))
    rep = kl_bound(30, params_for(30, 10**5, 0.7))
    assert rep.kl >= 0 and rep.tv_bound == pytest.approx(math.sqrt(rep.kl / 2))
    assert json.dumps(rep.to_dict())
    with pytest.raises(ValidationError):
        kl_bound(5000, prm)


def test_gamma_first_moment_and_t2_identity():
    prm = params_for(5, 6, 0.5)
    g1 = gamma_moment_mc(prm, 1, 3000, 400, RngSpec(71, 0))
    assert abs(g1.estimate) <= 4 * g1.std_error
    g2 = gamma_moment_mc(prm, 2, 3000, 400, RngSpec(71, 1))
    want = sigma_conv_moment_linfty(2, prm) - prm.p**4
    assert abs(g2.estimate - want) <= 4 * g2.std_error
    assert want == pytest.approx(signed_weight(cycle(4), prm).value, rel=1e-9)


def test_gamma_identity_general_p():
    prm = params_for(5, 6, 0.3)
    g2 = gamma_moment_mc(prm, 2, 3000, 400, RngSpec(72, 0))
    assert abs(g2.estimate - signed_weight(cycle(4), prm).value) <= 4 * g2.std_error


def test_gamma_validation():
    prm = params_for(5, 6, 0.5)
    with pytest.raises(ValidationError):
        gamma_moment_mc(prm, 5, 10, 10)
    with pytest.raises(ValidationError):
        gamma_moment_mc(prm, 2, 10, 1)


def test_small_ball_examples():
    rep = small_ball_check(10, 2.0, 0.0, 9.0, 20000, RngSpec(73, 0))
    assert rep.probability == 1.0 and rep.trivially_satisfied and rep.lemma_holds
    null = small_ball_check(10, 2.0, 1.3, 1.3, 20000, RngSpec(73, 1))
    assert null.probability == 0.0 and null.lemma_bound == 0.0
    assert small_ball_bound(11, 2.0, 0.25, 0.36) == pytest.approx(0.36**5 - 0.25**5)
    with pytest.raises(ValidationError):
        small_ball_check(10, 2.0, 0.5, 0.1)


def test_influences():
    const = hypercube_influences(SigmaSpec("constant", value=0.3), 6)
    assert np.all(const.influences == 0.0)
    dic = hypercube_influences(SigmaSpec("dictator", coord=2), 5)
    assert dic.influences.tolist() == [0, 0, 0.25, 0, 0]
    thr = hypercube_influences(SigmaSpec("threshold", tau=1), 5)
    assert np.all(thr.influences == 3 / 32) and thr.total == pytest.approx(15 / 32)
    with pytest.raises(ValidationError):
        hypercube_influences(SigmaSpec("dictator"), 25)


def test_tv_bound_examples():
    assert hypercube_tv_bound(10, SigmaSpec("constant", value=0.5), 4).ratio == 0.0
    assert hypercube_tv_bound(10, SigmaSpec("dictator"), 6).ratio == pytest.approx(1000.0)
    thr = hypercube_tv_bound(10, SigmaSpec("threshold", tau=1), 15)
    assert 0 < thr.threshold_constant < math.inf
    lip = hypercube_tv_bound(10, SigmaSpec("dictator"), 6, lipschitz_r=2.0)
    assert lip.lipschitz_bound == pytest.approx(1 / 24)


def test_advantage_examples():
    prm = params_for(40, 30, 0.5)
    assert low_degree_advantage_small(40, prm, 2, 4).value == 0.0
    c3 = low_degree_advantage_small(40, prm, 3, 3)
    want = math.comb(40, 3) * signed_weight(cycle(3), prm).value ** 2 / 0.25**3
    assert c3.classes == 1 and c3.value == pytest.approx(want, rel=1e-9)
    vals = [low_degree_advantage_small(40, params_for(40, d, 0.5), 6, 5).value for d in (20, 40, 80, 160)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValidationError):
        low_degree_advantage_small(40, prm, 11, 4)
    with pytest.raises(ValidationError):
        low_degree_advantage_small(40, prm, 4, 9)
