"""Quick invariant suite behind ``torusrgg selftest``.

Each check is small (reduced sample sizes, fixed seeds) so the whole suite
runs in well under a minute. Monte Carlo checks use 4 to 5 standard errors.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import kernels
from ._accel import BACKEND
from .bounds import (
    conv_moment_bracket,
    hypercube_influences,
    kl_bound,
    overlap_f,
    sigma_conv_moment_linfty,
    small_ball_check,
    gamma_moment_mc,
)
from .detection import estimate_dimension, mean_grid, detect
from .expansion import (
    expected_weight,
    params_for,
    signed_cycle_asymptotic,
    signed_weight,
    signed_weight_mc,
)
from .geometry import circ_dist, derive_tau_lambda, lq_dist, phi, phi_fraction, sum_uq_cdf
from .graph import (
    Graph,
    complement_1d_from_latents,
    rgg_from_latents,
    sample_er,
    sample_rgg,
)
from .hypercube import SigmaSpec
from .patterns import EdgePattern, builtin, complete_bipartite, cycle, path, star
from .polymer import alternating_subset_sum, chi, direct_mc_all_edges, expected_weight_1d, psi
from .rng import RngSpec
from .statistics import (
    ModelSpec,
    StatSpec,
    mc_run,
    signed_4cycle_count,
    signed_4cycle_count_dense,
    signed_triangle_count,
    signed_triangle_count_dense,
)

SEED = 20240611


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str
    seconds: float


def _gen(k: int) -> np.random.Generator:
    return RngSpec(SEED, k).generator()


# -- geometry ---------------------------------------------------------------

def check_circ_metric():
    g = _gen(1)
    a, b, c = g.random((3, 2000)) * 2
    sym = np.array_equal(circ_dist(a, b), circ_dist(b, a))
    tri = np.all(circ_dist(a, c) <= circ_dist(a, b) + circ_dist(b, c) + 1e-15)
    return bool(sym and tri), "symmetry and triangle inequality on 2000 triples"


def check_lq_norm_order():
    g = _gen(2)
    ok = True
    for _ in range(200):
        x, y = g.random((2, 6)) * 2
        inf, q3, one = lq_dist(x, y, "inf"), lq_dist(x, y, 3), lq_dist(x, y, 1)
        ok &= inf <= q3 + 1e-15 and q3 <= one + 1e-15
    return ok, "||.||_inf <= ||.||_3 <= ||.||_1"


def check_tau_monotone():
    taus = [derive_tau_lambda(10, 4, 2, p, bins=2**12).tau for p in (0.1, 0.3, 0.5, 0.7)]
    exact = all(abs(derive_tau_lambda(10, d, "inf", 0.3).tau ** d - 0.3) < 1e-14 for d in (1, 5, 50))
    return bool(np.all(np.diff(taus) >= 0) and exact), f"tau(p) for q=2: {np.round(taus, 6).tolist()}"


def check_sum_uq_cdf():
    g = _gen(3)
    vals = [sum_uq_cdf(4, 3.0, t, 2**12) for t in np.linspace(0, 4, 9)]
    mono = bool(np.all(np.diff(vals) >= 0))
    s = (g.random((200000, 4)) ** 3).sum(axis=1)
    ph = float(np.mean(s <= 1.2))
    se = math.sqrt(ph * (1 - ph) / s.size)
    cdf = sum_uq_cdf(4, 3.0, 1.2)
    return mono and abs(ph - cdf) <= 4 * se, f"CDF {cdf:.6f} vs MC {ph:.6f} (se {se:.1e})"


def check_phi():
    vals = [phi(m) for m in range(1, 13)]
    fixed = phi_fraction(1) == 1 and phi_fraction(2) == Fraction(3, 4) and phi_fraction(3) == Fraction(2, 3)
    g = _gen(4)
    u = g.uniform(-1, 1, size=(200000, 5)).sum(axis=1)
    ph = float(np.mean(np.abs(u) <= 1))
    se = math.sqrt(ph * (1 - ph) / u.size)
    return bool(fixed and np.all(np.diff(vals) <= 0) and abs(ph - phi(5)) <= 4 * se), "phi values, monotone, MC at m=5"


# -- graph model ------------------------------------------------------------

def check_sampler_determinism():
    params = params_for(60, 5, 0.4)
    g1, _ = sample_rgg(params, RngSpec(SEED, 9))
    g2, _ = sample_rgg(params, RngSpec(SEED, 9))
    a = g1.dense()
    ok = g1 == g2 and not np.any(np.diagonal(a)) and np.array_equal(a, a.T)
    return bool(ok), "same spec, same graph; symmetric, zero diagonal"


def check_and_factorization():
    g = _gen(5)
    ok = True
    for _ in range(20):
        d = int(g.integers(2, 6))
        params = params_for(15, d, 0.3)
        x = g.random((15, d)) * 2
        full = rgg_from_latents(x, params).dense()
        acc = np.ones_like(full)
        for u in range(d):
            acc &= complement_1d_from_latents(x[:, u], params.lam).complement().dense()
        ok &= np.array_equal(full, acc)
    return bool(ok), "q=inf graph equals AND of 1-D graphs on 20 latent sets"


def check_complement_duality():
    g = _gen(6)
    lam = 0.3
    x = g.random((4000, 2)) * 2
    dist = circ_dist(x[:, 0], x[:, 1])
    comp = float(np.mean(dist >= 1 - lam))
    rgg = float(np.mean(dist <= 1 - lam))
    se = math.sqrt(lam * (1 - lam) / 4000)
    return abs(comp - lam) <= 5 * se and abs(comp + rgg - 1.0) < 1e-12, f"edge rate {comp:.4f} vs {lam}"


def check_backends():
    g = _gen(7)
    x = g.random((40, 6)) * 2
    a = kernels._linf_adjacency_np(x, 0.9)
    b = kernels.linf_adjacency(x, 0.9)
    rows = kernels.pack_rows(a.astype(bool))
    deg = np.bitwise_count(rows).sum(axis=1).astype(np.int64)
    same = np.array_equal(a, b) and kernels._pair_counts_np(rows, deg) == tuple(kernels.pair_counts(rows, deg))
    return bool(same), f"numpy and active backend agree (active: {BACKEND})"


def check_serialization():
    g = sample_er(37, 0.3, _gen(8))
    return Graph.from_bytes(g.to_bytes()) == g, "binary round trip"


# -- one-dimensional polymer ------------------------------------------------

def check_chi_closed_forms():
    lam = 0.05
    ok = abs(chi(path(4), lam).value - lam**4) < 1e-15
    ok &= abs(chi(star(3), lam).value - lam**3) < 1e-15
    ok &= chi(cycle(5), lam).value == 0.0
    for m in (4, 6, 8):
        ok &= abs(chi(cycle(m), lam).value - lam ** (m - 1) * phi(m - 1)) < 1e-12 * lam ** (m - 1)
    return bool(ok), "forests, odd cycles, even cycles"


def check_chi_multiplicative():
    lam = 0.04
    bow = builtin("bowtie")
    c4 = cycle(4)
    two = EdgePattern.from_edges([(0, 1), (1, 2), (2, 3), (3, 0), (3, 4), (4, 5), (5, 6), (6, 3)])
    ok = bow.n_edges == 6 and chi(bow, lam).value == 0.0
    ok &= abs(chi(two, lam).value - chi(c4, lam).value ** 2) <= 1e-12 * chi(two, lam).value
    return bool(ok), "chi of two C4 sharing a vertex is the product"


def check_psi_bound():
    lam = 0.05
    ok = True
    for h in (cycle(4), cycle(6), complete_bipartite(2, 3), builtin("theta")):
        ok &= abs(psi(h, lam)) <= 2 * lam ** max(h.n_vertices / 2 + 1, h.n_vertices - 1)
    return bool(ok), "|psi| bound on even cycles, K23, theta"


def check_pie():
    for h in (cycle(4), complete_bipartite(2, 3), builtin("K4")):
        expected_weight_1d(h, 0.03)
    ok = all(alternating_subset_sum(k) == 0 for k in range(1, 13))
    return ok, "two 1-D weight formulas agree; alternating sums vanish"


def check_chi_mc():
    lam = 0.05
    est, hits = direct_mc_all_edges(cycle(4), lam, 400000, _gen(10))
    ref = chi(cycle(4), lam).value
    se = math.sqrt(ref * (1 - ref) / 400000)
    return abs(est - ref) <= 4 * se, f"C4 all-edge MC {est:.3e} vs {ref:.3e}"


# -- cluster expansion ------------------------------------------------------

def check_leaf_and_blocks():
    params = params_for(10, 30, 0.5)
    leafy = EdgePattern.from_edges([(0, 1), (1, 2), (2, 0), (2, 3)])
    zero = abs(signed_weight(leafy, params).value) < 1e-10
    bow = builtin("bowtie")
    prod = signed_weight(cycle(3), params).value ** 2
    blocks = abs(signed_weight(bow, params).value - prod) <= 1e-10 * abs(prod)
    return bool(zero and blocks), "leaf kills weight; bowtie = C3 squared"


def check_asymptotic():
    params = params_for(10, 200, 0.5)
    ok = True
    for m in (3, 4):
        diff = abs(signed_weight(cycle(m), params).value - signed_cycle_asymptotic(m, params).value)
        ok &= diff <= 10 * params.p**m * params.d**2 * params.lam ** (2 * (m - 1))
    return bool(ok), "exact minus leading term within the remainder order"


def check_roundtrip_1d():
    params = params_for(10, 40, 0.5)
    h = complete_bipartite(2, 3)
    w = expected_weight(h, params).value ** (1 / params.d)
    return abs(w - expected_weight_1d(h, params.lam)) < 1e-12, "E[W]^(1/d) equals the 1-D weight"


def check_signed_mc():
    params = params_for(10, 30, 0.5)
    est, se = signed_weight_mc(cycle(3), params, 200000, _gen(11))
    ref = signed_weight(cycle(3), params).value
    return abs(est - ref) <= 4 * se, f"C3 latent MC {est:.2e} +- {se:.1e} vs {ref:.2e}"


# -- statistics -------------------------------------------------------------

def check_trace_vs_dense():
    g = _gen(12)
    ok = True
    for _ in range(30):
        n = int(g.integers(4, 11))
        gr = sample_er(n, float(g.random()), g)
        ok &= abs(signed_triangle_count(gr, 0.4) - signed_triangle_count_dense(gr, 0.4)) < 1e-9
        ok &= abs(signed_4cycle_count(gr, 0.4) - signed_4cycle_count_dense(gr, 0.4)) < 1e-9
    return bool(ok), "trace formulas equal dense sums on 30 graphs"


def check_permutation_and_parity():
    g = _gen(13)
    gr = sample_er(20, 0.5, g)
    perm = g.permutation(20)
    pg = gr.permuted(perm)
    ok = signed_triangle_count(gr, 0.3) == signed_triangle_count(pg, 0.3)
    ok &= signed_4cycle_count(gr, 0.3) == signed_4cycle_count(pg, 0.3)
    comp = gr.complement()
    ok &= abs(signed_triangle_count(comp, 0.7) + signed_triangle_count(gr, 0.3)) < 1e-8
    ok &= abs(signed_4cycle_count(comp, 0.7) - signed_4cycle_count(gr, 0.3)) < 1e-8
    return bool(ok), "relabel invariance; odd/even under complement"


def check_null_centering():
    rep = mc_run(ModelSpec.er(30, 0.5), StatSpec("C4", 0.5), 400, RngSpec(SEED, 14), threads=1)
    return abs(rep.mean) <= 4 * rep.std_error, f"ER mean {rep.mean:.2f} (se {rep.std_error:.2f})"


def check_thread_invariance():
    spec = RngSpec(SEED, 15)
    a = mc_run(ModelSpec.rgg(params_for(40, 6, 0.5)), StatSpec("C3", 0.5), 24, spec, threads=1, keep_values=True)
    b = mc_run(ModelSpec.rgg(params_for(40, 6, 0.5)), StatSpec("C3", 0.5), 24, spec, threads=4, keep_values=True)
    return bool(np.array_equal(a.values, b.values)), "1 and 4 threads give identical replicates"


# -- detection --------------------------------------------------------------

def check_detect_deterministic():
    params = params_for(80, 8, 0.5)
    g, _ = sample_rgg(params, RngSpec(SEED, 16))
    return detect(g, params, "C3") == detect(g, params, "C3"), "same inputs, same outcome"


def check_estimate_roundtrip():
    grid = mean_grid("C4", 300, 0.5, 10, 20)
    ok = all(estimate_dimension(m, 300, 0.5, "C4", grid=grid) == d for d, m in zip(grid.dims, grid.means))
    mid = 0.5 * (grid.means[5] + grid.means[6])
    ok &= estimate_dimension(mid, 300, 0.5, "C4", grid=grid) == 15
    return bool(ok), "noiseless means recover every d; midpoint goes to the smaller d"


# -- bounds -----------------------------------------------------------------

def check_moments():
    params = params_for(10, 30, 0.5)
    t1 = abs(sigma_conv_moment_linfty(1, params) - 0.25) < 1e-12
    rt = abs(sigma_conv_moment_linfty(3, params) ** (1 / 30) - conv_moment_bracket(3, params.lam)) < 1e-12
    xs = np.linspace(0, 1, 200001)
    avg = np.trapezoid(overlap_f(xs, 0.1), xs)
    return bool(t1 and rt and abs(avg - 0.81) < 1e-8), "t=1 moment is p^2; d-th root round trip; mean of f"


def check_kl():
    k_small = kl_bound(2, params_for(2, 1000, 0.5)).kl
    a = kl_bound(20, params_for(20, 2000, 0.5)).kl
    b = kl_bound(20, params_for(20, 4000, 0.5)).kl
    c = kl_bound(30, params_for(30, 2000, 0.5)).kl
    return k_small == 0.0 and b <= a <= c, f"KL n=20: d=2000 {a:.3e}, d=4000 {b:.3e}; n=30 {c:.3e}"


def check_gamma():
    params = params_for(10, 30, 0.5)
    rep = gamma_moment_mc(params, 1, 400, 400, _gen(17))
    return abs(rep.estimate) <= 4 * rep.std_error, f"E[gamma] {rep.estimate:.2e} (se {rep.std_error:.1e})"


def check_small_ball():
    rep = small_ball_check(50, 10.0, 4.0, 4.2, 100000, _gen(18))
    tight = small_ball_check(5, 2.0, 0.1, 0.5, 100000, _gen(20))
    null = small_ball_check(50, 10.0, 4.0, 4.0, 10000, _gen(19))
    ok = rep.lemma_holds and tight.lemma_holds and not tight.trivially_satisfied and null.probability == 0.0
    return ok, f"P={tight.probability:.4f} vs bound {tight.lemma_bound:.3g} at d=5, q=2"


def check_influences():
    dic = hypercube_influences(SigmaSpec("dictator"), 6).influences
    thr = hypercube_influences(SigmaSpec("threshold", tau=1), 5).influences
    const = hypercube_influences(SigmaSpec("constant", value=0.5), 4).influences
    ok = dic[0] == 0.25 and np.all(dic[1:] == 0) and np.all(thr == 3 / 32) and np.all(const == 0)
    sym = hypercube_influences(SigmaSpec("threshold", tau=2), 10).influences
    return bool(ok and np.ptp(sym) <= 1e-15), "dictator, threshold 3/32, constant, symmetry"


CHECKS = (
    ("circ_dist is a metric", check_circ_metric),
    ("L_q norm ordering", check_lq_norm_order),
    ("tau monotone in p", check_tau_monotone),
    ("sum of powers CDF", check_sum_uq_cdf),
    ("phi values", check_phi),
    ("sampler determinism", check_sampler_determinism),
    ("AND factorization", check_and_factorization),
    ("complement duality", check_complement_duality),
    ("kernel backends", check_backends),
    ("graph serialization", check_serialization),
    ("chi closed forms", check_chi_closed_forms),
    ("chi multiplicativity", check_chi_multiplicative),
    ("psi bound", check_psi_bound),
    ("inclusion-exclusion", check_pie),
    ("chi Monte Carlo", check_chi_mc),
    ("leaf and block rules", check_leaf_and_blocks),
    ("asymptotic remainder", check_asymptotic),
    ("1-D round trip", check_roundtrip_1d),
    ("signed weight Monte Carlo", check_signed_mc),
    ("trace statistics", check_trace_vs_dense),
    ("permutation and parity", check_permutation_and_parity),
    ("null centering", check_null_centering),
    ("thread invariance", check_thread_invariance),
    ("detect determinism", check_detect_deterministic),
    ("dimension round trip", check_estimate_roundtrip),
    ("conv moments", check_moments),
    ("KL monotonicity", check_kl),
    ("gamma mean", check_gamma),
    ("small-ball bound", check_small_ball),
    ("hypercube influences", check_influences),
)


def run_selftest(names=None) -> list[CheckResult]:
    """Run every check (or those named); exceptions count as failures."""
    out = []
    for name, fn in CHECKS:
        if names and name not in names:
            continue
        start = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed invariant
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(name, bool(ok), detail, time.perf_counter() - start))
    return out
