"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` (the summary block at
the end lists every criterion) or as a script with
``python3 tests/test_acceptance.py``.
"""

import io
import itertools
import math
import sys
import time
from contextlib import redirect_stdout
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from scipy.integrate import quad

sys.path.insert(0, str(Path(__file__).parent))
from conftest import record_acceptance  # noqa: E402

from torusrgg import cli
from torusrgg.bounds import (
    gamma_moment_mc,
    hypercube_influences,
    kl_bound,
    overlap_f,
    sigma_conv_moment_linfty,
    small_ball_sweep,
)
from torusrgg.detection import (
    choose_n_for_gap,
    gap_z,
    min_gap_z,
    power_curve,
    predicted_success,
    recovery_experiment,
)
from torusrgg.expansion import params_for, signed_weight, signed_weight_mc
from torusrgg.geometry import derive_tau_lambda, phi_fraction
from torusrgg.graph import sample_er, sample_rgg
from torusrgg.hypercube import SigmaSpec
from torusrgg.patterns import EdgePattern, builtin, complete_bipartite, cycle, path, star
from torusrgg.polymer import chi, direct_mc_all_edges, exact_coefficient, psi
from torusrgg.rng import RngSpec
from torusrgg.statistics import run_replicates, signed_4cycle_count, signed_triangle_count, subgraph_counts


def _timed(fn):
    start = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - start


# ---------------------------------------------------------------------------
# 1. exact 1-D formulas
# ---------------------------------------------------------------------------

FORESTS = [
    path(1), path(3), path(6), star(4),
    EdgePattern.from_edges([(0, 1), (1, 2), (1, 3), (3, 4), (3, 5)]),
    EdgePattern.from_edges([(0, 1), (2, 3), (3, 4)]),
    EdgePattern.from_edges([(0, 1), (2, 3), (4, 5), (5, 6), (5, 7)]),
]


def test_criterion_01_exact_1d_formulas():
    def run():
        fails = []
        for h in FORESTS:
            coef, exp = exact_coefficient(h)
            if (coef, exp) != (Fraction(1), h.n_edges):
                fails.append(f"forest {h}")
        for m in range(3, 9):
            coef, exp = exact_coefficient(cycle(m))
            want = Fraction(0) if m % 2 else phi_fraction(m - 1)
            if coef != want or (m % 2 == 0 and exp != m - 1):
                fails.append(f"C{m} symbolic")
        if (phi_fraction(1), phi_fraction(2), phi_fraction(3)) != (1, Fraction(3, 4), Fraction(2, 3)):
            fails.append("phi values")
        for lam in (0.01, 0.03, 0.1):
            for h in FORESTS:
                if abs(chi(h, lam).value - lam**h.n_edges) > 1e-12 or abs(psi(h, lam)) > 1e-12:
                    fails.append(f"forest {h} at {lam}")
            for m in range(3, 9):
                want = 0.0 if m % 2 else lam ** (m - 1) * float(phi_fraction(m - 1))
                if abs(chi(cycle(m), lam).value - want) > 1e-12:
                    fails.append(f"C{m} at {lam}")
        return fails

    fails, secs = _timed(run)
    ok = not fails and secs < 1.0
    record_acceptance(1, ok, f"forests, C3..C8 symbolic and at 3 lambdas; {secs:.2f}s; failures={fails}")
    assert ok


# ---------------------------------------------------------------------------
# 2. MC versus closed form in 1-D
# ---------------------------------------------------------------------------

def test_criterion_02_mc_vs_closed_form():
    samples = 10**7
    rows = []

    def run():
        gen = RngSpec(202, 0).generator()
        for lam in (0.02, 0.05):
            for name, h in (("C4", cycle(4)), ("C5", cycle(5)), ("C6", cycle(6)), ("K23", complete_bipartite(2, 3))):
                ref = chi(h, lam).value
                est, hits = direct_mc_all_edges(h, lam, samples, gen)
                if ref == 0.0:
                    good = hits == 0
                    z = 0.0 if good else math.inf
                else:
                    se = math.sqrt(ref * (1 - ref) / samples)
                    z = (est - ref) / se
                    good = abs(z) <= 4
                rows.append((name, lam, ref, est, hits, z, good))
        return rows

    _, secs = _timed(run)
    ok = all(r[-1] for r in rows) and secs < 120
    detail = "; ".join(f"{n}@{lam}: z={z:+.2f} hits={hits}" for n, lam, _, _, hits, z, _ in rows)
    record_acceptance(2, ok, f"{detail}; {secs:.0f}s")
    assert ok


# ---------------------------------------------------------------------------
# 3. signed weights against latent-tuple MC
# ---------------------------------------------------------------------------

LEAFY = [
    path(2), path(4), star(3),
    EdgePattern.from_edges([(0, 1), (1, 2), (2, 0), (2, 3)]),
    EdgePattern.from_edges([(0, 1), (1, 2), (2, 3), (3, 0), (0, 4)]),
    EdgePattern.from_edges([(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3), (3, 4)]),
]


def test_criterion_03_signed_weight_oracle():
    params = params_for(10, 30, 0.5)
    rows = []

    def run():
        for name in ("C3", "C4", "bowtie", "K4"):
            h = builtin(name)
            ref = signed_weight(h, params).value
            est, se = signed_weight_mc(h, params, 10**6, RngSpec(303, len(rows)).generator())
            rows.append((name, ref, est, se, abs(est - ref) <= 4 * se))
        return max(abs(signed_weight(h, params).value) for h in LEAFY)

    leaf_max, secs = _timed(run)
    ok = all(r[-1] for r in rows) and leaf_max <= 1e-10 and secs < 300
    detail = "; ".join(f"{n}: exact {r:.3e} mc {e:.3e}+-{s:.1e}" for n, r, e, s, _ in rows)
    record_acceptance(3, ok, f"{detail}; max |leafy| = {leaf_max:.1e}; {secs:.0f}s")
    assert ok


# ---------------------------------------------------------------------------
# 4. statistic kernels against brute force
# ---------------------------------------------------------------------------

def _brute_signed(adj: np.ndarray, p: float):
    n = adj.shape[0]
    b = adj.astype(float) - p
    np.fill_diagonal(b, 0.0)
    c3 = sum(b[i, j] * b[j, k] * b[i, k] for i, j, k in itertools.combinations(range(n), 3))
    c4 = 0.0
    for quad_ in itertools.combinations(range(n), 4):
        a, x, y, z = quad_
        # the three 4-cycles on a vertex set
        for u, v, w in ((x, y, z), (x, z, y), (y, x, z)):
            c4 += b[a, u] * b[u, v] * b[v, w] * b[w, a]
    return c3, c4


def test_criterion_04_statistic_kernels():
    gen = RngSpec(404, 0).generator()

    def run():
        worst = 0.0
        for _ in range(200):
            n = int(gen.integers(1, 11))
            g = sample_er(n, float(gen.random()), gen)
            p = float(gen.uniform(0.05, 0.95))
            c3, c4 = _brute_signed(g.dense(), p)
            worst = max(worst, abs(signed_triangle_count(g, p) - c3), abs(signed_4cycle_count(g, p) - c4))
        return worst

    worst, secs = _timed(run)
    ok = worst <= 1e-9 and secs < 30
    record_acceptance(4, ok, f"200 graphs n<=10, max abs error {worst:.2e}; {secs:.1f}s")
    assert ok


# ---------------------------------------------------------------------------
# 5. ER null calibration
# ---------------------------------------------------------------------------

def _two_stat_replicates(draw, reps, spec, p, threads=1):
    out = np.empty((reps, 2))

    def one(gen, r):
        g = draw(gen)
        counts = subgraph_counts(g)
        out[r] = signed_triangle_count(g, p, counts), signed_4cycle_count(g, p, counts)
        return 0.0

    run_replicates(one, reps, spec, threads)
    return out


def test_criterion_05_er_null_calibration():
    n, p, reps = 50, 0.5, 10**5

    def run():
        return _two_stat_replicates(lambda g: sample_er(n, p, g), reps, RngSpec(505, 0), p)

    vals, secs = _timed(run)
    v3, v4 = vals.var(axis=0, ddof=1)
    t3 = math.comb(n, 3) * (p - p * p) ** 3
    t4 = 3 * math.comb(n, 4) * (p - p * p) ** 4
    r3, r4 = v3 / t3 - 1, v4 / t4 - 1
    ok = abs(r3) <= 0.05 and abs(r4) <= 0.05 and secs < 300
    record_acceptance(5, ok, f"Var SC3 {v3:.1f} vs {t3:.1f} ({r3:+.2%}); Var SC4 {v4:.1f} vs {t4:.1f} ({r4:+.2%}); {secs:.0f}s")
    assert ok


# ---------------------------------------------------------------------------
# 6. RGG mean reproduction
# ---------------------------------------------------------------------------

def test_criterion_06_rgg_means():
    n, d, p, reps = 200, 30, 0.5, 5000
    params = params_for(n, d, p)

    def run():
        return _two_stat_replicates(lambda g: sample_rgg(params, g)[0], reps, RngSpec(606, 0), p)

    vals, secs = _timed(run)
    pred3 = math.comb(n, 3) * signed_weight(cycle(3), params).value
    pred4 = 3 * math.comb(n, 4) * signed_weight(cycle(4), params).value
    m = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / math.sqrt(reps)
    z3, z4 = (m[0] - pred3) / se[0], (m[1] - pred4) / se[1]
    ok = abs(z3) <= 4 and abs(z4) <= 4 and secs < 900
    record_acceptance(6, ok, f"SC3 mc {m[0]:.1f} pred {pred3:.1f} z={z3:+.2f}; SC4 mc {m[1]:.1f} pred {pred4:.1f} z={z4:+.2f}; {secs:.0f}s")
    assert ok


# ---------------------------------------------------------------------------
# 7. ordering of the two tests at n = 512
# ---------------------------------------------------------------------------

D_GRID_7 = (16, 24, 32, 48, 64, 96, 128, 192, 256)


def test_criterion_07_triangle_vs_fourcycle_ordering():
    n, p = 512, 0.5

    def run():
        zs = {d: (predicted_success("C3", n, params_for(n, d, p))[0], predicted_success("C4", n, params_for(n, d, p))[0])
              for d in D_GRID_7}
        rows = power_curve(n, p, D_GRID_7, ("C3", "C4"), 500, RngSpec(707, 0))
        return zs, rows

    (zs, rows), secs = _timed(run)
    z_order = all(z4 > z3 for z3, z4 in zs.values())
    power = {(r.stat, r.d): r.power for r in rows}
    checked, bad = [], []
    for d, (z3, z4) in zs.items():
        if z4 - z3 > 2:
            checked.append(d)
            if power[("C4", d)] < power[("C3", d)]:
                bad.append(d)
    ok = z_order and not bad and bool(checked) and secs < 3600
    detail = ", ".join(f"d={d}: z {zs[d][0]:.2f}/{zs[d][1]:.2f} power {power[('C3', d)]:.2f}/{power[('C4', d)]:.2f}" for d in D_GRID_7)
    record_acceptance(7, ok, f"(C3/C4) {detail}; empirical ordering checked at d={checked}; {secs:.0f}s")
    assert ok


# ---------------------------------------------------------------------------
# 8. dimension recovery
# ---------------------------------------------------------------------------

def test_criterion_08_dimension_recovery():
    p, d_min, d_max, true_d = 0.5, 10, 20, 12

    def run():
        n4 = choose_n_for_gap("C4", p, d_min, d_max, 6.0)
        gap4 = min_gap_z("C4", n4, p, d_min, d_max)
        rec4 = recovery_experiment(n4, p, true_d, "C4", d_min, d_max, 200, RngSpec(808, 0))
        # C3 at a size where both gaps around the true d stay below 0.75 predicted SDs
        n3 = n4
        while max(gap_z("C3", n3, p, true_d - 1), gap_z("C3", n3, p, true_d)) >= 0.75:
            n3 = int(n3 * 0.9)
        g3 = max(gap_z("C3", n3, p, true_d - 1), gap_z("C3", n3, p, true_d))
        rec3 = recovery_experiment(n3, p, true_d, "C3", d_min, d_max, 200, RngSpec(808, 1))
        return n4, gap4, rec4, n3, g3, rec3

    (n4, gap4, rec4, n3, g3, rec3), secs = _timed(run)
    ok = gap4 >= 6 and rec4.exact_rate >= 0.9 and g3 < 1 and rec3.exact_rate <= 0.5 and secs < 3600
    record_acceptance(8, ok, f"C4 n={n4} min gap {gap4:.2f} SD, exact rate {rec4.exact_rate:.3f}; "
                             f"C3 n={n3} gap {g3:.2f} SD, exact rate {rec3.exact_rate:.3f}; {secs:.0f}s")
    assert ok


# ---------------------------------------------------------------------------
# 9. moments and KL
# ---------------------------------------------------------------------------

def test_criterion_09_moments_and_kl():
    def run():
        t1 = max(abs(sigma_conv_moment_linfty(1, params_for(5, d, p)) - p * p)
                 for d in (1, 10, 1000, 10**6) for p in (0.3, 0.5, 0.9) if params_for(5, d, p).lam < 0.5)
        lam = 0.1
        params = derive_tau_lambda(5, 1, "inf", 1 - lam)
        closed = sigma_conv_moment_linfty(2, params)
        # uniform measure on the circle: |x|_C is uniform on [0, 1]
        oracle = quad(lambda u: overlap_f(u, lam) ** 2, 0, 1, points=[2 * lam], epsabs=1e-14, epsrel=1e-14)[0]
        kls = [kl_bound(50, params_for(50, d, 0.5)).kl for d in (250_000, 500_000, 10**6, 2 * 10**6, 4 * 10**6)]
        return t1, abs(closed - oracle), kls

    (t1, quad_err, kls), secs = _timed(run)
    kl_at_1e6 = kls[2]
    mono = all(b <= a for a, b in zip(kls, kls[1:]))
    ok = t1 <= 1e-12 and quad_err <= 1e-8 and kl_at_1e6 < 0.01 and mono and secs < 60
    record_acceptance(9, ok, f"|E[s*s]-p^2| max {t1:.1e}; t=2 vs quadrature {quad_err:.1e}; "
                             f"KL(n=50,d=1e6)={kl_at_1e6:.2e}; KL over d grid {['%.2e' % k for k in kls]}; {secs:.1f}s")
    assert ok


# ---------------------------------------------------------------------------
# 10. gamma / four-cycle identity
# ---------------------------------------------------------------------------

def test_criterion_10_gamma_fourcycle_identity():
    rows = []

    def run():
        linf = params_for(5, 30, 0.5)
        g = gamma_moment_mc(linf, 2, 4000, 2000, RngSpec(1010, 0).generator())
        ref = signed_weight(cycle(4), linf).value
        rows.append(("q=inf,d=30", g.estimate, g.std_error, ref, 0.0))
        lq = derive_tau_lambda(5, 10, 2, 0.5)
        g2 = gamma_moment_mc(lq, 2, 4000, 2000, RngSpec(1010, 1).generator())
        ref2, se2 = signed_weight_mc(cycle(4), lq, 10**6, RngSpec(1010, 2).generator())
        rows.append(("q=2,d=10", g2.estimate, g2.std_error, ref2, se2))

    _, secs = _timed(run)
    zs = [(est - ref) / math.hypot(se, se_ref) for _, est, se, ref, se_ref in rows]
    ok = all(abs(z) <= 4 for z in zs) and secs < 600
    detail = "; ".join(f"{tag}: E[g^2] {est:.3e}+-{se:.1e} vs C4 {ref:.3e}, z={z:+.2f}" for (tag, est, se, ref, _), z in zip(rows, zs))
    record_acceptance(10, ok, f"{detail}; {secs:.0f}s")
    assert ok


# ---------------------------------------------------------------------------
# 11. small-ball lemma
# ---------------------------------------------------------------------------

def test_criterion_11_small_ball():
    d, q = 50, 10.0
    gen = RngSpec(1111, 0).generator()
    # half of the intervals near the bulk (median about 4.4), half in [0, 1.2]
    intervals = []
    for i in range(50):
        lo, hi = (2.0, 7.0) if i % 2 == 0 else (0.0, 1.2)
        a, b = np.sort(gen.uniform(lo, hi, 2))
        intervals.append((float(a), float(b)))

    reports, secs = _timed(lambda: small_ball_sweep(d, q, intervals, 10**6, RngSpec(1111, 1).generator()))
    worst = max(r.probability - r.lemma_bound - 4 * r.std_error for r in reports)
    nontrivial = sum(not r.trivially_satisfied for r in reports)
    ok = all(r.lemma_holds for r in reports) and secs < 120
    record_acceptance(11, ok, f"50 intervals, {nontrivial} with bound < 1; max(P - bound - 4SE) = {worst:.3g}; {secs:.1f}s")
    assert ok


# ---------------------------------------------------------------------------
# 12. hypercube influences
# ---------------------------------------------------------------------------

def test_criterion_12_hypercube():
    def run():
        dic = hypercube_influences(SigmaSpec("dictator", coord=0), 8).influences
        thr = hypercube_influences(SigmaSpec("threshold", tau=1), 5)
        spread = max(np.ptp(hypercube_influences(SigmaSpec("threshold", tau=t), d).influences)
                     for d in (5, 9, 14) for t in (-2, 0, 1, 3))
        return dic, thr, spread

    (dic, thr, spread), secs = _timed(run)
    ok = (dic[0] == 0.25 and np.all(dic[1:] == 0.0) and SigmaSpec("threshold", tau=1).density(5) == 0.5
          and np.all(thr.influences == 3 / 32) and spread <= 1e-15 and secs < 10)
    record_acceptance(12, ok, f"dictator {dic.tolist()}; threshold d=5 {thr.influences.tolist()}; symmetry spread {spread:.1e}; {secs:.2f}s")
    assert ok


# ---------------------------------------------------------------------------
# 13. determinism across thread counts
# ---------------------------------------------------------------------------

def _cli_bytes(argv, path: Path) -> bytes:
    with redirect_stdout(io.StringIO()):
        code = cli.main(argv + ["--out", str(path)])
    assert code == 0
    return path.read_bytes()


def test_criterion_13_determinism(tmp_path):
    runs = [
        ["power", "--n", "96", "--p", "0.5", "--d-grid", "6,12", "--stat", "C3,C4", "--reps", "40", "--seed", "1313"],
        ["mc-verify", "--pattern", "C4", "--n", "60", "--d", "8", "--p", "0.5", "--reps", "60", "--seed", "1313"],
        ["estimate-dim", "--n", "300", "--p", "0.5", "--true-d", "12", "--samples", "20", "--seed", "1313"],
        ["phase-diagram", "--model", "linf", "--seed", "1313"],
    ]

    def run():
        same = []
        for k, argv in enumerate(runs):
            outs = [_cli_bytes(argv + ["--threads", str(t)], tmp_path / f"r{k}_{t}_{rep}.csv") for t in (1, 8) for rep in (0, 1)]
            same.append(all(o == outs[0] for o in outs))
        return same

    same, secs = _timed(run)
    ok = all(same) and secs < 60
    record_acceptance(13, ok, f"byte-identical CSVs for {[r[0] for r in runs]}: {same}; {secs:.1f}s")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
