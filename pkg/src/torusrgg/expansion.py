"""d-dimensional expected weights for the L-infinity torus model.

The L-infinity adjacency is the AND of d independent one-dimensional
adjacencies, so ``E[W_H] = (E_1d[W_H])^d``. Signed weights follow by
inclusion-exclusion over edge subsets,
``E[SW_H] = sum_B (-p)^{|E|-|B|} E[W_B]``, which cancels massively. Each 1-D
weight is an exact polynomial in lambda (see :mod:`torusrgg.polymer`), so the
sum is evaluated in mpmath at high working precision.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath as mp
import numpy as np

from .errors import InternalConsistencyError, UnsupportedGeometryError, ValidationError
from .geometry import ModelParams, connected, derive_tau_lambda, phi
from .patterns import EdgePattern, cycle, pattern_facts, placements_in_kn
from .polymer import check_guard, chi, exact_coefficient, subset_weight_numerators
from .rng import as_generator

MAX_SIGNED_EDGES = 16
DEFAULT_DPS = 60
PROP_SLACK = 0.01


@dataclass(frozen=True)
class WeightResult:
    """An expectation with its log (when positive) and an asymptotic prediction."""

    value: float
    log_value: float
    leading_term: float
    method: str
    remainder_bound: float = math.nan

    def __float__(self) -> float:
        return self.value


def _require_linf(params: ModelParams) -> None:
    if not params.is_linf:
        raise UnsupportedGeometryError(
            "closed-form weights exist only for q = inf; use Monte Carlo for finite q"
        )


def _log_or_nan(x) -> float:
    return float(mp.log(x)) if x > 0 else math.nan


def mp_lambda(params: ModelParams):
    """lambda = 1 - p^{1/d} at the current mpmath precision."""
    return -mp.expm1(mp.log(mp.mpf(params.p)) / params.d)


# ---------------------------------------------------------------------------
# unsigned weights
# ---------------------------------------------------------------------------

def expected_weight(h: EdgePattern, params: ModelParams, *, guard: str = "exact", dps: int = DEFAULT_DPS) -> WeightResult:
    """E[W_H] = (1-D weight)^d, evaluated as exp(d * log1p(w - 1))."""
    _require_linf(params)
    check_guard(h, params.lam, guard)
    with mp.workdps(dps):
        w1 = _weight_1d_mp(h, params)
        logv = params.d * mp.log1p(w1 - 1)
        value = mp.exp(logv)
    try:
        lead = unsigned_graph_asymptotic(h, params).value
    except ValidationError:
        lead = math.nan
    return WeightResult(float(value), float(logv), lead, "exact")


def _weight_1d_mp(h: EdgePattern, params: ModelParams):
    """1-D weight of ``h`` at the model's lambda, in mpmath."""
    lam = mp_lambda(params)
    den, num = subset_weight_numerators(h)
    row = num[(1 << h.n_edges) - 1]
    return mp.fsum(mp.mpf(int(c)) * lam**j for j, c in enumerate(row) if c) / den


def expected_weight_1d_mp(h: EdgePattern, params: ModelParams, dps: int = DEFAULT_DPS) -> float:
    with mp.workdps(dps):
        return float(_weight_1d_mp(h, params))


# ---------------------------------------------------------------------------
# signed weights
# ---------------------------------------------------------------------------

def _signed_sum_exact(h: EdgePattern, params: ModelParams):
    k = h.n_edges
    den, num = subset_weight_numerators(h)
    lam = mp_lambda(params)
    p = mp.mpf(params.p)
    lam_pows = [lam**j for j in range(num.shape[1])]
    cache: dict = {}
    terms = []
    for mask in range(1 << k):
        row = tuple(num[mask])
        val = cache.get(row)
        if val is None:
            w = mp.fsum(mp.mpf(int(c)) * lam_pows[j] for j, c in enumerate(row) if c) / den
            val = w ** params.d
            cache[row] = val
        sign_pow = k - bin(mask).count("1")
        terms.append((-p) ** sign_pow * val)
    return mp.fsum(terms)


def _signed_sum_float(h: EdgePattern, params: ModelParams, guard: str, rng, samples):
    """Fallback when some block needs Monte Carlo chi; plain double precision."""
    k = h.n_edges
    lam = params.lam
    chis = np.zeros(1 << k)
    chis[0] = 1.0
    for mask in range(1, 1 << k):
        chis[mask] = chi(h.sub(mask), lam, guard=guard, rng=rng, samples=samples).value
    terms = []
    for mask in range(1 << k):
        sub_terms = []
        sub = mask
        while True:
            sign = -1.0 if bin(sub).count("1") % 2 else 1.0
            sub_terms.append(sign * chis[sub])
            if sub == 0:
                break
            sub = (sub - 1) & mask
        w = math.fsum(sub_terms)
        terms.append((-params.p) ** (k - bin(mask).count("1")) * w**params.d)
    return math.fsum(terms)


def signed_weight(
    h: EdgePattern,
    params: ModelParams,
    *,
    guard: str = "exact",
    dps: int = DEFAULT_DPS,
    rng=None,
    samples: int = 10**6,
) -> WeightResult:
    """E[SW_H] for the L-infinity model by the direct alternating subset sum.

    The sum is not short-circuited for patterns with leaves or several blocks,
    so those identities stay checkable. Use :func:`signed_weight_factorized`
    for the faster block-product route.
    """
    _require_linf(params)
    if h.n_edges > MAX_SIGNED_EDGES:
        raise ValidationError(f"pattern has {h.n_edges} edges; limit is {MAX_SIGNED_EDGES}")
    check_guard(h, params.lam, guard)
    exact = all(exact_coefficient(h.sub(mask)) is not None for mask in _block_masks(h))
    if exact:
        with mp.workdps(dps):
            total = _signed_sum_exact(h, params)
            value = float(total)
            logv = _log_or_nan(total)
        method = "exact"
    else:
        value = _signed_sum_float(h, params, guard, rng, samples)
        logv = math.log(value) if value > 0 else math.nan
        method = "monte-carlo"
    if abs(value) > 1.0 + 1e-12:
        raise InternalConsistencyError(f"|E[SW_H]| = {abs(value)} exceeds 1")
    lead = math.nan
    f = pattern_facts(h)
    if f.numc == 1 and len(f.blocks) == 1 and h.n_edges == h.n_vertices and h.n_vertices >= 3:
        lead = signed_cycle_asymptotic(h.n_vertices, params, guard=guard).value
    return WeightResult(value, logv, lead, method)


def _block_masks(h: EdgePattern):
    """Masks of each 2-connected block (enough to decide exact availability)."""
    f = pattern_facts(h)
    for blk in f.blocks:
        yield sum(1 << i for i in blk)


def signed_weight_factorized(h: EdgePattern, params: ModelParams, **kw) -> float:
    """Product of block signed weights; zero as soon as a block is a bridge."""
    f = pattern_facts(h)
    out = 1.0
    for blk in f.blocks:
        if len(blk) == 1:
            return 0.0
        sub = EdgePattern.from_edges([h.edges[i] for i in blk])
        # the weight does not depend on n, so key the cache on n = 1
        out *= _signed_weight_cached(sub.edge_key(), params.with_n(1), kw.get("guard", "exact"))
    return out


@lru_cache(maxsize=4096)
def _signed_weight_cached(key: tuple, params: ModelParams, guard: str) -> float:
    nv, edges = key
    return signed_weight(EdgePattern(tuple(range(nv)), edges), params, guard=guard).value



def signed_weight_mc(h: EdgePattern, params: ModelParams, tuples: int = 10**6, rng=None,
                     chunk: int = 1 << 15) -> tuple[float, float]:
    """Latent-tuple Monte Carlo of E[SW_H] for any q.

    Draws one torus point per vertex of ``h`` and averages the product of
    ``1[edge] - p`` over the edges. Returns ``(estimate, standard_error)``.
    """
    if tuples < 2:
        raise ValidationError("need at least 2 tuples")
    gen = as_generator(rng)
    nv, d, p = h.n_vertices, params.d, params.p
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < tuples:
        m = min(chunk, tuples - done)
        x = gen.random((m, nv, d)) * 2.0
        prod = np.ones(m)
        for a, b in h.index_edges:
            prod *= connected(x[:, a] - x[:, b], params.q, params.tau) - p
        total += math.fsum(prod)
        total_sq += math.fsum(prod * prod)
        done += m
    mean = total / tuples
    var = max(total_sq / tuples - mean * mean, 0.0) * tuples / (tuples - 1)
    return mean, math.sqrt(var / tuples)

# ---------------------------------------------------------------------------
# asymptotic formulas
# ---------------------------------------------------------------------------

def signed_cycle_asymptotic(m: int, params: ModelParams, *, guard: str = "exact") -> WeightResult:
    """Leading term of E[SW_{C_m}], with the order of the remainder.

    odd m: ``p^m d lam^m / (1-lam)^m``; even m:
    ``p^m d (lam^{m-1} phi(m-1) - lam^m) / (1-lam)^m``. The remainder bound is
    ``p^m d^2 lam^{2(m-1)}``.
    """
    _require_linf(params)
    if m < 3:
        raise ValidationError("cycles need m >= 3")
    lam, p, d = params.lam, params.p, params.d
    if guard == "claim" and m > 1.0 / (8.0 * lam):
        raise ValidationError(f"m = {m} exceeds 1/(8*lambda) = {1.0 / (8.0 * lam):.4g}")
    if guard == "exact" and m * lam >= 1.0:
        raise ValidationError(f"m * lambda = {m * lam:.4g} must be < 1")
    if m % 2:
        lead = p**m * d * lam**m / (1.0 - lam) ** m
    else:
        lead = p**m * d * (lam ** (m - 1) * phi(m - 1) - lam**m) / (1.0 - lam) ** m
    rem = p**m * d**2 * lam ** (2 * (m - 1))
    return WeightResult(lead, math.log(lead) if lead > 0 else math.nan, lead, "asymptotic", rem)


def unsigned_graph_asymptotic(h: EdgePattern, params: ModelParams, *, slack: float = PROP_SLACK) -> WeightResult:
    """Main term of E[W_H] in terms of the girth m and cycle counts N(u).

    odd m: ``p^k (1 + d (N(m) + phi(m) N(m+1)) lam^m)``;
    even m: ``p^k (1 + d phi(m-1) N(m) lam^{m-1})``.
    The hypothesis ``k^{m+2} lam <= slack`` is enforced.
    """
    _require_linf(params)
    k = h.n_edges
    f = pattern_facts(h, cycle_cap=max(8, k + 1))
    p, d, lam = params.p, params.d, params.lam
    if f.girth is None:
        v = p**k
        return WeightResult(v, math.log(v), v, "asymptotic")
    m = f.girth
    prod = k ** (m + 2) * lam
    if prod > slack:
        raise ValidationError(
            f"hypothesis k^(m+2) * lambda <= {slack} fails: {k}^{m + 2} * {lam:.4g} = {prod:.4g}"
        )
    n_m = f.cycle_counts.get(m, 0)
    if m % 2:
        n_next = f.cycle_counts.get(m + 1, 0)
        corr = d * (n_m + phi(m) * n_next) * lam**m
    else:
        corr = d * phi(m - 1) * n_m * lam ** (m - 1)
    v = p**k * (1.0 + corr)
    return WeightResult(v, math.log(v), v, "asymptotic")


def signed_weight_bound(h: EdgePattern, params: ModelParams, c: float) -> float:
    """``p^{|E|} ((log d)^C / d)^{|V|/2}`` under ``|E| <= (log d)^{5/4} / log log d``."""
    d = params.d
    if d < 3:
        raise ValidationError("the bound needs d >= 3 (log log d > 0)")
    cap = math.log(d) ** 1.25 / math.log(math.log(d))
    if h.n_edges > cap:
        raise ValidationError(f"|E(H)| = {h.n_edges} exceeds (log d)^(5/4)/log log d = {cap:.4g}")
    return params.p**h.n_edges * (math.log(d) ** c / d) ** (h.n_vertices / 2)


# ---------------------------------------------------------------------------
# cycle means
# ---------------------------------------------------------------------------

def cycle_placements(m: int, n: int) -> int:
    """Number of undirected m-cycles in K_n, ``(m-1)!/2 * C(n, m)``."""
    return math.factorial(m - 1) // 2 * math.comb(n, m)


def refined_cycle_mean(m: int, n: int, params: ModelParams) -> float:
    """Dimension-indexed mean from the expansion in ``L / d`` with ``L = log 1/p``.

    C3: ``C(n,3) p^3 (L^3/d^2 + 1.5 L^4/d^3)``;
    C4: ``3 C(n,4) p^4 (phi(3) L^3/d^2 + 1.5 phi(3) L^4/d^3 - L^4/d^3)``.
    """
    L = math.log(1.0 / params.p)
    d, p = params.d, params.p
    if m == 3:
        return math.comb(n, 3) * p**3 * (L**3 / d**2 + 1.5 * L**4 / d**3)
    if m == 4:
        f3 = phi(3)
        return 3 * math.comb(n, 4) * p**4 * (f3 * L**3 / d**2 + 1.5 * f3 * L**4 / d**3 - L**4 / d**3)
    raise ValidationError("refined expansions exist for m in {3, 4}")


def expected_signed_cycle_mean(m: int, n: int, params: ModelParams, *, variant: str = "exact", guard: str = "exact") -> float:
    """E[SC_{C_m}] = ``(m-1)!/2 C(n,m)`` times the per-pattern signed weight.

    ``variant`` is ``"exact"`` (alternating subset sum), ``"asymptotic"``
    (leading term) or ``"refined"`` (expansion in ``log(1/p)/d``).
    """
    _require_linf(params)
    if m < 3:
        raise ValidationError("cycles need m >= 3")
    if variant == "refined":
        return refined_cycle_mean(m, n, params)
    count = cycle_placements(m, n)
    if variant == "exact":
        return count * signed_weight(cycle(m), params, guard=guard).value
    if variant == "asymptotic":
        return count * signed_cycle_asymptotic(m, params, guard=guard).value
    raise ValidationError(f"unknown variant {variant!r}")


# ---------------------------------------------------------------------------
# variances
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VariancePrediction:
    """Variance of a signed cycle count.

    ``value`` is exact for ER and, for the RGG, the exact overlap sum when
    available. ``er_term`` and ``band`` give the ER part and the order of the
    RGG correction with its unknown constant set by the caller.
    """

    value: float
    er_term: float
    band: float
    exact: bool


def _stat_cycle(stat) -> int:
    s = str(stat).upper()
    if s in ("C3", "3", "TRIANGLE"):
        return 3
    if s in ("C4", "4", "FOURCYCLE"):
        return 4
    raise ValidationError(f"stat must be C3 or C4, got {stat!r}")


def er_variance(stat, n: int, p: float) -> float:
    m = _stat_cycle(stat)
    if m == 3:
        return math.comb(n, 3) * (p - p * p) ** 3
    return 3 * math.comb(n, 4) * (p - p * p) ** 4


def correction_band(stat, n: int, params: ModelParams, constant: float = 1.0) -> float:
    m = _stat_cycle(stat)
    p, d = params.p, params.d
    if m == 3:
        return constant * n**4 * p**5 / d**2
    return constant * (n**5 * p**6 / d**2 + n**6 * p**7 / d**3)


@lru_cache(maxsize=64)
def _overlap_placements(key: tuple) -> tuple:
    """Second placements sharing >= 2 vertices with the first one.

    Returns tuples ``(s, frozenset_of_edges)`` on labels ``0..2v-s-1`` with the
    first copy on ``0..v-1``.
    """
    nv, edges = key
    out = []
    for s in range(2, nv + 1):
        new = list(range(nv, 2 * nv - s))
        for shared in itertools.combinations(range(nv), s):
            labels = list(shared) + new
            seen = set()
            for perm in itertools.permutations(labels):
                e2 = frozenset(frozenset((perm[a], perm[b])) for a, b in edges)
                if e2 not in seen:
                    seen.add(e2)
                    out.append((s, e2))
    return tuple(out)


def signed_count_variance(h: EdgePattern, n: int, params: ModelParams, model: str = "RGG", *, guard: str = "exact") -> float:
    """Exact variance of SC_H via pairwise placement covariances.

    Placements sharing at most one vertex are independent. For the others,
    ``(I_e - p)^2 = (1 - 2p)(I_e - p) + p(1 - p)`` on shared edges turns each
    product into signed weights of union patterns.
    """
    p = params.p
    nv, edges = h.edge_key()
    e1 = frozenset(frozenset(e) for e in edges)
    total_placements = placements_in_kn(h, n)
    if model.upper() == "ER":
        return total_placements * (p - p * p) ** len(edges)
    _require_linf(params)
    mean_sw = signed_weight_factorized(h, params, guard=guard)
    acc = []
    for s, e2 in _overlap_placements((nv, edges)):
        mult = math.comb(n - nv, nv - s)
        if mult == 0:
            continue
        inter = e1 & e2
        sym = (e1 | e2) - inter
        inter = sorted(tuple(sorted(e)) for e in inter)
        cov_terms = []
        for r in range(len(inter) + 1):
            for tset in itertools.combinations(inter, r):
                union = [tuple(sorted(e)) for e in sym] + list(tset)
                coef = (1 - 2 * p) ** r * (p - p * p) ** (len(inter) - r)
                if coef == 0.0:
                    continue
                if not union:
                    cov_terms.append(coef)
                    continue
                pat = EdgePattern.from_edges(sorted(union))
                cov_terms.append(coef * signed_weight_factorized(pat, params, guard=guard))
        cov = math.fsum(cov_terms) - mean_sw**2
        acc.append(mult * cov)
    return total_placements * math.fsum(acc)


def variance_predictor(stat, n: int, params: ModelParams, model: str = "ER", *, constant: float = 1.0, exact_rgg: bool = True) -> VariancePrediction:
    """Variance of SC_{C3} or SC_{C4} under ER or the L-infinity RGG."""
    m = _stat_cycle(stat)
    er = er_variance(m, n, params.p)
    if model.upper() == "ER":
        return VariancePrediction(er, er, 0.0, True)
    if model.upper() != "RGG":
        raise ValidationError("model must be ER or RGG")
    _require_linf(params)
    band = correction_band(m, n, params, constant)
    if exact_rgg:
        v = signed_count_variance(cycle(m), n, params)
        return VariancePrediction(v, er, band, True)
    return VariancePrediction(er + band, er, band, False)


def params_for(n: int, d: int, p: float) -> ModelParams:
    """Shorthand for the L-infinity model."""
    return derive_tau_lambda(n, d, math.inf, p)
