"""Evaluators for the information-theoretic side: self-convolution moments,
the KL tensorisation bound, gamma moments by nested Monte Carlo, small-ball
checks, hypercube influences and the low-degree advantage at small size.

Every evaluator returns a report dataclass with a ``to_dict`` method for
JSON output.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import mpmath as mp
import numpy as np

from .errors import UnsupportedGeometryError, ValidationError
from .expansion import mp_lambda, signed_weight_factorized
from .geometry import ModelParams, circ_dist, connected
from .hypercube import MAX_TABLE_D, SigmaSpec
from .patterns import enumerate_min_degree2, placements_in_kn
from .rng import as_generator

MAX_KL_N = 4000
MAX_INFLUENCE_D = MAX_TABLE_D
MAX_ADV_VERTICES = 8
MAX_ADV_EDGES = 10
PROP_CONSTANT = 1.0 / 8.0


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


class _Report:
    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


# ---------------------------------------------------------------------------
# overlap function and sigma * sigma moments (q = inf)
# ---------------------------------------------------------------------------

def overlap_f(x, lam: float):
    """Uniform probability of ``{z : |z|_C <= 1 - lam, |x - z|_C <= 1 - lam}`` on the circle.

    Equal to ``1 - lam - |x|_C / 2`` when ``|x|_C <= 2 lam`` and ``1 - 2 lam``
    otherwise, i.e. the 1-D self-convolution of the connection function.
    """
    if not (0.0 < lam < 0.5):
        raise ValidationError(f"lambda must lie in (0, 1/2), got {lam}")
    r = np.asarray(circ_dist(x, 0.0), dtype=float)
    out = np.where(r <= 2.0 * lam, 1.0 - lam - r / 2.0, 1.0 - 2.0 * lam)
    return float(out) if out.ndim == 0 else out


def _bracket_mp(t: int, lam):
    t = mp.mpf(t)
    return 2 / (t + 1) * (1 - lam) ** (t + 1) + (t - 1) / (t + 1) * (1 - 2 * lam) ** (t + 1)


def conv_moment_bracket(t: int, lam: float) -> float:
    """One-dimensional factor ``E[f^t]`` with the circle normalised to measure 1."""
    with mp.workdps(40):
        return float(_bracket_mp(t, mp.mpf(lam)))


def _check_linf_lam(params: ModelParams) -> None:
    if not params.is_linf:
        raise UnsupportedGeometryError("closed-form moments need q = inf")
    if not (0.0 < params.lam < 0.5):
        raise ValidationError(f"closed form needs lambda in (0, 1/2), got {params.lam}")


def sigma_conv_moment_linfty(t: int, params: ModelParams, *, warn: bool = True) -> float:
    """E[(sigma * sigma)^t] for the L-infinity model, ``bracket(t)^d``.

    Evaluated in log space at 40 digits.
    """
    if t < 0:
        raise ValidationError("t must be >= 0")
    _check_linf_lam(params)
    if warn and t * params.lam >= 0.5:
        warnings.warn(f"t*lambda = {t * params.lam:.3g} >= 1/2: outside the small-t regime", stacklevel=2)
    if t == 0:
        return 1.0
    with mp.workdps(40):
        return float(mp.exp(params.d * mp.log(_bracket_mp(t, mp_lambda(params)))))


@dataclass(frozen=True)
class MomentTable(_Report):
    """``t -> moment`` with standard errors (zero for closed forms)."""

    params: dict
    ts: tuple
    values: tuple
    std_errors: tuple
    method: str

    def __getitem__(self, t: int) -> float:
        return self.values[self.ts.index(t)]


def moment_table(params: ModelParams, ts=(1, 2, 3, 4)) -> MomentTable:
    vals = tuple(sigma_conv_moment_linfty(int(t), params, warn=False) for t in ts)
    return MomentTable(params.describe(), tuple(int(t) for t in ts), vals, tuple(0.0 for _ in ts), "closed-form")


# ---------------------------------------------------------------------------
# KL tensorisation bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KLReport(_Report):
    n: int
    params: dict
    kl: float
    tv_bound: float
    max_term: float
    working_digits: int


def kl_bound(n: int, params: ModelParams) -> KLReport:
    """``sum_{k<n} log E[(1 + gamma/(p(1-p)))^k]`` and the Pinsker bound ``sqrt(KL/2)``.

    The expectation is expanded binomially,
    ``sum_t C(k,t) a^{k-t} b^t E[(sigma*sigma)^t]`` with
    ``a = (1-2p)/(1-p)`` and ``b = 1/(p(1-p))``. For p > 1/2 the terms
    alternate, so the working precision grows with the worst-case magnitude.
    """
    if n < 1 or n > MAX_KL_N:
        raise ValidationError(f"n must lie in [1, {MAX_KL_N}]")
    _check_linf_lam(params)
    p = params.p
    if not (0.0 < p < 1.0):
        raise ValidationError("p must lie in (0, 1)")
    mag = abs((1 - 2 * p) / (1 - p)) + p / (1 - p)
    digits = 40 + int(math.ceil(max(0.0, (n - 1) * math.log10(max(mag, 1.0)))))
    with mp.workdps(digits):
        lam = mp_lambda(params)
        pm = mp.mpf(p)
        a = (1 - 2 * pm) / (1 - pm)
        b = 1 / (pm * (1 - pm))
        moments = [mp.mpf(1)] + [mp.exp(params.d * mp.log(_bracket_mp(t, lam))) for t in range(1, n)]
        bm = [b**t * moments[t] for t in range(n)]
        total = mp.mpf(0)
        worst = mp.mpf(0)
        for k in range(2, n):
            binom = mp.mpf(1)
            terms = []
            for t in range(k + 1):
                terms.append(binom * a ** (k - t) * bm[t])
                binom = binom * (k - t) / (t + 1)
            e = mp.fsum(terms)
            if e <= 0:
                raise ValidationError(f"moment sum for k={k} is not positive; precision too low")
            term = mp.log(e)
            worst = max(worst, abs(term))
            total += term
        kl = float(total)
    return KLReport(n, params.describe(), kl, math.sqrt(max(kl, 0.0) / 2.0), float(worst), digits)


# ---------------------------------------------------------------------------
# gamma moments by nested Monte Carlo
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GammaMomentReport(_Report):
    t: int
    estimate: float
    std_error: float
    outer: int
    inner: int
    params: dict


def gamma_moment_mc(params: ModelParams, t: int, outer: int, inner: int, rng=None,
                    *, chunk_elems: int = 1 << 22) -> GammaMomentReport:
    """Estimate ``E[gamma(x)^t]`` with ``gamma(x) = E_z[(sigma(x-z)-p)(sigma(z)-p)]``.

    For every outer point the inner sample is split into ``t`` independent
    chunks; the product of the chunk means is unbiased for ``gamma(x)^t``.
    """
    if t not in (1, 2, 3, 4):
        raise ValidationError("t must be 1, 2, 3 or 4")
    if t >= 2 and inner < 2:
        raise ValidationError("inner budget must be >= 2 for t >= 2")
    if inner < t:
        raise ValidationError(f"inner budget must be >= t = {t}")
    if outer < 2:
        raise ValidationError("outer budget must be >= 2")
    gen = as_generator(rng)
    d, p, q, tau = params.d, params.p, params.q, params.tau
    per = inner // t
    block = max(1, chunk_elems // (t * per * d))
    prods = np.empty(outer)
    done = 0
    while done < outer:
        m = min(block, outer - done)
        x = gen.random((m, 1, d)) * 2.0
        z = gen.random((m, t * per, d)) * 2.0
        y = (connected(x - z, q, tau) - p) * (connected(z, q, tau) - p)
        means = y.reshape(m, t, per).mean(axis=2)
        prods[done:done + m] = means.prod(axis=1)
        done += m
    est = math.fsum(prods) / outer
    se = float(np.std(prods, ddof=1)) / math.sqrt(outer)
    return GammaMomentReport(t, est, se, outer, inner, params.describe())


# ---------------------------------------------------------------------------
# small-ball checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SmallBallReport(_Report):
    d: int
    q: float
    a: float
    b: float
    probability: float
    std_error: float
    lemma_bound: float
    trivially_satisfied: bool
    lemma_holds: bool
    prop_bound: float
    samples: int


def small_ball_bound(d: int, q: float, a: float, b: float) -> float:
    """``b^{(d-1)/q} - a^{(d-1)/q}``."""
    k = (d - 1) / q
    return b**k - a**k


def _sums_of_powers(d: int, q: float, samples: int, gen, chunk: int = 1 << 16) -> np.ndarray:
    out = np.empty(samples)
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        out[done:done + m] = (gen.random((m, d - 1)) ** q).sum(axis=1)
        done += m
    return out


def _ball_report(s: np.ndarray, d: int, q: float, a: float, b: float, z: float) -> SmallBallReport:
    n = s.size
    prob = float(np.count_nonzero((s >= a) & (s <= b))) / n
    se = math.sqrt(prob * (1 - prob) / n)
    bound = small_ball_bound(d, q, a, b)
    prop = math.exp(-PROP_CONSTANT * d / q) + (b - a) * math.sqrt(q / d)
    return SmallBallReport(d, q, a, b, prob, se, bound, bound >= 1.0, prob <= bound + z * se, prop, n)


def small_ball_check(d: int, q: float, a: float, b: float, samples: int = 10**6, rng=None,
                     *, z: float = 4.0) -> SmallBallReport:
    """MC estimate of ``P[sum_{i<d} U_i^q in [a, b]]`` against the small-ball bound.

    ``lemma_holds`` allows ``z`` standard errors of slack; ``prop_bound`` is
    a diagnostic with an assumed constant and is never asserted.
    """
    if d < 2 or q <= 0:
        raise ValidationError("need d >= 2 and q > 0")
    if not (0.0 <= a <= b):
        raise ValidationError("need 0 <= a <= b")
    gen = as_generator(rng)
    return _ball_report(_sums_of_powers(d, q, samples, gen), d, q, a, b, z)


def small_ball_sweep(d: int, q: float, intervals, samples: int = 10**6, rng=None,
                     *, z: float = 4.0) -> list[SmallBallReport]:
    """Several intervals checked against one shared sample of sums."""
    gen = as_generator(rng)
    s = _sums_of_powers(d, q, samples, gen)
    out = []
    for a, b in intervals:
        if not (0.0 <= a <= b):
            raise ValidationError("need 0 <= a <= b")
        out.append(_ball_report(s, d, q, float(a), float(b), z))
    return out


# ---------------------------------------------------------------------------
# hypercube influences
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InfluenceVector(_Report):
    influences: np.ndarray = field(repr=False)
    d: int
    sigma: str

    @property
    def total(self) -> float:
        return float(self.influences.sum())

    @property
    def sum_squares(self) -> float:
        return float(np.sum(self.influences**2))

    @property
    def max(self) -> float:
        return float(self.influences.max())

    def to_dict(self) -> dict:
        return _jsonable({
            "d": self.d,
            "sigma": self.sigma,
            "influences": self.influences,
            "total": self.total,
            "sum_squares": self.sum_squares,
            "max": self.max,
        })


def hypercube_influences(sigma: SigmaSpec, d: int) -> InfluenceVector:
    """Exact ``Inf_i = E[(f(x) - f(x with bit i flipped))^2 / 4]`` by enumeration."""
    if d < 1 or d > MAX_INFLUENCE_D:
        raise ValidationError(f"d must lie in [1, {MAX_INFLUENCE_D}] for exact enumeration")
    masks = np.arange(2**d, dtype=np.uint64)
    f = sigma.values(masks, d)
    inf = np.empty(d)
    for i in range(d):
        g = f[(masks ^ np.uint64(1 << i)).astype(np.int64)]
        inf[i] = np.mean((f - g) ** 2) / 4.0
    return InfluenceVector(inf, d, sigma.describe())


@dataclass(frozen=True)
class HypercubeTVReport(_Report):
    n: int
    d: int
    sigma: str
    p: float
    ratio: float
    sum_sq_influence: float
    max_influence: float
    threshold_constant: float
    lipschitz_bound: float


def hypercube_tv_bound(n: int, sigma: SigmaSpec, d: int, *, lipschitz_r: float | None = None) -> HypercubeTVReport:
    """Raw ratio ``n^3 sum Inf_i^2 / (p^2 (1-p)^2)`` (no hidden constant).

    ``threshold_constant`` is ``max Inf_i * d / (p^2 log(1/p))``, the constant
    that would make the threshold influence scaling exact. ``lipschitz_bound``
    is ``1/(r^2 d)`` when ``lipschitz_r`` is given.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    vec = hypercube_influences(sigma, d)
    p = sigma.density(d)
    ssq = vec.sum_squares
    if ssq == 0.0:
        ratio = 0.0
    elif p in (0.0, 1.0):
        ratio = math.inf
    else:
        ratio = n**3 * ssq / (p * p * (1 - p) ** 2)
    thr = math.nan
    if sigma.kind == "threshold" and 0.0 < p < 1.0:
        thr = vec.max * d / (p * p * math.log(1.0 / p))
    lip = 1.0 / (lipschitz_r**2 * d) if lipschitz_r else math.nan
    return HypercubeTVReport(n, d, sigma.describe(), p, ratio, ssq, vec.max, thr, lip)


# ---------------------------------------------------------------------------
# low-degree advantage
# ---------------------------------------------------------------------------

@lru_cache(maxsize=16)
def _classes(vmax: int, max_edges: int) -> tuple:
    return tuple(enumerate_min_degree2(vmax, max_edges))


@dataclass(frozen=True)
class AdvantageReport(_Report):
    n: int
    params: dict
    D: int
    vmax: int
    value: float
    classes: int
    contributions: tuple = field(repr=False)


def low_degree_advantage_small(n: int, params: ModelParams, D: int, vmax: int) -> AdvantageReport:
    """``sum_H N_H(K_n) * (E[SW_H] / (p(1-p))^{|E(H)|/2})^2`` over min-degree-2 classes.

    Patterns with a degree-1 vertex have zero signed weight and are skipped.
    """
    if not params.is_linf:
        raise UnsupportedGeometryError("advantage sums need q = inf")
    if D < 0 or D > MAX_ADV_EDGES:
        raise ValidationError(f"D must lie in [0, {MAX_ADV_EDGES}]")
    if vmax < 1 or vmax > MAX_ADV_VERTICES:
        raise ValidationError(f"vmax must lie in [1, {MAX_ADV_VERTICES}]")
    p = params.p
    var = p * (1 - p)
    contribs = []
    for h in _classes(vmax, D) if D >= 3 and vmax >= 3 else ():
        count = placements_in_kn(h, n)
        if count == 0:
            continue
        sw = signed_weight_factorized(h, params)
        contribs.append((h.to_text(), count, sw, count * sw * sw / var**h.n_edges))
    total = math.fsum(c[3] for c in contribs)
    return AdvantageReport(n, params.describe(), D, vmax, total, len(contribs), tuple(contribs))
