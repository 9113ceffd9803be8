"""Torus points, circular and L_q distances, and the threshold calculus.

The torus is a product of ``d`` circles of circumference 2, so the circular
distance of two coordinates lies in ``[0, 1]`` and the coordinatewise
distances of two independent uniform points are i.i.d. ``Unif[0, 1]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np
from scipy import fft as sp_fft
from scipy.optimize import brentq

from .errors import ValidationError

INF = math.inf
DEFAULT_BINS = 2**16
MIN_BINS_PER_UNIT = 16
DEFAULT_ROOT_TOL = 1e-9
# beyond this the exact Irwin-Hall sum is replaced by a normal approximation
PHI_EXACT_MAX = 400


# ---------------------------------------------------------------------------
# q and points
# ---------------------------------------------------------------------------

def parse_q(q) -> float:
    """Normalise a q specification to a float, ``math.inf`` for L-infinity.

    Accepts numbers or the strings ``"inf"``, ``"infinity"``, ``"oo"``.
    """
    if isinstance(q, str):
        s = q.strip().lower()
        if s in ("inf", "infinity", "oo", "+inf"):
            return INF
        try:
            q = float(s)
        except ValueError as exc:
            raise ValidationError(f"cannot parse q={q!r}") from exc
    q = float(q)
    if math.isnan(q) or q < 1:
        raise ValidationError(f"q must be >= 1 or inf, got {q}")
    return q


def format_q(q: float) -> str:
    return "inf" if math.isinf(q) else repr(float(q))


@dataclass(frozen=True)
class TorusPoint:
    """A point of the d-dimensional torus, coordinates reduced mod 2."""

    coords: tuple

    def __init__(self, coords: Sequence[float]):
        arr = np.mod(np.asarray(coords, dtype=np.float64).ravel(), 2.0)
        if arr.size < 1:
            raise ValidationError("a torus point needs dimension d >= 1")
        object.__setattr__(self, "coords", tuple(float(c) for c in arr))

    @property
    def d(self) -> int:
        return len(self.coords)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords)


def circ_dist(a, b):
    """Shorter-arc distance on a circle of circumference 2.

    Works elementwise on arrays. Inputs are reduced mod 2 first.
    """
    diff = np.abs(np.mod(a, 2.0) - np.mod(b, 2.0))
    out = np.minimum(diff, 2.0 - diff)
    return float(out) if np.ndim(out) == 0 else out


def lq_dist(x, y, q) -> float:
    """L_q distance of coordinatewise circular distances (max for q = inf)."""
    xa = x.as_array() if isinstance(x, TorusPoint) else np.asarray(x, dtype=float)
    ya = y.as_array() if isinstance(y, TorusPoint) else np.asarray(y, dtype=float)
    if xa.shape != ya.shape:
        raise ValidationError(f"dimension mismatch: {xa.shape} vs {ya.shape}")
    q = parse_q(q)
    c = np.atleast_1d(circ_dist(xa, ya))
    if math.isinf(q):
        return float(c.max())
    return float(np.sum(c**q) ** (1.0 / q))



def connected(diff: np.ndarray, q, tau: float) -> np.ndarray:
    """Connection indicator for latent differences of shape ``(..., d)``.

    Matches the graph samplers: ``max |diff_i|_C <= tau`` for q = inf and
    ``sum |diff_i|_C^q <= tau^q`` otherwise.
    """
    c = np.abs(np.mod(diff, 2.0))
    np.minimum(c, 2.0 - c, out=c)
    if math.isinf(q):
        return c.max(axis=-1) <= tau
    return np.sum(c**q, axis=-1) <= tau**q

# ---------------------------------------------------------------------------
# CDF of sums of q-th powers of uniforms
# ---------------------------------------------------------------------------

def _bins_per_unit(d: int, bins: int) -> int:
    k = bins // d
    if k < MIN_BINS_PER_UNIT:
        raise ValidationError(
            f"grid resolution too coarse: {bins} bins over [0, {d}] gives {k} per unit "
            f"(minimum {MIN_BINS_PER_UNIT})"
        )
    return k


@lru_cache(maxsize=64)
def _single_pmf(q: float, k: int) -> np.ndarray:
    """Grid masses of U^q on {0, 1/k, ..., 1}, mean-preserving two-point split.

    Bin masses come from the exact CDF x^{1/q}, which sidesteps the density
    singularity at zero.
    """
    a = 1.0 / q
    edges = np.arange(k + 1) / k
    cdf = edges**a
    mass = np.diff(cdf)
    # first moment of each bin: a/(a+1) * (x_hi^{a+1} - x_lo^{a+1})
    mom = a / (a + 1.0) * np.diff(edges ** (a + 1.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        centroid = np.where(mass > 0, mom / mass, edges[:-1])
    w = np.clip((centroid - edges[:-1]) * k, 0.0, 1.0)
    pmf = np.zeros(k + 1)
    pmf[:-1] += mass * (1.0 - w)
    pmf[1:] += mass * w
    return pmf


@lru_cache(maxsize=32)
def _partial_sum_pmf(d: int, q: float, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Grid pmf of the sum of d-1 variables, and its cumulative sum."""
    if d == 1:
        pmf = np.ones(1)
    else:
        single = _single_pmf(q, k)
        length = (d - 1) * k + 1
        size = sp_fft.next_fast_len(length, real=True)
        spec = sp_fft.rfft(single, size) ** (d - 1)
        pmf = sp_fft.irfft(spec, size)[:length]
        np.clip(pmf, 0.0, None, out=pmf)
        pmf /= pmf.sum()
    pmf.setflags(write=False)
    cum = np.cumsum(pmf)
    cum.setflags(write=False)
    return pmf, cum


def sum_uq_cdf(d: int, q: float, t: float, bins: int = DEFAULT_BINS) -> float:
    """P[U_1^q + ... + U_d^q <= t] for i.i.d. ``Unif[0,1]`` variables.

    The first d-1 variables are convolved numerically on a uniform grid; the
    last one enters through its exact CDF ``clip(s, 0, 1)^{1/q}``.

    Parameters
    ----------
    d : int
        Number of summands, at least 1.
    q : float
        Power, at least 1 (``inf`` is rejected; use the closed form instead).
    t : float
        Evaluation point.
    bins : int
        Grid bins over ``[0, d]``; ``bins // d`` must be at least 16.
    """
    if d < 1:
        raise ValidationError("d must be >= 1")
    q = parse_q(q)
    if math.isinf(q):
        raise ValidationError("sum_uq_cdf needs finite q")
    if t <= 0:
        return 0.0
    if t >= d:
        return 1.0
    k = _bins_per_unit(d, bins)
    pmf, cum = _partial_sum_pmf(d, q, k)
    # grid points j/k with t - j/k >= 1 contribute fully
    j_full = math.floor((t - 1.0) * k)
    total = cum[min(j_full, len(cum) - 1)] if j_full >= 0 else 0.0
    lo = max(j_full + 1, 0)
    hi = min(math.floor(t * k), len(pmf) - 1)
    if hi >= lo:
        s = t - np.arange(lo, hi + 1) / k
        total += float(np.dot(pmf[lo : hi + 1], np.clip(s, 0.0, 1.0) ** (1.0 / q)))
    return float(min(max(total, 0.0), 1.0))


# ---------------------------------------------------------------------------
# phi
# ---------------------------------------------------------------------------

class PhiValue(NamedTuple):
    value: float
    exact: bool


@lru_cache(maxsize=None)
def _irwin_hall_cdf(m: int, x: Fraction) -> Fraction:
    if x <= 0:
        return Fraction(0)
    if x >= m:
        return Fraction(1)
    total = Fraction(0)
    for kk in range(math.floor(x) + 1):
        term = Fraction(math.comb(m, kk)) * (x - kk) ** m
        total += -term if kk % 2 else term
    return total / math.factorial(m)


@lru_cache(maxsize=None)
def phi_fraction(m: int) -> Fraction:
    """Exact P[U_1 + ... + U_m in [-1, 1]] for ``U_i ~ Unif[-1, 1]``.

    With ``S`` Irwin-Hall on ``[0, m]`` the event is
    ``S in [(m-1)/2, (m+1)/2]``.
    """
    if m < 0:
        raise ValidationError("phi needs m >= 0")
    if m == 0:
        return Fraction(1)
    lo = Fraction(m - 1, 2)
    hi = Fraction(m + 1, 2)
    return _irwin_hall_cdf(m, hi) - _irwin_hall_cdf(m, lo)


def phi_detail(m: int) -> PhiValue:
    """phi(m) with a flag telling whether the exact sum was used."""
    if m < 0:
        raise ValidationError("phi needs m >= 0")
    if m <= PHI_EXACT_MAX:
        return PhiValue(float(phi_fraction(m)), True)
    # sum of m Unif[-1,1] has variance m/3
    return PhiValue(math.erf(1.0 / math.sqrt(2.0 * m / 3.0)), False)


def phi(m: int) -> float:
    """P[U_1 + ... + U_m in [-1, 1]] for i.i.d. ``Unif[-1, 1]``; phi(0) = 1."""
    return phi_detail(m).value


# ---------------------------------------------------------------------------
# model parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelParams:
    """Complete L_q torus model parameterisation.

    ``tau`` is the connection radius (not its q-th power) and ``lam`` is
    ``1 - tau``, the complement rate of the q = inf model (NaN for finite q,
    where it has no meaning).
    """

    n: int
    d: int
    q: float
    p: float
    tau: float
    lam: float
    bins: int = field(default=DEFAULT_BINS, compare=False)

    @property
    def is_linf(self) -> bool:
        return math.isinf(self.q)

    def with_n(self, n: int) -> "ModelParams":
        return ModelParams(n, self.d, self.q, self.p, self.tau, self.lam, self.bins)

    def describe(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "q": format_q(self.q),
            "p": self.p,
            "tau": self.tau,
            "lambda": self.lam,
        }


def derive_tau_lambda(
    n: int,
    d: int,
    q,
    p: float,
    *,
    bins: int = DEFAULT_BINS,
    tol: float = DEFAULT_ROOT_TOL,
) -> ModelParams:
    """Solve for the radius giving marginal edge density ``p``.

    For q = inf the answer is closed form, ``tau = p^{1/d}``. For finite q
    the radius solves ``P[sum U_i^q <= tau^q] = p``.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    if d < 1:
        raise ValidationError("d must be >= 1")
    if not (0.0 < p <= 1.0):
        raise ValidationError(f"p must lie in (0, 1], got {p}")
    q = parse_q(q)
    if math.isinf(q):
        log_tau = math.log(p) / d
        tau = math.exp(log_tau)
        lam = -math.expm1(log_tau)
        return ModelParams(n, d, q, p, tau, lam, bins)
    if p == 1.0:
        return ModelParams(n, d, q, p, float(d) ** (1.0 / q), math.nan, bins)
    f = lambda s: sum_uq_cdf(d, q, s, bins) - p
    try:
        s = brentq(f, 0.0, float(d), xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    except ValueError as exc:
        raise ValidationError(f"could not bracket tau for p={p}, d={d}, q={q}") from exc
    if abs(f(s)) > tol:
        raise ValidationError(f"root finding missed tolerance: |CDF - p| = {abs(f(s)):.3e}")
    return ModelParams(n, d, q, p, s ** (1.0 / q), math.nan, bins)
