"""Signed-cycle tests against G(n, p), power experiments, dimension
estimation and regime boundaries.

The test compares a signed cycle count with half of its predicted mean under
the L-infinity torus model. Predicted means are exact (see
:mod:`torusrgg.expansion`); predicted standard deviations combine the exact
null variance with the exact overlap variance under the geometric model.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.stats import binomtest

from .errors import ValidationError
from .expansion import (
    _stat_cycle,
    er_variance,
    expected_signed_cycle_mean,
    params_for,
    signed_count_variance,
)
from .geometry import ModelParams, derive_tau_lambda
from .graph import Graph, sample_er, sample_rgg
from .patterns import cycle
from .polymer import check_guard
from .rng import RngSpec
from .statistics import run_replicates, signed_4cycle_count, signed_triangle_count, subgraph_counts

DEFAULT_Z_CUTOFF = 3.0
TIE_RTOL = 1e-12


# ---------------------------------------------------------------------------
# predictions
# ---------------------------------------------------------------------------

def _stat_name(stat) -> str:
    return f"C{_stat_cycle(stat)}"


@lru_cache(maxsize=4096)
def _mean_cached(m: int, n: int, params: ModelParams, variant: str) -> float:
    if params.p == 1.0:
        # both models are the complete graph, whose centered edges all vanish
        return 0.0
    return expected_signed_cycle_mean(m, n, params, variant=variant)


def predicted_mean(stat, n: int, params: ModelParams, *, variant: str = "exact") -> float:
    """Predicted E[SC_{C_m}] under the L-infinity model at size ``n``."""
    if not params.is_linf:
        raise ValidationError("predicted means need q = inf")
    return _mean_cached(_stat_cycle(stat), int(n), params.with_n(1), variant)


@lru_cache(maxsize=4096)
def _rgg_var_cached(m: int, n: int, params: ModelParams) -> float:
    if params.p == 1.0:
        return 0.0
    return signed_count_variance(cycle(m), n, params, "RGG")


def predicted_sd(stat, n: int, params: ModelParams) -> float:
    """``sqrt(Var_ER + Var_RGG)`` for the signed cycle count."""
    m = _stat_cycle(stat)
    var = er_variance(m, n, params.p) + _rgg_var_cached(m, int(n), params.with_n(1))
    return math.sqrt(max(var, 0.0))


def predicted_success(stat, n: int, params: ModelParams, *, cutoff: float = DEFAULT_Z_CUTOFF) -> tuple[float, bool]:
    """Predicted z-score ``|mean| / sqrt(Var_ER + Var_RGG)`` and whether it clears ``cutoff``."""
    mean = predicted_mean(stat, n, params)
    sd = predicted_sd(stat, n, params)
    if sd == 0.0:
        z = math.inf if mean != 0.0 else 0.0
    else:
        z = abs(mean) / sd
    return z, z >= cutoff


# ---------------------------------------------------------------------------
# the test
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestOutcome:
    """Decision of the signed-cycle test.

    ``decision`` is ``"H1"`` (geometric) iff the statistic is on the far side
    of ``threshold``, boundary included. The far side is ``>=`` for a
    nonnegative predicted mean and ``<=`` for a negative one.
    """

    __test__ = False

    decision: str
    statistic: float
    threshold: float
    predicted_z: float
    stat: str = "C3"

    @property
    def is_h1(self) -> bool:
        return self.decision == "H1"


def decide(statistic: float, mean: float) -> tuple[str, float]:
    """Decision rule used by :func:`detect`; returns ``(decision, threshold)``."""
    threshold = 0.5 * mean
    if mean >= 0:
        h1 = statistic >= threshold
    else:
        h1 = statistic <= threshold
    return ("H1" if h1 else "H0"), threshold


def _statistic(g: Graph, stat: str, p: float, counts=None) -> float:
    if stat == "C3":
        return signed_triangle_count(g, p, counts)
    return signed_4cycle_count(g, p, counts)


def detect(g: Graph, params: ModelParams, stat="C3") -> TestOutcome:
    """Signed-cycle test of G(n, p) against the L-infinity torus model.

    ``params.n`` is ignored; the graph's own size is used.
    """
    name = _stat_name(stat)
    if not params.is_linf:
        raise ValidationError("detect needs q = inf for an exact threshold")
    if params.p < 1.0:
        check_guard(cycle(int(name[1])), params.lam, "exact")
    mean = predicted_mean(name, g.n, params)
    z, _ = predicted_success(name, g.n, params)
    value = _statistic(g, name, params.p)
    decision, threshold = decide(value, mean)
    return TestOutcome(decision, value, threshold, z, name)


# ---------------------------------------------------------------------------
# power curves
# ---------------------------------------------------------------------------

def wilson_interval(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    ci = binomtest(int(successes), int(trials)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class PowerRow:
    stat: str
    d: int
    type1: float
    type2: float
    ci_lo: float
    ci_hi: float
    type1_ci_lo: float
    type1_ci_hi: float
    predicted_z: float
    replicates: int

    @property
    def power(self) -> float:
        return 1.0 - self.type2

    @property
    def wilson_radius(self) -> float:
        return 0.5 * (self.ci_hi - self.ci_lo)


POWER_COLUMNS = ("stat", "d", "type1", "type2", "ci_lo", "ci_hi", "type1_ci_lo", "type1_ci_hi", "predicted_z", "replicates")


def _stat_values(g: Graph, stats: tuple, p: float) -> np.ndarray:
    counts = subgraph_counts(g)
    return np.array([_statistic(g, s, p, counts) for s in stats])


def power_curve(
    n: int,
    p: float,
    d_grid,
    stat="C3",
    replicates: int = 500,
    rng: RngSpec | int = 0,
    *,
    threads: int | None = None,
) -> list[PowerRow]:
    """Empirical Type I and Type II rates of the test over a dimension grid.

    ``stat`` may be one name or a sequence; all statistics are evaluated on
    the same sampled graphs. Null graphs are drawn once (stream 0) and
    reused for every grid point, since only the threshold depends on d.
    Geometric graphs for grid point i use stream i + 1. ``ci_lo``/``ci_hi``
    bound the Type II rate; ``type1_ci_*`` bound the Type I rate.
    """
    d_grid = [int(d) for d in d_grid]
    if not d_grid:
        raise ValidationError("d_grid must be nonempty")
    if replicates < 1:
        raise ValidationError("replicates must be >= 1")
    stats = (stat,) if isinstance(stat, str) else tuple(stat)
    stats = tuple(_stat_name(s) for s in stats)
    spec = rng if isinstance(rng, RngSpec) else RngSpec(int(rng))
    k = len(stats)

    def run(draw, sub: RngSpec) -> np.ndarray:
        # one pass over graphs, all statistics at once
        out = np.empty((replicates, k))

        def one(gen, r):
            out[r] = _stat_values(draw(gen), stats, p)
            return 0.0

        run_replicates(one, replicates, sub, threads)
        return out

    null_vals = run(lambda gen: sample_er(n, p, gen), RngSpec(spec.master_seed, _stream(spec, 0)))
    rows = []
    for i, d in enumerate(d_grid):
        params = derive_tau_lambda(n, d, math.inf, p)
        alt_vals = run(lambda gen, P=params: sample_rgg(P, gen)[0], RngSpec(spec.master_seed, _stream(spec, i + 1)))
        for j, s in enumerate(stats):
            mean = predicted_mean(s, n, params)
            z = predicted_success(s, n, params)[0]
            h1_null = sum(decide(v, mean)[0] == "H1" for v in null_vals[:, j])
            h0_alt = sum(decide(v, mean)[0] == "H0" for v in alt_vals[:, j])
            lo, hi = wilson_interval(h0_alt, replicates)
            lo1, hi1 = wilson_interval(h1_null, replicates)
            rows.append(PowerRow(s, d, h1_null / replicates, h0_alt / replicates, lo, hi, lo1, hi1, z, replicates))
    return rows


def _stream(spec: RngSpec, i: int) -> int:
    # distinct streams per grid point under one master seed
    return spec.stream_index * 1_000_003 + i


def write_power_csv(rows: list[PowerRow], path, header: dict | None = None) -> None:
    _write_csv(path, POWER_COLUMNS, ([getattr(r, c) for c in POWER_COLUMNS] for r in rows), header)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path, columns, rows, header: dict | None) -> None:
    with Path(path).open("w", newline="") as fh:
        for key, val in (header or {}).items():
            fh.write(f"# {key}: {val}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


# ---------------------------------------------------------------------------
# dimension estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DimensionGrid:
    """Candidate dimensions and their predicted means at fixed ``(n, p)``."""

    stat: str
    n: int
    p: float
    dims: np.ndarray
    means: np.ndarray


def mean_grid(stat, n: int, p: float, d_min: int, d_max: int, *, variant: str = "exact") -> DimensionGrid:
    """Predicted means over ``d_min..d_max``, checked to be strictly monotone."""
    name = _stat_name(stat)
    if d_min < 1 or d_max < d_min:
        raise ValidationError("need 1 <= d_min <= d_max")
    if not (0.0 < p < 1.0):
        raise ValidationError("dimension estimation needs p in (0, 1)")
    lam_min = derive_tau_lambda(n, d_min, math.inf, p).lam
    try:
        check_guard(cycle(int(name[1])), lam_min, "exact")
    except ValidationError as exc:
        raise ValidationError(f"d_min={d_min} is too small for exact means: {exc}") from exc
    dims = np.arange(d_min, d_max + 1)
    means = np.array([predicted_mean(name, n, derive_tau_lambda(n, int(d), math.inf, p), variant=variant) for d in dims])
    if len(dims) > 1:
        diffs = np.diff(means)
        if not (np.all(diffs < 0) or np.all(diffs > 0)):
            raise ValidationError(
                f"predicted {name} means are not strictly monotone on [{d_min}, {d_max}]; "
                "try the other statistic or a narrower range"
            )
    return DimensionGrid(name, n, p, dims, means)


def nearest_dimension(value: float, grid: DimensionGrid) -> int:
    """Grid dimension whose mean is nearest to ``value``; ties go to the smaller d."""
    dist = np.abs(value - grid.means)
    best = dist.min()
    tol = TIE_RTOL * max(abs(value), float(np.abs(grid.means).max()), 1.0)
    return int(grid.dims[np.flatnonzero(dist <= best + tol)[0]])


def estimate_dimension(g, n: int, p: float, stat="C4", d_min: int = 10, d_max: int = 20,
                       *, grid: DimensionGrid | None = None) -> int:
    """Nearest-mean estimate of the latent dimension.

    ``g`` is a :class:`Graph` or an already computed statistic value.
    """
    name = _stat_name(stat)
    if grid is None:
        grid = mean_grid(name, n, p, d_min, d_max)
    if isinstance(g, Graph):
        if g.n != n:
            raise ValidationError(f"graph has {g.n} vertices, expected {n}")
        value = _statistic(g, name, p)
    else:
        value = float(g)
    return nearest_dimension(value, grid)


def gap_z(stat, n: int, p: float, d: int) -> float:
    """``(M_d - M_{d+1}) / sqrt(Var_d + Var_{d+1})`` with exact RGG variances."""
    a = params_for(n, d, p)
    b = params_for(n, d + 1, p)
    gap = abs(predicted_mean(stat, n, a) - predicted_mean(stat, n, b))
    va = _rgg_var_cached(_stat_cycle(stat), n, a.with_n(1))
    vb = _rgg_var_cached(_stat_cycle(stat), n, b.with_n(1))
    return gap / math.sqrt(va + vb)


def min_gap_z(stat, n: int, p: float, d_min: int, d_max: int) -> float:
    return min(gap_z(stat, n, p, d) for d in range(d_min, d_max))


def choose_n_for_gap(stat, p: float, d_min: int, d_max: int, z_target: float = 6.0,
                     n_lo: int = 16, n_hi: int = 1 << 14) -> int:
    """Smallest n (by bisection) whose smallest consecutive gap reaches ``z_target``."""
    if min_gap_z(stat, n_hi, p, d_min, d_max) < z_target:
        raise ValidationError(f"no n <= {n_hi} reaches a gap of {z_target} SDs")
    lo, hi = n_lo, n_hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if min_gap_z(stat, mid, p, d_min, d_max) >= z_target:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class RecoveryResult:
    stat: str
    true_d: int
    n: int
    p: float
    estimates: np.ndarray = field(repr=False)

    @property
    def exact_rate(self) -> float:
        return float(np.mean(self.estimates == self.true_d))

    def histogram(self) -> dict:
        vals, counts = np.unique(self.estimates, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, counts)}


def recovery_experiment(n: int, p: float, true_d: int, stat="C4", d_min: int = 10, d_max: int = 20,
                        samples: int = 200, rng: RngSpec | int = 0, *, threads: int | None = None) -> RecoveryResult:
    """Sample geometric graphs at ``true_d`` and estimate d for each."""
    name = _stat_name(stat)
    grid = mean_grid(name, n, p, d_min, d_max)
    params = derive_tau_lambda(n, true_d, math.inf, p)
    spec = rng if isinstance(rng, RngSpec) else RngSpec(int(rng))

    def one(gen, r):
        g = sample_rgg(params, gen)[0]
        return nearest_dimension(_statistic(g, name, p), grid)

    est = run_replicates(one, samples, spec, threads).astype(np.int64)
    return RecoveryResult(name, true_d, n, p, est)


def write_recovery_csv(results: list[RecoveryResult], path, header: dict | None = None) -> None:
    rows = []
    for res in results:
        for est, count in res.histogram().items():
            rows.append((res.stat, res.true_d, est, count))
    _write_csv(path, ("stat", "true_d", "est_d", "count"), rows, header)


# ---------------------------------------------------------------------------
# phase diagrams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseRegion:
    """One regime boundary as exponent pairs ``(x, y)``.

    For the L-infinity diagram ``x = log_n d`` and ``y = log_n(np)``; for the
    L_q diagram at p = 1/2, ``x = log_n d`` and ``y = log_n q``.
    """

    name: str
    curve_id: str
    points: tuple
    provenance: str
    conjecture: bool = False

    def xs(self) -> np.ndarray:
        return np.array([pt[0] for pt in self.points])

    def ys(self) -> np.ndarray:
        return np.array([pt[1] for pt in self.points])


PHASE_COLUMNS = ("region", "curve_id", "x", "y", "provenance", "conjecture")


def _curve(fn, lo: float, hi: float, k: int) -> tuple:
    return tuple((float(fn(y)), float(y)) for y in np.linspace(lo, hi, k))


def _linf_regions(k: int, n: int | None) -> list[PhaseRegion]:
    shift = math.log(math.log(n)) / math.log(n) if n and n > 2 else 0.0
    return [
        PhaseRegion("I: signed triangle succeeds", "signed-triangle", _curve(lambda y: 0.75 * y, 0, 1, k),
                    "signed triangle test succeeds iff d = o~((np)^{3/4})"),
        PhaseRegion("I+II: signed 4-cycle succeeds", "signed-4-cycle", _curve(lambda y: y, 0, 1, k),
                    "signed 4-cycle test succeeds iff d = o~(np); low-degree tests fail for d = (np)^{1+o(1)} and above"),
        PhaseRegion("IV: information-theoretically indistinguishable", "information",
                    _curve(lambda y: max(y + 0.5, 1.0), 0, 1, k),
                    "TV to G(n,p) vanishes for d = w~(max(n^{3/2} p, n))"),
        PhaseRegion("entropy test succeeds", "entropy", _curve(lambda y: y - shift, 0, 1, k),
                    "TV to G(n,p) tends to 1 for d = o(np / log n)"
                    + ("" if shift == 0.0 else f"; log factor applied at n={n}")),
    ]


def _lq_regions(k: int, n: int | None) -> list[PhaseRegion]:
    # small-q pieces live where q <= d (y <= x); large-q pieces where q >= d
    shift = math.log(math.log(n)) / math.log(n) if n and n > 2 else 0.0

    def line_sum(c, a):
        # x + a*y = c, restricted to y <= x
        x_lo = c / (1 + a)
        return tuple((float(x), float((c - x) / a)) for x in np.linspace(x_lo, c, k))

    def vertical(x0, y_hi):
        return tuple((float(x0), float(y)) for y in np.linspace(x0, y_hi, k))

    y_top = 4.0
    return [
        PhaseRegion("IV: indistinguishable (q small)", "lq-tv-small-q", line_sum(3.0, 1.0),
                    "TV to G(n,1/2) vanishes for dq = w~(n^3) when q = o(d / log d)"),
        PhaseRegion("IV: indistinguishable (q large)", "lq-tv-large-q", vertical(1.5, y_top),
                    "TV to G(n,1/2) vanishes for d^2 = w~(n^3) when q = Omega(d / log d)"),
        PhaseRegion("entropy test succeeds", "entropy", tuple((1.0 - shift, float(y)) for y in np.linspace(0, y_top, k)),
                    "TV to G(n,p) tends to 1 for d = o(np / log n), any q"),
        PhaseRegion("I+II: signed 4-cycle succeeds (q small)", "conj-c4-small-q", line_sum(2.0, 1.0),
                    "conjectured: signed 4-cycle test succeeds for dq = o(n^2) when q = o(d / log d)", True),
        PhaseRegion("I+II: signed 4-cycle succeeds (q large)", "conj-c4-large-q", vertical(1.0, y_top),
                    "conjectured: signed 4-cycle test succeeds for d = o~(n) when q = Omega(d / log d)", True),
        PhaseRegion("I+III: signed triangle succeeds (q small)", "conj-c3-small-q", line_sum(3.0, 3.0),
                    "conjectured: signed triangle test succeeds iff dq^3 = o(n^3) when q = o(d / log d)", True),
        PhaseRegion("I+III: signed triangle succeeds (q large)", "conj-c3-large-q", vertical(0.75, y_top),
                    "conjectured: signed triangle test succeeds for d = o~(n^{3/4}) when q = Omega(d / log d)", True),
    ]


def phase_diagram(model: str, out=None, *, points: int = 21, n: int | None = None,
                  header: dict | None = None) -> list[PhaseRegion]:
    """Regime boundaries for ``model`` in ``{"linf", "lq"}``; optionally written as CSV.

    Exponents drop polylog factors unless ``n`` is given, in which case the
    entropy line carries its ``log n`` factor.
    """
    tag = (model or "").strip().lower()
    if tag in ("linf", "linfty", "inf", "l_inf"):
        regions = _linf_regions(points, n)
    elif tag in ("lq", "l_q", "finite-q"):
        regions = _lq_regions(points, n)
    else:
        raise ValidationError(f"unknown phase-diagram model {model!r}; use linf or lq")
    if out is not None:
        rows = ((r.name, r.curve_id, x, y, r.provenance, int(r.conjecture)) for r in regions for x, y in r.points)
        _write_csv(out, PHASE_COLUMNS, rows, header)
    return regions
