"""Command-line driver: ``torusrgg <subcommand> [flags]``.

Every subcommand accepts ``--config FILE`` (``key = value`` lines using the
flag names), ``--seed`` and ``--threads``; explicit flags override the file.
Exit codes: 0 success, 1 validation or usage error, 2 internal consistency
failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

from . import __version__
from ._accel import BACKEND, default_threads
from .errors import InternalConsistencyError, ValidationError
from .geometry import derive_tau_lambda, format_q, parse_q

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_INTERNAL = 2


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"config file {path} not found")
    for lineno, raw in enumerate(p.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = val
    return out


# fields that never change results and so stay out of output headers
_VOLATILE = {"threads", "config", "func", "command", "out"}


def _header(args) -> dict:
    cfg = {k: format_q(v) if isinstance(v, float) and math.isinf(v) else v
           for k, v in sorted(vars(args).items()) if k not in _VOLATILE}
    return {"tool": f"torusrgg {__version__}", "command": args.command, "config": json.dumps(cfg, sort_keys=True, default=str)}


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in str(text).replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from exc


def _str_list(text: str) -> list[str]:
    return [t for t in str(text).replace(",", " ").split() if t]


def _prob(text: str) -> float:
    v = float(text)
    if not (0.0 <= v <= 1.0):
        raise argparse.ArgumentTypeError("must lie in [0, 1]")
    return v


def _pos_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _q(text: str):
    try:
        return parse_q(text)
    except ValidationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


# ---------------------------------------------------------------------------
# helpers shared by subcommands
# ---------------------------------------------------------------------------

def _params(args, n=None):
    return derive_tau_lambda(n if n is not None else args.n, args.d, args.q, args.p)


def _emit(args, summary: str, payload: dict | None = None) -> None:
    print(f"{summary} seed={args.seed}")
    if payload is not None and getattr(args, "json", False):
        print(json.dumps(payload, indent=2, sort_keys=True, default=str))


def _write_json(path, payload: dict, args) -> None:
    doc = {"meta": _header(args), "result": payload}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")


def _load_graph(path):
    from .graph import Graph

    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"graph file {path} not found")
    if p.read_bytes()[:4] == b"TRGG":
        return Graph.read_binary(p)
    return Graph.read_edgelist(p)


def _rng(args, stream: int = 0):
    from .rng import RngSpec

    return RngSpec(int(args.seed), stream)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_sample(args) -> int:
    from .graph import sample_er, sample_hypercube_rag, sample_rgg, sample_rgg_1d_complement
    from .hypercube import parse_sigma

    gen = _rng(args).generator()
    if args.model == "er":
        g = sample_er(args.n, args.p, gen)
    elif args.model == "rgg":
        g = sample_rgg(_params(args), gen)[0]
    elif args.model == "complement1d":
        g = sample_rgg_1d_complement(args.n, args.lam, gen)[0]
    else:
        g = sample_hypercube_rag(args.n, args.d, parse_sigma(args.sigma), gen)[0]
    if args.out:
        if str(args.out).endswith((".txt", ".edges", ".el")):
            g.write_edgelist(args.out)
        else:
            g.write_binary(args.out)
    _emit(args, f"sample model={args.model} n={g.n} edges={g.n_edges} density={g.density():.6f}")
    return EXIT_OK


def cmd_expect(args) -> int:
    from .expansion import expected_signed_cycle_mean, expected_weight, signed_weight, unsigned_graph_asymptotic
    from .patterns import parse_pattern, pattern_facts, placements_in_kn

    h = parse_pattern(args.pattern)
    params = _params(args)
    w = expected_weight(h, params)
    sw = signed_weight(h, params)
    try:
        ua = unsigned_graph_asymptotic(h, params).value
    except ValidationError as exc:
        ua = f"n/a ({exc})"
    count = placements_in_kn(h, args.n)
    f = pattern_facts(h)
    payload = {
        "pattern": str(h),
        "params": params.describe(),
        "unsigned_exact": w.value,
        "unsigned_asymptotic": ua,
        "signed_exact": sw.value,
        "signed_asymptotic": sw.leading_term,
        "placements": count,
        "signed_count_mean": count * sw.value,
    }
    if f.numc == 1 and h.n_edges == h.n_vertices and len(f.blocks) == 1 and h.n_vertices in (3, 4):
        payload["signed_count_mean_refined"] = expected_signed_cycle_mean(h.n_vertices, args.n, params, variant="refined")
    for k, v in payload.items():
        if k != "params":
            print(f"{k}: {v}")
    if args.out:
        _write_json(args.out, payload, args)
    _emit(args, f"expect pattern={args.pattern} d={args.d} p={args.p} signed={sw.value:.6e}")
    return EXIT_OK


def cmd_signed_expect(args) -> int:
    from .expansion import signed_weight, signed_weight_mc
    from .patterns import parse_pattern

    h = parse_pattern(args.pattern)
    params = _params(args)
    if params.is_linf:
        r = signed_weight(h, params)
        payload = {"pattern": str(h), "params": params.describe(), "signed": r.value,
                   "log_signed": r.log_value, "leading_term": r.leading_term, "method": r.method}
    else:
        est, se = signed_weight_mc(h, params, args.tuples, _rng(args).generator())
        payload = {"pattern": str(h), "params": params.describe(), "signed": est,
                   "std_error": se, "method": "latent-tuple monte-carlo"}
    for k, v in payload.items():
        if k != "params":
            print(f"{k}: {v}")
    if args.out:
        _write_json(args.out, payload, args)
    _emit(args, f"signed-expect pattern={args.pattern} value={payload['signed']:.6e}")
    return EXIT_OK


def cmd_mc_verify(args) -> int:
    from .detection import predicted_mean
    from .expansion import signed_count_variance, signed_weight
    from .patterns import cycle, parse_pattern, placements_in_kn
    from .statistics import ModelSpec, StatSpec, mc_run, write_replicates_csv

    params = _params(args)
    name = args.pattern.upper()
    if name in ("C3", "C4"):
        stat = StatSpec(name, args.p)
        h = cycle(int(name[1]))
    else:
        h = parse_pattern(args.pattern)
        stat = StatSpec("pattern", args.p, h, args.tuples)
    model = ModelSpec.rgg(params) if args.model == "rgg" else ModelSpec.er(args.n, args.p)
    rep = mc_run(model, stat, args.reps, _rng(args), threads=args.threads, keep_values=bool(args.out))
    if args.model == "er":
        pred = 0.0
    elif name in ("C3", "C4"):
        pred = predicted_mean(name, args.n, params)
    else:
        pred = placements_in_kn(h, args.n) * signed_weight(h, params).value
    z_gap = (rep.mean - pred) / rep.std_error if rep.std_error > 0 else math.nan
    payload = dict(rep.summary(), predicted_mean=pred, z_gap=z_gap)
    if name in ("C3", "C4"):
        payload["predicted_variance"] = signed_count_variance(h, args.n, params, args.model.upper())
    for k in ("mean", "std_error", "predicted_mean", "z_gap", "variance"):
        print(f"{k}: {payload[k]}")
    if args.out:
        write_replicates_csv(rep, args.out, _header(args))
    _emit(args, f"mc-verify stat={name} reps={args.reps} z_gap={z_gap:.3f}")
    return EXIT_OK


def cmd_detect(args) -> int:
    from .detection import detect
    from .graph import sample_er, sample_rgg

    if args.graph:
        g = _load_graph(args.graph)
        params = _params(args, g.n)
    else:
        params = _params(args)
        gen = _rng(args).generator()
        g = sample_rgg(params, gen)[0] if args.model == "rgg" else sample_er(args.n, args.p, gen)
    out = detect(g, params, args.stat)
    print(f"decision: {out.decision}\nstatistic: {out.statistic!r}\nthreshold: {out.threshold!r}\npredicted_z: {out.predicted_z!r}")
    payload = {"decision": out.decision, "statistic": out.statistic, "threshold": out.threshold,
               "predicted_z": out.predicted_z, "stat": out.stat, "n": g.n}
    if args.out:
        _write_json(args.out, payload, args)
    _emit(args, f"detect stat={out.stat} n={g.n} decision={out.decision}", payload)
    return EXIT_OK


def cmd_power(args) -> int:
    from .detection import power_curve, write_power_csv

    rows = power_curve(args.n, args.p, args.d_grid, args.stat, args.reps, _rng(args), threads=args.threads)
    for r in rows:
        print(f"{r.stat} d={r.d} type1={r.type1:.3f} type2={r.type2:.3f} [{r.ci_lo:.3f}, {r.ci_hi:.3f}] z={r.predicted_z:.3f}")
    if args.out:
        write_power_csv(rows, args.out, _header(args))
    _emit(args, f"power n={args.n} p={args.p} points={len(rows)}")
    return EXIT_OK


def cmd_estimate_dim(args) -> int:
    from .detection import estimate_dimension, recovery_experiment, write_recovery_csv

    if args.true_d is not None:
        res = recovery_experiment(args.n, args.p, args.true_d, args.stat, args.d_min, args.d_max,
                                  args.samples, _rng(args), threads=args.threads)
        print(f"exact_rate: {res.exact_rate}\nhistogram: {res.histogram()}")
        if args.out:
            write_recovery_csv([res], args.out, _header(args))
        _emit(args, f"estimate-dim true_d={args.true_d} exact_rate={res.exact_rate:.3f}")
        return EXIT_OK
    if args.graph:
        g = _load_graph(args.graph)
        est = estimate_dimension(g, g.n, args.p, args.stat, args.d_min, args.d_max)
    elif args.value is not None:
        est = estimate_dimension(args.value, args.n, args.p, args.stat, args.d_min, args.d_max)
    else:
        raise ValidationError("estimate-dim needs --graph, --value or --true-d")
    print(f"estimated_d: {est}")
    payload = {"stat": args.stat, "estimated_d": est, "d_min": args.d_min, "d_max": args.d_max}
    if args.out:
        _write_json(args.out, payload, args)
    _emit(args, f"estimate-dim stat={args.stat} d_hat={est}", payload)
    return EXIT_OK


def cmd_phase_diagram(args) -> int:
    from .detection import phase_diagram

    regions = phase_diagram(args.model, args.out, points=args.points, n=args.n_log, header=_header(args))
    for r in regions:
        flag = " (conjecture)" if r.conjecture else ""
        print(f"{r.curve_id}: {r.name}{flag}")
    _emit(args, f"phase-diagram model={args.model} curves={len(regions)}")
    return EXIT_OK


def cmd_bounds(args) -> int:
    from . import bounds
    from .hypercube import parse_sigma

    kind = args.kind
    if kind == "kl":
        payload = bounds.kl_bound(args.n, _params(args)).to_dict()
    elif kind == "moment":
        payload = bounds.moment_table(_params(args), tuple(args.t_list)).to_dict()
    elif kind == "gamma":
        payload = bounds.gamma_moment_mc(_params(args), args.t, args.outer, args.inner, _rng(args).generator()).to_dict()
    elif kind == "small-ball":
        payload = bounds.small_ball_check(args.d, args.q, args.a, args.b, args.samples, _rng(args).generator()).to_dict()
    elif kind == "influence":
        payload = bounds.hypercube_influences(parse_sigma(args.sigma), args.d).to_dict()
    elif kind == "hypercube-tv":
        payload = bounds.hypercube_tv_bound(args.n, parse_sigma(args.sigma), args.d).to_dict()
    else:  # pragma: no cover - argparse restricts choices
        raise ValidationError(f"unknown bound kind {kind!r}")
    print(json.dumps(payload, sort_keys=True, default=str))
    if args.out:
        _write_json(args.out, payload, args)
    _emit(args, f"bounds kind={kind}")
    return EXIT_OK


def cmd_advantage(args) -> int:
    from .bounds import low_degree_advantage_small

    rep = low_degree_advantage_small(args.n, _params(args), args.D, args.vmax)
    print(f"advantage: {rep.value!r}\nclasses: {rep.classes}")
    if args.out:
        _write_json(args.out, rep.to_dict(), args)
    _emit(args, f"advantage n={args.n} D={args.D} value={rep.value:.6e}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    results = run_selftest()
    failed = [r for r in results if not r.ok]
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'} {r.name}: {r.detail} ({r.seconds:.2f}s)")
    _emit(args, f"selftest passed={len(results) - len(failed)}/{len(results)} backend={BACKEND}")
    if failed:
        raise InternalConsistencyError(f"{len(failed)} selftest checks failed")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--seed", type=int, help="master seed (random and printed when omitted)")
    p.add_argument("--threads", type=_pos_int, default=None, help="worker threads (results never depend on it)")
    p.add_argument("--out", help="output path (CSV or JSON depending on the subcommand)")
    p.add_argument("--json", action="store_true", help="also print the payload as JSON")


def _model_args(p, *, n=100, d=10, q="inf", p_default=0.5) -> None:
    p.add_argument("--n", type=_pos_int, default=n)
    p.add_argument("--d", type=_pos_int, default=d)
    p.add_argument("--q", type=_q, default=q, help="1 <= q or inf")
    p.add_argument("--p", type=_prob, default=p_default)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="torusrgg", description="Random geometric graphs on the L_q torus.")
    parser.add_argument("--version", action="version", version=f"torusrgg {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    s = sub.add_parser("sample", help="sample a graph")
    _common(s)
    _model_args(s)
    s.add_argument("--model", choices=("er", "rgg", "complement1d", "hypercube"), default="rgg")
    s.add_argument("--lam", type=float, default=0.1)
    s.add_argument("--sigma", default="threshold:0")
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("expect", help="exact and asymptotic weights of a pattern")
    _common(s)
    _model_args(s)
    s.add_argument("--pattern", required=True)
    s.set_defaults(func=cmd_expect)

    s = sub.add_parser("signed-expect", help="signed weight of a pattern (exact for q=inf, MC otherwise)")
    _common(s)
    _model_args(s)
    s.add_argument("--pattern", required=True)
    s.add_argument("--tuples", type=_pos_int, default=10**6)
    s.set_defaults(func=cmd_signed_expect)

    s = sub.add_parser("mc-verify", help="Monte Carlo signed counts against predictions")
    _common(s)
    _model_args(s)
    s.add_argument("--pattern", default="C3")
    s.add_argument("--model", choices=("rgg", "er"), default="rgg")
    s.add_argument("--reps", type=_pos_int, default=1000)
    s.add_argument("--tuples", type=_pos_int, default=20000)
    s.set_defaults(func=cmd_mc_verify)

    s = sub.add_parser("detect", help="signed-cycle test on a graph file or a fresh sample")
    _common(s)
    _model_args(s)
    s.add_argument("--graph")
    s.add_argument("--model", choices=("rgg", "er"), default="rgg")
    s.add_argument("--stat", choices=("C3", "C4"), default="C3")
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("power", help="Type I/II rates over a dimension grid")
    _common(s)
    s.add_argument("--n", type=_pos_int, default=512)
    s.add_argument("--p", type=_prob, default=0.5)
    s.add_argument("--d-grid", type=_int_list, default=[16, 32, 64, 128])
    s.add_argument("--stat", type=_str_list, default=["C3", "C4"])
    s.add_argument("--reps", type=_pos_int, default=500)
    s.set_defaults(func=cmd_power)

    s = sub.add_parser("estimate-dim", help="nearest-mean dimension estimate or recovery experiment")
    _common(s)
    s.add_argument("--n", type=_pos_int, default=1000)
    s.add_argument("--p", type=_prob, default=0.5)
    s.add_argument("--stat", choices=("C3", "C4"), default="C4")
    s.add_argument("--d-min", type=_pos_int, default=10)
    s.add_argument("--d-max", type=_pos_int, default=20)
    s.add_argument("--graph")
    s.add_argument("--value", type=float)
    s.add_argument("--true-d", type=_pos_int)
    s.add_argument("--samples", type=_pos_int, default=200)
    s.set_defaults(func=cmd_estimate_dim)

    s = sub.add_parser("phase-diagram", help="regime boundaries as CSV")
    _common(s)
    s.add_argument("--model", required=True, help="linf or lq")
    s.add_argument("--points", type=_pos_int, default=21)
    s.add_argument("--n-log", type=_pos_int, default=None, help="apply log factors at this n")
    s.set_defaults(func=cmd_phase_diagram)

    s = sub.add_parser("bounds", help="moment, KL, gamma, small-ball and hypercube evaluators")
    _common(s)
    _model_args(s, n=50)
    s.add_argument("--kind", required=True, choices=("kl", "moment", "gamma", "small-ball", "influence", "hypercube-tv"))
    s.add_argument("--t", type=_pos_int, default=2)
    s.add_argument("--t-list", type=_int_list, default=[1, 2, 3, 4])
    s.add_argument("--outer", type=_pos_int, default=2000)
    s.add_argument("--inner", type=_pos_int, default=1000)
    s.add_argument("--a", type=float, default=0.0)
    s.add_argument("--b", type=float, default=1.0)
    s.add_argument("--samples", type=_pos_int, default=10**6)
    s.add_argument("--sigma", default="dictator:0")
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("advantage", help="low-degree advantage over small patterns")
    _common(s)
    _model_args(s, n=20, d=30)
    s.add_argument("--D", type=int, default=4)
    s.add_argument("--vmax", type=int, default=4)
    s.set_defaults(func=cmd_advantage)

    s = sub.add_parser("selftest", help="run the invariant suite")
    _common(s)
    s.set_defaults(func=cmd_selftest)
    return parser


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        cfg = read_config(known.config)
        # the subcommand is the first token not starting with '-'
        cmd = next((a for a in argv if not a.startswith("-")), None)
        subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
        target = subparsers.choices.get(cmd)
        if target is None:
            raise UsageError("a subcommand is required")
        dests = {a.dest for a in target._actions}
        unknown = sorted(set(cfg) - dests)
        if unknown:
            raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
        target.set_defaults(**cfg)
    args = parser.parse_args(argv)
    if args.seed is None:
        from .rng import fresh_seed

        args.seed = fresh_seed()
    if args.threads is None:
        args.threads = default_threads()
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        start = time.perf_counter()
        code = args.func(args)
        print(f"# wall {time.perf_counter() - start:.2f}s threads={args.threads} backend={BACKEND}", file=sys.stderr)
        return code
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except InternalConsistencyError as exc:
        print(f"internal consistency failure: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
