"""Command-line harness: run joins, profile distance CDFs, evaluate cost
estimates and sweep parameter grids.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 internal invariant violation (for example an emitted pair beyond ``r``).
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import cost
from .em import EmConfig
from .formats import FORMATS, load_relation, save_relation
from .generate import GeneratorError, planted_hamming
from .joins import AsimParams, AsimTrace, OsimParams, asim_join, hp_repetitions, nested_loop_join
from .joins import osim_join_hp
from .lsh import ConcatFamily, LshFamily
from .oracle import JoinParams, brute_force_join, classify_counts, compute_cdf
from .points import METRICS, PointError
from .sink import CollisionStats, EmissionSink

log = logging.getLogger("emsj")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INVARIANT = 0, 1, 2, 3
ALGOS = ("nested", "asim", "osim", "oracle")
SIMILARITY_METRICS = ("jaccard", "angular")


class ConfigError(Exception):
    pass


class InvariantError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _reps(text):
    if text in ("auto", "hp"):
        return text
    return _positive_int(text)


def _join_params(args) -> JoinParams:
    """Radius and gap from either ``--r/--c`` or ``--similarity S CS``."""
    if args.similarity is not None:
        if args.metric not in SIMILARITY_METRICS:
            raise ConfigError("--similarity applies to jaccard and angular only")
        s, cs = args.similarity
        if not 0 <= cs < s <= 1:
            raise ConfigError("need 0 <= cs < s <= 1 for --similarity S CS")
        r, cr = 1.0 - s, 1.0 - cs
        if r == 0:
            raise ConfigError("similarity 1 leaves no room for a gray zone; use --r 0 with --c")
        return JoinParams(args.metric, r, cr / r)
    if args.r is None or args.c is None:
        raise ConfigError("give --r and --c (or --similarity)")
    if args.r < 0 or not args.c > 1:
        raise ConfigError("need r >= 0 and c > 1")
    return JoinParams(args.metric, args.r, args.c)


def _family(join: JoinParams, dim: int, args):
    """LSH family calibrated at the join radius (or at ``--family-r`` when r is 0)."""
    r = args.family_r if args.family_r is not None else join.r
    if r <= 0:
        raise ConfigError("r = 0 needs --family-r to calibrate the hash family")
    try:
        fam = LshFamily.for_metric(join.metric, r, join.c, dim=dim, w=args.w)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if args.concat > 1:
        return ConcatFamily(fam, args.concat)
    return fam


def _config(args) -> EmConfig:
    try:
        return EmConfig(args.M, args.B)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def run_join(R, S, join: JoinParams, algo: str, config: EmConfig, *, seed=None, reps="auto",
             dedupe=False, count_only=False, args=None, stream=None):
    """Run one algorithm; returns ``(sink, io_stats or None, collision stats or None)``."""
    if algo != "nested" and algo != "oracle" and seed is None:
        raise ConfigError(f"--seed is required for {algo}")
    N = len(R) + len(S)
    # nested loop and oracle report each pair once, so dedupe has nothing to do
    lsh = algo in ("asim", "osim")
    mode = "count-only" if count_only else ("dedupe" if dedupe and lsh else "raw")
    rng = np.random.default_rng(seed)
    sink_rng, run_rng = rng.spawn(2)
    sink = EmissionSink(mode, rng=sink_rng, stream=stream)
    if algo == "oracle":
        pairs = sorted(brute_force_join(R, S, join))
        if pairs:
            sink.emit([p[0] for p in pairs], [p[1] for p in pairs])
        return sink, None, None
    if algo == "nested":
        return sink, nested_loop_join(R, S, join, config, sink), None
    fam = _family(join, R.dim, args)
    if algo == "asim":
        base = fam.base if isinstance(fam, ConcatFamily) else fam
        outer = None if reps in ("auto", "hp") else reps
        try:
            params = AsimParams.build(base, config.M, N, outer=outer)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        check = not getattr(args, "no_memory_check", False)
        try:
            io_stats, stats = asim_join(R, S, join, params, config, sink, run_rng,
                                        trace=AsimTrace(keep_counters=False), check_memory=check)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return sink, io_stats, stats
    params = OsimParams.build(fam, N)
    n_reps = {"auto": 1, "hp": hp_repetitions(N)}.get(reps, reps)
    stats = CollisionStats(classify=getattr(args, "collisions", False))
    io_stats, stats = osim_join_hp(R, S, join, params, config, sink, run_rng, reps=n_reps, stats=stats)
    return sink, io_stats, stats


def _recall_precision(sink: EmissionSink, truth: set):
    emitted = sink.pairs()
    false = [p for p in emitted if p not in truth]
    if false:
        raise InvariantError(f"{len(false)} emitted pairs exceed distance r, e.g. {false[0]}")
    recall = len(emitted & truth) / len(truth) if truth else 1.0
    precision = 1.0 if not emitted else len(emitted & truth) / len(emitted)
    return recall, precision


def cmd_join(args) -> int:
    join = _join_params(args)
    R = load_relation(args.R, args.format, tag="R")
    S = load_relation(args.S, args.format, tag="S")
    # set universes may differ in size; vectors must agree on dimension
    if R.kind != S.kind or (R.kind != "sparse" and R.dim != S.dim):
        raise PointError("R and S must have the same point kind and dimension")
    config = _config(args)
    out = Path(args.out) if args.out else None
    stream = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        if not args.count_only:
            stream = open(out / "pairs.tsv", "w")
    try:
        sink, io_stats, stats = run_join(R, S, join, args.algo, config, seed=args.seed,
                                         reps=args.reps, dedupe=args.dedupe == "on",
                                         count_only=args.count_only, args=args, stream=stream)
    finally:
        if stream is not None:
            stream.close()
    lines = [f"algo={args.algo}", f"N={len(R) + len(S)}", f"M={config.M}", f"B={config.B}",
             f"metric={join.metric}", f"r={join.r:g}", f"c={join.c:g}",
             f"emissions={sink.total}"]
    if not args.count_only:
        lines.append(f"distinct={len(sink.pairs())}")
        lines.append(f"replication={sink.replication:.4f}")
    if io_stats is not None:
        lines += [f"reads={io_stats.reads}", f"writes={io_stats.writes}", f"ios={io_stats.total}"]
    if args.oracle_check:
        if args.count_only:
            raise ConfigError("--oracle-check needs emitted pairs; drop --count-only")
        truth = brute_force_join(R, S, join)
        recall, precision = _recall_precision(sink, truth)
        lines += [f"near_pairs={len(truth)}", f"recall={recall:.6f}", f"precision={precision:.6f}"]
        if truth:
            lines.append(f"emissions_per_near_pair={sink.total / len(truth):.4f}")
    report = "\n".join(lines) + "\n"
    sys.stdout.write(report)
    if out is not None:
        (out / "report.txt").write_text(report)
        if io_stats is not None:
            (out / "io.txt").write_text(io_stats.to_text(args.algo, config))
        if stats is not None:
            (out / "collisions.txt").write_text(stats.to_text())
    return EXIT_OK


def cmd_cdf(args) -> int:
    rel = load_relation(args.input, args.format)
    if len(rel) < 2:
        raise PointError("a CDF needs at least two points")
    rows = compute_cdf(rel, args.metric, max_points=args.sample, rng=args.seed,
                       pair_budget=args.pair_budget)
    similarity = args.metric in SIMILARITY_METRICS
    buf = io.StringIO()
    if similarity:
        buf.write("similarity\tfraction_at_least\n")
        rows = [(1.0 - d, f) for d, f in reversed(rows)]
    else:
        buf.write("distance\tfraction_at_most\n")
    for t, f in rows:
        buf.write(f"{t:.10g}\t{f:.10g}\n")
    _write_out(args.out, buf.getvalue())
    return EXIT_OK


def _estimate_inputs(args, M) -> cost.CostInputs:
    if args.R:
        join = _join_params(args)
        R = load_relation(args.R, args.format, tag="R")
        S = load_relation(args.S or args.R, args.format, tag="S")
        counts = classify_counts(R, S, join)
        fam = _family(join, R.dim, args)
        return cost.CostInputs(N=len(R) + len(S), near=counts["near"],
                               cnear=counts["near"] + counts["cnear"], M=M, B=args.B,
                               rho=fam.rho, p1=fam.p1, p2=fam.p2, mode=args.mode)
    missing = [f for f in ("N", "near", "cnear", "rho") if getattr(args, f) is None]
    if missing:
        raise ConfigError("missing inputs: " + ", ".join("--" + m for m in missing))
    return cost.CostInputs(N=args.N, near=args.near, cnear=args.cnear, M=M, B=args.B,
                           rho=args.rho, p1=args.p1, p2=args.p2, mode=args.mode)


def cmd_estimate(args) -> int:
    buf = io.StringIO()
    if args.published:
        for row in cost.PUBLISHED_ROWS:
            N = cost.MNIST_N if row.dataset == "MNIST" else None
            x = row.inputs(N, mode=args.mode)
            buf.write(cost.estimate_table(x, f"{row.dataset} {row.metric} r={row.r:g} cr={row.cr:g}"))
            buf.write(f"# published: standard-lsh>{row.standard_lsh:.3g} nested-loop={row.nested_loop:.3g} "
                      f"asim={row.asim:.3g}\n")
    else:
        if not args.M:
            raise ConfigError("give --M (one or more values) or --published")
        for M in args.M:
            try:
                x = _estimate_inputs(args, M)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            buf.write(cost.estimate_table(x))
    _write_out(args.out, buf.getvalue())
    return EXIT_OK


SWEEP_FIELDS = ("algo", "N", "M", "B", "seed", "near_pairs", "emissions", "distinct",
                "recall", "precision", "reads", "writes", "ios")


def cmd_sweep(args) -> int:
    if args.seed is None:
        raise ConfigError("--seed is required for sweeps")
    join = JoinParams("hamming", args.r, args.c)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_FIELDS, lineterminator="\n")
    writer.writeheader()
    for N in args.N:
        if N < 2:
            raise ConfigError("every N must be at least 2")
        n_r = N // 2
        n_near = int(round(args.near_frac * n_r))
        inst = planted_hamming(n_r, N - n_r, args.dim, int(args.r), n_near, rng=args.seed,
                               gap=args.gap if args.gap is not None else join.r)
        truth = brute_force_join(inst.R, inst.S, join)
        for M in args.M:
            for B in args.B:
                config = EmConfig(M, B) if 0 < B <= M else None
                if config is None:
                    raise ConfigError(f"need 0 < B <= M, got M={M}, B={B}")
                for algo in args.algo:
                    sink, io_stats, _ = run_join(inst.R, inst.S, join, algo, config, seed=args.seed,
                                                 reps=args.reps, args=args)
                    recall, precision = _recall_precision(sink, truth)
                    writer.writerow({
                        "algo": algo, "N": N, "M": M, "B": B, "seed": args.seed,
                        "near_pairs": len(truth), "emissions": sink.total,
                        "distinct": len(sink.pairs()), "recall": f"{recall:.6f}",
                        "precision": f"{precision:.6f}",
                        "reads": io_stats.reads if io_stats else "",
                        "writes": io_stats.writes if io_stats else "",
                        "ios": io_stats.total if io_stats else "",
                    })
    _write_out(args.out, buf.getvalue())
    return EXIT_OK


def cmd_generate(args) -> int:
    n_r = args.N // 2
    inst = planted_hamming(n_r, args.N - n_r, args.dim, args.r, args.near, rng=args.seed, gap=args.gap)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_relation(inst.R, out / "R.bits")
    save_relation(inst.S, out / "S.bits")
    sys.stdout.write(f"wrote {len(inst.R)} + {len(inst.S)} points with {args.near} planted near pairs to {out}\n")
    return EXIT_OK


def _write_out(path, text: str):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _add_join_flags(p, *, need_metric=True):
    p.add_argument("--metric", choices=METRICS, required=need_metric)
    p.add_argument("--r", type=float, help="join radius")
    p.add_argument("--c", type=float, help="approximation factor (> 1)")
    p.add_argument("--similarity", type=float, nargs=2, metavar=("S", "CS"),
                   help="similarity thresholds instead of --r/--c (jaccard, angular)")
    p.add_argument("--w", type=_positive_float, help="bucket width for p-stable hashing")
    p.add_argument("--concat", type=_positive_int, default=1,
                   help="concatenate this many hash functions per draw (osim)")
    p.add_argument("--family-r", type=_positive_float,
                   help="radius used to calibrate the hash family (defaults to --r)")
    p.add_argument("--format", choices=FORMATS, help="input format (default: from extension)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="emsj", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("join", help="run a join on two relation files")
    p.add_argument("--R", required=True, help="left relation file")
    p.add_argument("--S", required=True, help="right relation file")
    _add_join_flags(p)
    p.add_argument("--M", type=_positive_int, required=True, help="memory size in points")
    p.add_argument("--B", type=_positive_int, required=True, help="block size in points")
    p.add_argument("--algo", choices=ALGOS, default="nested")
    p.add_argument("--reps", type=_reps, default="auto",
                   help="asim: outer rounds (auto = 3 ceil(log N)); osim: repetitions (hp = ceil(log^1.5 N))")
    p.add_argument("--dedupe", choices=("on", "off"), default="off")
    p.add_argument("--seed", type=int)
    p.add_argument("--count-only", action="store_true")
    p.add_argument("--oracle-check", action="store_true")
    p.add_argument("--collisions", action="store_true", help="classify pairs per recursion level (osim)")
    p.add_argument("--no-memory-check", action="store_true",
                   help="run asim even when M < 18 log N + 3B")
    p.add_argument("--out", help="directory for pairs.tsv, report.txt, io.txt and collisions.txt")
    p.set_defaults(func=cmd_join)

    p = sub.add_parser("cdf", help="pairwise distance (or similarity) distribution")
    p.add_argument("--input", required=True)
    p.add_argument("--metric", choices=METRICS, required=True)
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--sample", type=_positive_int, default=10_000, help="points sampled from large inputs")
    p.add_argument("--pair-budget", type=_positive_int, default=50_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_cdf)

    p = sub.add_parser("estimate", help="closed-form I/O estimates")
    p.add_argument("--published", action="store_true", help="evaluate the published comparison rows")
    p.add_argument("--N", type=_positive_float)
    p.add_argument("--near", type=float)
    p.add_argument("--cnear", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--p1", type=float)
    p.add_argument("--p2", type=float)
    p.add_argument("--M", type=_positive_float, nargs="+")
    p.add_argument("--B", type=_positive_float, default=1.0)
    p.add_argument("--mode", choices=cost.COST_MODES, default="practical")
    p.add_argument("--R", help="measure near/cnear from data instead")
    p.add_argument("--S")
    _add_join_flags(p, need_metric=False)
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sweep", help="grid of planted Hamming runs, CSV output")
    p.add_argument("--N", type=_positive_int, nargs="+", required=True)
    p.add_argument("--M", type=_positive_int, nargs="+", required=True)
    p.add_argument("--B", type=_positive_int, nargs="+", required=True)
    p.add_argument("--algo", choices=ALGOS, nargs="+", default=["nested"])
    p.add_argument("--dim", type=_positive_int, default=64)
    p.add_argument("--r", type=float, default=4)
    p.add_argument("--c", type=float, default=4)
    p.add_argument("--gap", type=float, help="background pairs end up farther than this (default r)")
    p.add_argument("--near-frac", type=float, default=0.05)
    p.add_argument("--reps", type=_reps, default="auto")
    p.add_argument("--concat", type=_positive_int, default=1)
    p.add_argument("--w", type=_positive_float)
    p.add_argument("--family-r", type=_positive_float)
    p.add_argument("--no-memory-check", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("generate", help="write a planted Hamming instance as R.bits and S.bits")
    p.add_argument("--N", type=_positive_int, required=True)
    p.add_argument("--dim", type=_positive_int, default=64)
    p.add_argument("--r", type=int, default=4)
    p.add_argument("--near", type=int, default=10)
    p.add_argument("--gap", type=float)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)
    return parser


def _setup_logging():
    level = os.environ.get("EMSJ_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"emsj: configuration error: {exc}\n")
        return EXIT_CONFIG
    except (PointError, GeneratorError, OSError) as exc:
        sys.stderr.write(f"emsj: data error: {exc}\n")
        return EXIT_DATA
    except InvariantError as exc:
        sys.stderr.write(f"emsj: invariant violated: {exc}\n")
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
