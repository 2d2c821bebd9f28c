"""Command-line surface: data generation, synthesis, evaluation, sweeps.

Every artifact-writing subcommand drops a ``<out>.manifest.txt`` sidecar
echoing the resolved configuration and per-phase wall-clock timings, and
text reports embed the same manifest block. Timing lines carry a ``time_``
key prefix; everything else in a report is byte-reproducible given the
same inputs and seed.
"""

import argparse
import json
import sys
import time
from contextlib import contextmanager

import numpy as np

from . import __version__
from .asymptotics import asymptotics_report, linear_model, uniform_model
from .datagen import GmmSpec, gen_gmm, gen_ring, gen_swiss_roll
from .dataio import PointSet, default_columns, read_marginals_csv, read_points_csv, write_points_csv
from .errors import BadSpec, KnnRexError
from .estimators import EstimatorConfig, synth_bias_corrected
from .evaluation import hellinger, icv_run, make_binning
from .knn import build_knn
from .whiten import whiten_apply, whiten_fit, whiten_invert

METHOD_FLAGS = {
    "knn-rex": "knn_rex",
    "fixed": "fixed_gaussian",
    "bmp": "bmp",
    "km": "km_rex",
}


class _Phases:
    """Wall-clock bookkeeping; phase names appear as time_<name> keys."""

    def __init__(self):
        self.seconds = {}
        self._t0 = time.perf_counter()

    @contextmanager
    def measure(self, name):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.seconds[name] = self.seconds.get(name, 0.0) + (time.perf_counter() - start)

    def total(self):
        return time.perf_counter() - self._t0


def _manifest_lines(subcommand, config, phases=None):
    lines = [f"subcommand: {subcommand}"]
    for key in sorted(config):
        lines.append(f"{key}: {config[key]}")
    if phases is not None:
        for name in sorted(phases.seconds):
            lines.append(f"time_{name}: {phases.seconds[name]:.6f}")
        lines.append(f"time_total: {phases.total():.6f}")
    return lines


def _write_manifest(out_path, lines):
    with open(f"{out_path}.manifest.txt", "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


def _emit_report(args, sections):
    text = "\n".join("\n".join(block) for block in sections) + "\n"
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


def _int_list(text):
    return [int(v) for v in text.split(",") if v != ""]


def _float_list(text):
    return [float(v) for v in text.split(",") if v != ""]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_gen_data(args):
    phases = _Phases()
    rng = np.random.default_rng(args.seed)
    with phases.measure("generate"):
        if args.dataset == "swissroll":
            values = gen_swiss_roll(args.n, rng)
        elif args.dataset == "ring":
            values = gen_ring(args.n, rng)
        else:
            if not args.spec:
                raise KnnRexError("gmm requires --spec with weights/means/covs (JSON)")
            try:
                with open(args.spec, "r", encoding="utf-8") as handle:
                    raw = json.load(handle)
                spec = GmmSpec(
                    weights=np.asarray(raw["weights"]),
                    means=np.asarray(raw["means"]),
                    covs=np.asarray(raw["covs"]),
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise BadSpec(f"{args.spec}: malformed mixture description: {exc}") from None
            values = gen_gmm(spec, args.n, rng)
    with phases.measure("write"):
        write_points_csv(args.out, PointSet(values, default_columns(values.shape[1])))
    config = {"dataset": args.dataset, "n": args.n, "seed": args.seed, "out": args.out}
    _write_manifest(args.out, _manifest_lines("gen-data", config, phases))
    return 0


def _resolve_config(args):
    cfg = EstimatorConfig(
        method=METHOD_FLAGS[args.method],
        k=args.k,
        m=args.m,
        h=args.h,
        L=args.L,
        seed=args.seed,
        stall_limit=args.stall_limit,
        ridge=args.ridge,
    )
    cfg.validate()
    return cfg


def cmd_synthesize(args):
    from .estimators import km_fit, km_synth, synth_bmp, synth_fixed_gaussian, synth_knn_rex

    phases = _Phases()
    cfg = _resolve_config(args)
    rng = np.random.default_rng(cfg.seed)
    with phases.measure("read"):
        train = read_points_csv(getattr(args, "in"))
    with phases.measure("whiten"):
        transform = whiten_fit(train.values)
        train_w = whiten_apply(transform, train.values)
    index = None
    if cfg.method in ("knn_rex", "bmp") and not (cfg.method == "knn_rex" and cfg.m == 1):
        with phases.measure("index"):
            index = build_knn(train_w, cfg.k)
    with phases.measure("synthesis"):
        if cfg.method == "knn_rex":
            synth_w = synth_knn_rex(train_w, cfg.k, cfg.m, args.l, rng, index=index)
        elif cfg.method == "fixed_gaussian":
            synth_w = synth_fixed_gaussian(train_w, cfg.h, args.l, rng)
        elif cfg.method == "bmp":
            synth_w = synth_bmp(train_w, cfg.k, cfg.h, args.l, rng, index=index)
        else:
            model = km_fit(train_w, cfg.L, cfg.m, rng, stall_limit=cfg.stall_limit, ridge=cfg.ridge)
            synth_w = km_synth(model, train_w, args.l, rng)
        synth = whiten_invert(transform, synth_w)
    with phases.measure("write"):
        write_points_csv(args.out, PointSet(synth, train.columns))
    config = dict(cfg.echo(), l=args.l, **{"in": getattr(args, "in"), "out": args.out})
    _write_manifest(args.out, _manifest_lines("synthesize", config, phases))
    return 0


def cmd_synthesize_corrected(args):
    phases = _Phases()
    rng = np.random.default_rng(args.seed)
    with phases.measure("read"):
        train = read_points_csv(getattr(args, "in"))
        marginals = read_marginals_csv(args.marginals, args.total)
    with phases.measure("synthesis"):
        synth = synth_bias_corrected(
            train.values,
            marginals,
            args.k,
            args.m,
            rng,
            columns=train.columns,
            round_integers=args.round_integers,
        )
    with phases.measure("write"):
        write_points_csv(args.out, PointSet(synth, train.columns))
    config = {
        "method": "knn_rex_corrected",
        "k": args.k,
        "m": args.m,
        "seed": args.seed,
        "round_integers": args.round_integers,
        "total": args.total,
        "marginals": args.marginals,
        "in": getattr(args, "in"),
        "out": args.out,
    }
    _write_manifest(args.out, _manifest_lines("synthesize-corrected", config, phases))
    return 0


def cmd_evaluate(args):
    phases = _Phases()
    with phases.measure("read"):
        a = read_points_csv(args.a)
        b = read_points_csv(args.b)
    with phases.measure("evaluation"):
        binning = make_binning(np.concatenate([a.values, b.values]), args.bins)
        distance = hellinger(a.values, b.values, binning)
    config = {"a": args.a, "b": args.b, "bins": args.bins}
    sections = [
        [
            "[results]",
            f"hellinger: {distance!r}",
            f"n_a: {a.n}",
            f"n_b: {b.n}",
            f"bins_per_dim: {args.bins}",
        ],
        ["[manifest]"] + _manifest_lines("evaluate", config, phases),
    ]
    _emit_report(args, sections)
    return 0


def _icv_sections(report, subcommand, config, phases):
    results = [
        "[results]",
        f"mean: {report.mean!r}",
        f"std: {report.std!r}",
        f"baseline_mean: {report.baseline_mean!r}",
        f"baseline_std: {report.baseline_std!r}",
        f"folds: {report.folds}",
        f"fold_size: {report.fold_size}",
        f"population_size: {report.population_size}",
        f"n_used: {report.n_used}",
        f"bins_per_dim: {report.bins_per_dim}",
    ]
    table = ["[folds]", "fold hellinger baseline"]
    for i, (score, base) in enumerate(zip(report.fold_hellinger, report.baseline_hellinger)):
        table.append(f"{i:03d} {score!r} {base!r}")
    timing = ["[timing]", "time_fold_seconds: " + " ".join(f"{s:.6f}" for s in report.fold_seconds)]
    manifest = ["[manifest]"] + _manifest_lines(subcommand, config, phases)
    return [results, table, timing, manifest]


def cmd_icv(args):
    phases = _Phases()
    cfg = _resolve_config(args)
    with phases.measure("read"):
        data = read_points_csv(getattr(args, "in"))
    with phases.measure("evaluation"):
        report = icv_run(
            data.values,
            cfg,
            folds=args.folds,
            bins_per_dim=args.bins,
            threads=args.threads,
        )
    config = dict(cfg.echo(), folds=args.folds, bins=args.bins, threads=args.threads)
    config["in"] = getattr(args, "in")
    _emit_report(args, _icv_sections(report, "icv", config, phases))
    return 0


def _sweep_grid(args):
    method = METHOD_FLAGS[args.method]
    if method == "knn_rex":
        return [("k", k, "m", m) for k in _int_list(args.k) for m in _int_list(args.m)]
    if method == "fixed_gaussian":
        return [("h", h, None, None) for h in _float_list(args.h)]
    if method == "bmp":
        return [("k", k, "h", h) for k in _int_list(args.k) for h in _float_list(args.h)]
    return [("L", L, "m", m) for L in _int_list(args.L) for m in _int_list(args.m)]


def cmd_sweep(args):
    phases = _Phases()
    with phases.measure("read"):
        data = read_points_csv(getattr(args, "in"))
    rows = []
    with phases.measure("evaluation"):
        for name1, val1, name2, val2 in _sweep_grid(args):
            cfg = EstimatorConfig(
                method=METHOD_FLAGS[args.method],
                seed=args.seed,
                stall_limit=args.stall_limit,
                ridge=args.ridge,
            )
            setattr(cfg, name1, val1)
            if name2 is not None:
                setattr(cfg, name2, val2)
            cfg.validate()
            report = icv_run(
                data.values, cfg, folds=args.folds, bins_per_dim=args.bins, threads=args.threads
            )
            rows.append((cfg, report))
    table = ["[sweep]", "method k m h L mean std baseline_mean"]
    for cfg, report in rows:
        table.append(
            f"{cfg.method} {cfg.k} {cfg.m} {cfg.h!r} {cfg.L} "
            f"{report.mean!r} {report.std!r} {report.baseline_mean!r}"
        )
    config = {
        "method": METHOD_FLAGS[args.method],
        "k": args.k,
        "m": args.m,
        "h": args.h,
        "L": args.L,
        "folds": args.folds,
        "bins": args.bins,
        "seed": args.seed,
        "in": getattr(args, "in"),
    }
    _emit_report(args, [table, ["[manifest]"] + _manifest_lines("sweep", config, phases)])
    return 0


def cmd_validate_asymptotics(args):
    phases = _Phases()
    rng = np.random.default_rng(args.seed)
    if args.density == "uniform":
        model = uniform_model(args.dim)
    else:
        model = linear_model(args.dim, args.slope)
    x = np.zeros(args.dim)
    deltas = _float_list(args.deltas)
    with phases.measure("evaluation"):
        report = asymptotics_report(model, x, deltas, args.samples, rng)
    lines = [
        "[results]",
        f"density: {args.density}",
        f"dim: {args.dim}",
        f"slope: {args.slope!r}",
        f"samples: {args.samples}",
        f"gradient_check: {report.gradient_check!r}",
        "delta acceptance_rate first_term second_predicted second_measured max_abs_dev max_dev_in_se",
    ]
    for e in report.entries:
        lines.append(
            f"{e.delta!r} {e.acceptance_rate:.4f} {e.first_term!r} "
            f"{e.second_term_predicted!r} {e.second_term_measured!r} "
            f"{e.max_abs_dev!r} {e.max_dev_in_se:.3f}"
        )
    lines.append(
        "deviation_ratios: " + " ".join(f"{r!r}" for r in report.deviation_ratios())
    )
    lines.append(
        "second_term_ratios: " + " ".join(f"{r!r}" for r in report.second_term_ratios())
    )
    config = {
        "density": args.density,
        "dim": args.dim,
        "slope": args.slope,
        "deltas": args.deltas,
        "samples": args.samples,
        "seed": args.seed,
    }
    _emit_report(args, [lines, ["[manifest]"] + _manifest_lines("validate-asymptotics", config, phases)])
    return 0


def cmd_bench_knn(args):
    phases = _Phases()
    rng = np.random.default_rng(args.seed)
    sizes = _int_list(args.sizes)
    lines = ["[results]", f"sizes: {args.sizes}", f"dim: {args.dim}", f"k: {args.k}", f"reps: {args.reps}"]
    timing = ["[timing]"]
    best = {}
    for n in sizes:
        data = rng.random((n, args.dim))
        times = []
        for _ in range(args.reps):
            t0 = time.perf_counter()
            build_knn(data, args.k)
            times.append(time.perf_counter() - t0)
        best[n] = min(times)
        timing.append(f"time_build_{n}: {best[n]:.6f}")
    for a, b in zip(sizes, sizes[1:]):
        timing.append(f"time_ratio_{b}_{a}: {best[b] / best[a]:.3f}")
    config = {"sizes": args.sizes, "dim": args.dim, "k": args.k, "reps": args.reps, "seed": args.seed}
    _emit_report(args, [lines, timing, ["[manifest]"] + _manifest_lines("bench-knn", config, phases)])
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_method_flags(sub, include_l=True):
    sub.add_argument("--method", required=True, choices=sorted(METHOD_FLAGS))
    sub.add_argument("--k", type=int, default=30)
    sub.add_argument("--m", type=int, default=3)
    sub.add_argument("--h", type=float, default=0.05)
    sub.add_argument("--L", type=int, default=10)
    if include_l:
        sub.add_argument("--l", type=int, required=True, help="population size to synthesize")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--ridge", type=float, default=0.0)
    sub.add_argument("--stall-limit", type=int, default=10_000, dest="stall_limit")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="knnrex",
        description="Population synthesis by k-nearest-neighbor crossover kernels",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True)

    gen = subs.add_parser("gen-data", help="generate a benchmark dataset CSV")
    gen.add_argument("--dataset", required=True, choices=["swissroll", "ring", "gmm"])
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--spec", help="JSON file with weights/means/covs (gmm only)")
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen_data)

    syn = subs.add_parser("synthesize", help="whiten, resample, write a population CSV")
    _add_method_flags(syn)
    syn.add_argument("--in", required=True)
    syn.add_argument("--out", required=True)
    syn.set_defaults(func=cmd_synthesize)

    cor = subs.add_parser("synthesize-corrected", help="synthesis matching marginal frequencies")
    cor.add_argument("--k", type=int, default=30)
    cor.add_argument("--m", type=int, default=3)
    cor.add_argument("--seed", type=int, default=0)
    cor.add_argument("--round-integers", action="store_true", dest="round_integers")
    cor.add_argument("--marginals", required=True, help="CSV: variable,lo,hi,freq")
    cor.add_argument("--total", type=int, required=True, help="declared population size")
    cor.add_argument("--in", required=True)
    cor.add_argument("--out", required=True)
    cor.set_defaults(func=cmd_synthesize_corrected)

    ev = subs.add_parser("evaluate", help="binned Hellinger distance between two CSVs")
    ev.add_argument("--a", required=True)
    ev.add_argument("--b", required=True)
    ev.add_argument("--bins", type=int, default=10)
    ev.add_argument("--out")
    ev.set_defaults(func=cmd_evaluate)

    icv = subs.add_parser("icv", help="inverted cross-validation of one method")
    _add_method_flags(icv, include_l=False)
    icv.add_argument("--folds", type=int, default=100)
    icv.add_argument("--bins", type=int, default=10)
    icv.add_argument("--threads", type=int, default=1)
    icv.add_argument("--in", required=True)
    icv.add_argument("--out")
    icv.set_defaults(func=cmd_icv)

    sw = subs.add_parser("sweep", help="parameter grid of inverted cross-validations")
    sw.add_argument("--method", required=True, choices=sorted(METHOD_FLAGS))
    sw.add_argument("--k", default="30", help="comma-separated list")
    sw.add_argument("--m", default="3", help="comma-separated list")
    sw.add_argument("--h", default="0.05", help="comma-separated list")
    sw.add_argument("--L", default="10", help="comma-separated list")
    sw.add_argument("--folds", type=int, default=100)
    sw.add_argument("--bins", type=int, default=10)
    sw.add_argument("--threads", type=int, default=1)
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--ridge", type=float, default=0.0)
    sw.add_argument("--stall-limit", type=int, default=10_000, dest="stall_limit")
    sw.add_argument("--in", required=True)
    sw.add_argument("--out")
    sw.set_defaults(func=cmd_sweep)

    va = subs.add_parser("validate-asymptotics", help="small-ball covariance: theory vs Monte Carlo")
    va.add_argument("--density", choices=["uniform", "linear"], default="uniform")
    va.add_argument("--dim", type=int, default=2)
    va.add_argument("--slope", type=float, default=5.0)
    va.add_argument("--deltas", default="0.2,0.1")
    va.add_argument("--samples", type=int, default=100_000)
    va.add_argument("--seed", type=int, default=0)
    va.add_argument("--out")
    va.set_defaults(func=cmd_validate_asymptotics)

    bench = subs.add_parser("bench-knn", help="time neighbor-index builds across sizes")
    bench.add_argument("--sizes", default="2000,4000")
    bench.add_argument("--dim", type=int, default=4)
    bench.add_argument("--k", type=int, default=50)
    bench.add_argument("--reps", type=int, default=3)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out")
    bench.set_defaults(func=cmd_bench_knn)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except KnnRexError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
