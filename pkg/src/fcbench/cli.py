"""Command-line entry point.

    fcbench validate --benchmark bench.yaml
    fcbench run-baselines --benchmark bench.yaml --out results/
    fcbench score --benchmark bench.yaml --submission model.jsonl --out results/model.jsonl
    fcbench leaderboard --summaries 'results/*.jsonl' --out report/
    fcbench synth --out synthetic/

Exit status is 0 on success and 1 on any harness error; the message names
the error class so scripts can grep for it.
"""

from __future__ import annotations

import argparse
import glob
import sys
from pathlib import Path

import yaml

from fcbench import __version__
from fcbench._io import atomic_write_text, read_jsonl, to_json, write_jsonl
from fcbench.aggregate import BootstrapConfig, build_error_matrix, build_report
from fcbench.baselines import BASELINE_KINDS
from fcbench.dataset import DATA_ROOT_ENV
from fcbench.errors import HarnessError, SchemaError
from fcbench.runner import DatasetCache, run_baselines, score_submission, validate_benchmark
from fcbench.task import METRIC_NAMES, EvaluationSummary, parse_benchmark, windows_for_dataset

FORMATS = ("md", "csv", "json")


def _fail(exc: BaseException) -> int:
    name = type(exc).__name__
    if isinstance(exc, SchemaError) and exc.path:
        print(f"error: {name} at {exc.path}: {exc.message}", file=sys.stderr)
    else:
        print(f"error: {name}: {exc}", file=sys.stderr)
    return 1


def cmd_validate(args) -> int:
    bench = parse_benchmark(args.benchmark)
    cache = DatasetCache()
    reports = validate_benchmark(bench, cache)
    first_bad = None
    for rep in reports:
        status = "ok" if rep.ok else "FAILED"
        print(f"{rep.task_name}: {status}, {rep.num_windows} window(s), cutoffs {rep.cutoffs}")
        for d in rep.defects:
            item = f" [{d.item_id}]" if d.item_id else ""
            print(f"  {d.severity}: {d.kind}{item}: {d.detail}")
        if not rep.ok and first_bad is None:
            first_bad = rep
    if args.report:
        atomic_write_text(args.report, to_json([r.to_dict() for r in reports]) + "\n")
    if first_bad is not None:
        kind = next(d.kind for d in first_bad.defects if d.severity == "error")
        print(f"error: task {first_bad.task_name!r} is not feasible: {kind}", file=sys.stderr)
        return 1
    return 0


def cmd_run_baselines(args) -> int:
    bench = parse_benchmark(args.benchmark)
    results = run_baselines(
        bench,
        args.baselines,
        jobs=args.jobs,
        skip_zero_scale=args.skip_zero_scale,
        timing=not args.no_timing,
    )
    out = Path(args.out)
    for kind, summaries in results.items():
        write_jsonl(out / f"{kind}.jsonl", (s.to_dict() for s in summaries))
        failed = [s.task_name for s in summaries if s.failed]
        print(f"{kind}: {len(summaries) - len(failed)}/{len(summaries)} task(s) scored -> {out / f'{kind}.jsonl'}")
        for s in summaries:
            if s.failed:
                print(f"  failed {s.task_name}: {s.failure_reason}")
    return 0


def cmd_score(args) -> int:
    bench = parse_benchmark(args.benchmark)
    records = read_jsonl(args.submission)
    summaries = score_submission(bench, records, skip_zero_scale=args.skip_zero_scale, jobs=args.jobs)
    write_jsonl(args.out, (s.to_dict() for s in summaries))
    print(f"{summaries[0].model_name}: {len(summaries)} task summaries -> {args.out}")
    return 0


def _collect_summaries(patterns) -> list[EvaluationSummary]:
    paths: list[str] = []
    for pat in patterns:
        hits = sorted(glob.glob(pat))
        if not hits:
            raise FileNotFoundError(f"no summary files match {pat!r}")
        paths += [p for p in hits if p not in paths]
    return [EvaluationSummary.from_dict(r) for p in paths for r in read_jsonl(p)]


def cmd_leaderboard(args) -> int:
    from fcbench.report import leaderboard_markdown, render

    summaries = _collect_summaries(args.summaries)
    em = build_error_matrix(summaries, args.metric, args.baseline, args.leakage_reference)
    if len(em.model_names) < 2:
        raise ValueError(f"a leaderboard needs at least two models, found {len(em.model_names)}")
    cfg = BootstrapConfig(num_samples=args.bootstrap_samples, alpha=args.alpha, seed=args.seed)
    report = build_report(em, cfg, marginal_ci=args.marginal_ci)
    out = Path(args.out)
    written = []
    for fmt in dict.fromkeys(args.format):
        for name, text in render(report, fmt).items():
            atomic_write_text(out / name, text)
            written.append(out / name)
    if not args.no_figures:
        from fcbench.plots import render_figures

        written += render_figures(report, out)
    print(leaderboard_markdown(report), end="")
    for imp in report.imputation_log:
        print(f"imputed {imp.model_name} on {imp.task_name}: {imp.reason} -> {imp.source_model}")
    for p in written:
        print(f"wrote {p}")
    return 0


def cmd_synth(args) -> int:
    from fcbench.synthetic import write_synthetic_benchmark

    snr = None if args.noiseless else args.snr
    path = write_synthetic_benchmark(args.out, num_tasks=args.tasks, seed=args.seed, snr=snr)
    print(path)
    return 0


def cmd_windows(args) -> int:
    bench = parse_benchmark(args.benchmark)
    cache = DatasetCache()
    for t in bench.tasks:
        for w in windows_for_dataset(t, cache.get(t)):
            print(f"{t.task_name}\t{w.index}\t{w.cutoff}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fcbench",
        description=f"Forecast benchmark harness. Relative dataset paths resolve against ${DATA_ROOT_ENV} when set.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def with_benchmark(sp):
        sp.add_argument("--benchmark", required=True, help="benchmark YAML file")
        return sp

    sp = with_benchmark(sub.add_parser("validate", help="check datasets and windows for every task"))
    sp.add_argument("--report", help="also write the full validation report as JSON")
    sp.set_defaults(func=cmd_validate)

    sp = with_benchmark(sub.add_parser("windows", help="list evaluation cutoffs per task"))
    sp.set_defaults(func=cmd_windows)

    sp = with_benchmark(sub.add_parser("run-baselines", help="evaluate reference forecasters"))
    sp.add_argument("--baselines", nargs="+", choices=BASELINE_KINDS, default=list(BASELINE_KINDS))
    sp.add_argument("--out", required=True, help="directory for <baseline>.jsonl summaries")
    sp.add_argument("--jobs", type=int, default=1, help="tasks evaluated concurrently")
    sp.add_argument("--skip-zero-scale", action="store_true", help="drop series with zero seasonal error from MASE/SQL")
    sp.add_argument("--no-timing", action="store_true", help="write runtime_s as null (byte-reproducible output)")
    sp.set_defaults(func=cmd_run_baselines)

    sp = with_benchmark(sub.add_parser("score", help="score a JSON-lines forecast submission"))
    sp.add_argument("--submission", required=True)
    sp.add_argument("--out", required=True, help="summary JSON-lines file to write")
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--skip-zero-scale", action="store_true")
    sp.set_defaults(func=cmd_score)

    sp = sub.add_parser("leaderboard", help="aggregate summaries into a leaderboard")
    sp.add_argument("--summaries", nargs="+", required=True, help="summary files or glob patterns")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--metric", choices=METRIC_NAMES, help="metric for every task (default: each task's eval_metric)")
    sp.add_argument("--baseline", default="seasonal_naive")
    sp.add_argument("--leakage-reference", help="model whose score replaces leaked tasks (default: the baseline)")
    sp.add_argument("--bootstrap-samples", type=int, default=1000)
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--format", nargs="+", choices=FORMATS, default=list(FORMATS))
    sp.add_argument("--marginal-ci", action="store_true", help="also bootstrap the marginal win rate and skill score")
    sp.add_argument("--no-figures", action="store_true")
    sp.set_defaults(func=cmd_leaderboard)

    sp = sub.add_parser("synth", help="write a synthetic seasonal benchmark")
    sp.add_argument("--out", required=True)
    sp.add_argument("--tasks", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--snr", type=float, default=10.0)
    sp.add_argument("--noiseless", action="store_true")
    sp.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (HarnessError, ValueError, OSError, yaml.YAMLError) as exc:
        return _fail(exc)


if __name__ == "__main__":
    sys.exit(main())
