"""Command-line front end: dataset generation, runs, ablations, reports.

Exit codes: 0 success, 1 runtime failure, 2 usage error. All output is
plain text/CSV; plotting stays external. STREAMPROTO_OUT provides the
default output directory when --out / --runs is omitted.
"""

import argparse
import os
import sys

from .formats import FormatError, load_manifest
from .harness import (
    ABLATION_VARIANTS,
    HarnessError,
    METHODS,
    RunConfig,
    aggregate_runs,
    load_run_dir,
    run_ablation,
    run_protocol,
    save_run_record,
)
from .metrics import LedgerError
from .projector import IDENTITY, RELU
from .ridge import ConditioningError
from .synth import (
    gen_domain_shifted,
    gen_gaussian_mixture,
    gen_xor_mixture,
    make_cil_manifest,
    make_dil_manifest,
)

OUT_ENV = "STREAMPROTO_OUT"

# CLI spells methods with hyphens; the library uses underscores.
_METHOD_FLAGS = tuple(m.replace("_", "-") for m in METHODS)


def _env_out() -> str | None:
    return os.environ.get(OUT_ENV) or None


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="streamproto",
        description="Streaming prototype classifier: synthetic data, "
                    "incremental runs, ablations, reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate datasets")
    gen_sub = gen.add_subparsers(dest="gen_what", required=True)
    synth = gen_sub.add_parser("synth", help="synthetic embedding fixtures")
    synth.add_argument("--kind", required=True,
                       choices=("gaussian", "xor", "domain"))
    synth.add_argument("--classes", type=int, default=None,
                       help="class count (default 4; xor is always 2)")
    synth.add_argument("--dim", type=int, default=16)
    synth.add_argument("--per-class", type=int, default=50)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", default=_env_out(),
                       help=f"output directory (default: ${OUT_ENV})")
    synth.add_argument("--tasks", type=int, default=2,
                       help="tasks in the emitted manifest (gaussian/xor)")
    synth.add_argument("--separation", type=float, default=6.0)
    synth.add_argument("--shift", type=float, default=4.0,
                       help="domain offset norm (kind=domain)")
    synth.add_argument("--domains", type=int, default=3,
                       help="domain count (kind=domain)")
    synth.set_defaults(func=cmd_gen)

    run = sub.add_parser("run", help="execute one method over seeded runs")
    run.add_argument("--manifest", required=True)
    run.add_argument("--method", required=True, choices=_METHOD_FLAGS)
    run.add_argument("--q", type=int, default=8192,
                     help="projection width Q")
    run.add_argument("--seeds", default=None,
                     help="comma-separated run seeds (default: manifest's)")
    run.add_argument("--out", default=_env_out())
    run.add_argument("--lambda-fixed", type=float, default=None,
                     help="skip the holdout grid search, use this value")
    run.add_argument("--no-projection", action="store_true",
                     help="feed raw embeddings to the accumulator")
    run.add_argument("--no-relu", action="store_true",
                     help="keep the projection but drop the rectifier")
    run.add_argument("--jobs", type=int, default=1,
                     help="parallel workers across seeds")
    run.set_defaults(func=cmd_run)

    abl = sub.add_parser("ablate", help="run one ablation variant")
    abl.add_argument("--manifest", required=True)
    abl.add_argument("--variant", required=True, choices=ABLATION_VARIANTS)
    abl.add_argument("--q", type=int, default=8192)
    abl.add_argument("--q-list", default=None,
                     help="comma-separated widths for q_sweep")
    abl.add_argument("--seeds", default=None)
    abl.add_argument("--jobs", type=int, default=1)
    abl.set_defaults(func=cmd_ablate)

    rep = sub.add_parser("report", help="summarize saved run records")
    rep.add_argument("--runs", default=_env_out(),
                     help=f"directory of run records (default: ${OUT_ENV})")
    rep.add_argument("--stagewise", action="store_true",
                     help="emit per-stage CSV instead of the final table")
    rep.set_defaults(func=cmd_report)
    return parser


def _parse_seed_list(text: str | None):
    if text is None:
        return None
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise _Usage(f"bad seed list {text!r}; expected comma-separated ints")


def cmd_gen(args) -> int:
    if args.out is None:
        raise _Usage("gen synth: --out is required (or set $" + OUT_ENV + ")")
    if args.kind == "xor":
        if args.classes not in (None, 2):
            raise _Usage("gen synth --kind xor is binary; drop --classes")
    classes = args.classes if args.classes is not None else 4

    if args.kind == "gaussian":
        triple = gen_gaussian_mixture(classes, args.dim, args.per_class,
                                      args.separation, args.seed)
        manifest = make_cil_manifest(triple, args.tasks, args.out)
    elif args.kind == "xor":
        triple = gen_xor_mixture(args.dim, args.per_class, args.seed)
        manifest = make_dil_manifest(triple, args.tasks, args.out)
    else:
        manifest = gen_domain_shifted(classes, args.dim, args.domains,
                                      args.shift, args.seed, args.out,
                                      per_class=args.per_class,
                                      separation=args.separation)
    print(f"wrote {manifest.path}")
    print(f"protocol={manifest.protocol} tasks={manifest.n_tasks} "
          f"classes={manifest.total_classes} dim={manifest.embedding_dim}")
    return 0


def _grid_text(config: RunConfig) -> str:
    if config.lambda_fixed is not None:
        return f"fixed at {config.lambda_fixed:g}"
    points = " ".join(f"{g:g}" for g in config.grid)
    return f"{len(config.grid)} points: {points}"


def _print_run_header(manifest, method, config, seeds) -> None:
    print(f"method: {method}")
    print(f"manifest: {manifest.path} (hash={manifest.content_hash()}, "
          f"protocol={manifest.protocol}, tasks={manifest.n_tasks}, "
          f"classes={manifest.total_classes}, dim={manifest.embedding_dim})")
    variant = []
    if not config.use_projection:
        variant.append("no_projection")
    if config.nonlinearity == IDENTITY and config.use_projection:
        variant.append("no_relu")
    print(f"q_dim: {config.q_dim}" + (f" [{' '.join(variant)}]" if variant else ""))
    print(f"lambda grid: {_grid_text(config)}")
    print(f"seeds: {','.join(str(s) for s in seeds)}")


def cmd_run(args) -> int:
    if args.out is None:
        raise _Usage("run: --out is required (or set $" + OUT_ENV + ")")
    manifest = load_manifest(args.manifest)
    method = args.method.replace("-", "_")
    config = RunConfig(
        q_dim=args.q,
        nonlinearity=IDENTITY if args.no_relu else RELU,
        use_projection=not args.no_projection,
        lambda_fixed=args.lambda_fixed,
    )
    seeds = _parse_seed_list(args.seeds) or list(manifest.run_seeds)
    _print_run_header(manifest, method, config, seeds)

    records = run_protocol(manifest, method, seeds, config, jobs=args.jobs)
    for record in records:
        path = save_run_record(record, args.out)
        aa = record.aa_curve()[-1]
        fr = record.fr_curve()[-1]
        total = sum(record.stage_seconds)
        fr_text = "" if record.n_stages < 2 else f" FR_T={fr:.4f}"
        print(f"seed {record.run_seed}: AA_T={aa:.4f}{fr_text} "
              f"({total:.1f}s) -> {path.name}")

    agg = aggregate_runs(records)
    final = agg["final"]
    line = f"mean over {agg['n_runs']} runs: AA_T={final['aa_mean']:.4f}"
    line += f" +/- {final['aa_std']:.4f}"
    if final["fr_mean"] is not None:
        line += f", FR_T={final['fr_mean']:.4f} +/- {final['fr_std']:.4f}"
    if agg["protocol_violating"]:
        line += "  [joint training: violates the incremental-data protocol]"
    print(line)
    return 0


def cmd_ablate(args) -> int:
    manifest = load_manifest(args.manifest)
    q_list = None
    if args.q_list is not None:
        try:
            q_list = [int(p) for p in args.q_list.split(",") if p.strip() != ""]
        except ValueError:
            raise _Usage(f"bad --q-list {args.q_list!r}; expected ints")
    config = RunConfig(q_dim=args.q)
    seeds = _parse_seed_list(args.seeds)
    report = run_ablation(manifest, args.variant, q_list, seeds, config,
                          jobs=args.jobs)
    print("variant,q_dim,trainable_params,frozen_projection_params,"
          "probe_params,final_aa_mean,final_aa_std,final_fr_mean,final_fr_std")
    for row in report["rows"]:
        fr_mean = "" if row["final_fr_mean"] is None else f"{row['final_fr_mean']:.6f}"
        fr_std = "" if row["final_fr_std"] is None else f"{row['final_fr_std']:.6f}"
        print(f"{row['variant']},{row['q_dim']},{row['trainable_params']},"
              f"{row['frozen_projection_params']},{row['probe_params']},"
              f"{row['final_aa_mean']:.6f},{row['final_aa_std']:.6f},"
              f"{fr_mean},{fr_std}")
    return 0


def _fmt_pct(mean: float, std: float) -> str:
    return f"{100 * mean:5.1f} +/- {100 * std:4.1f}"


def cmd_report(args) -> int:
    if args.runs is None:
        raise _Usage("report: --runs is required (or set $" + OUT_ENV + ")")
    records = load_run_dir(args.runs)
    by_method: dict[str, list] = {}
    for record in records:
        by_method.setdefault(record.method, []).append(record)
    aggregates = {m: aggregate_runs(rs) for m, rs in sorted(by_method.items())}

    if args.stagewise:
        print("method,stage,aa_mean,aa_std,fr_mean,fr_std")
        for method, agg in aggregates.items():
            for row in agg["stages"]:
                fr_mean = "" if row["fr_mean"] is None else f"{row['fr_mean']:.6f}"
                fr_std = "" if row["fr_std"] is None else f"{row['fr_std']:.6f}"
                print(f"{method},{row['stage']},{row['aa_mean']:.6f},"
                      f"{row['aa_std']:.6f},{fr_mean},{fr_std}")
        return 0

    print(f"{'method':<14} {'runs':>4}  {'AA_T (%)':<16} {'FR_T (%)':<16}")
    flagged = False
    for method, agg in aggregates.items():
        final = agg["final"]
        aa = _fmt_pct(final["aa_mean"], final["aa_std"])
        if final["fr_mean"] is None:
            fr = "-"
        else:
            fr = _fmt_pct(final["fr_mean"], final["fr_std"])
        mark = " *" if agg["protocol_violating"] else ""
        print(f"{method:<14} {agg['n_runs']:>4}  {aa:<16} {fr:<16}{mark}")
        flagged = flagged or agg["protocol_violating"]
    if flagged:
        print("* trains on pooled past data; violates the incremental protocol")
    return 0


class _Usage(Exception):
    """Flag-level error that should exit with the usage code."""


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except _Usage as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FormatError, HarnessError, LedgerError, ConditioningError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
