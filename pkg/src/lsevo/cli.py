"""Command-line entry points: run, baseline random, report, ablation-sweep."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .harness import (
    ABLATIONS,
    load_config,
    read_archive_jsonl,
    run_ablation_sweep,
    run_experiment,
    run_random_baseline,
    write_archive_jsonl,
)
from .metrics import top_k_mean


def _add_config_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="experiment config JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lsevo", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the configured experiment over its seeds")
    _add_config_arg(run_p)
    run_p.add_argument("--seed", type=int, default=None, help="run only this seed")
    run_p.add_argument("--out", default=None, help="override the config's output directory")

    base_p = sub.add_parser("baseline", help="baseline strategies at a fixed budget")
    base_sub = base_p.add_subparsers(dest="baseline", required=True)
    rand_p = base_sub.add_parser("random", help="assess random prior samples")
    _add_config_arg(rand_p)
    rand_p.add_argument("--budget", type=int, required=True, help="number of assessments")
    rand_p.add_argument("--seed", type=int, default=0)
    rand_p.add_argument("--out", default=None, help="directory for the baseline archive")

    rep_p = sub.add_parser("report", help="summarize an archive file")
    rep_p.add_argument("--archive", required=True, help="archive JSONL path")
    rep_p.add_argument("--top-k", type=int, default=100)

    sweep_p = sub.add_parser("ablation-sweep", help="run all pre-screener ablations")
    _add_config_arg(sweep_p)
    sweep_p.add_argument("--seeds", type=int, required=True, help="number of seeds (0..N-1)")
    sweep_p.add_argument("--out", default=None, help="override the config's output directory")

    return parser


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seeds=(args.seed,))
    if args.out is not None:
        cfg = replace(cfg, out_dir=args.out)
    report = run_experiment(cfg)
    for s in report.per_seed:
        print(
            f"seed {s.seed}: spent={s.budget_spent} top20={s.top20:.6f} "
            f"top50={s.top50:.6f} top100={s.top100:.6f} diversity={s.archive_diversity:.6f}"
        )
    print(
        f"mean over {len(report.per_seed)} seed(s): top100={report.mean_final('top100'):.6f} "
        f"diversity={report.mean_final('archive_diversity'):.6f}"
    )
    return 0


def cmd_baseline_random(args) -> int:
    cfg = load_config(args.config)
    model, model_client = cfg.model.build()
    endpoint, oracle_client = cfg.oracle.build()
    try:
        archive = run_random_baseline(endpoint, args.budget, model, args.seed)
    finally:
        for client in (oracle_client, model_client):
            if client is not None:
                client.close()
    k = min(100, len(archive))
    print(f"random baseline: spent={len(archive)} top{k}={top_k_mean(archive, k):.6f}")
    out = args.out or cfg.out_dir
    if out:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"baseline_random_seed{args.seed}.jsonl"
        write_archive_jsonl(path, archive)
        print(f"archive written to {path}")
    return 0


def cmd_report(args) -> int:
    archive = read_archive_jsonl(args.archive)
    if not archive:
        print("archive is empty", file=sys.stderr)
        return 1
    print(f"records={len(archive)} top{args.top_k}={top_k_mean(archive, args.top_k):.6f}")
    return 0


def cmd_ablation_sweep(args) -> int:
    cfg = load_config(args.config)
    cfg = replace(cfg, seeds=tuple(range(args.seeds)))
    if args.out is not None:
        cfg = replace(cfg, out_dir=args.out)
    reports = run_ablation_sweep(cfg)
    print(f"{'ablation':<12} {'top100':>10} {'diversity':>12}")
    for ablation in ABLATIONS:
        r = reports[ablation]
        print(f"{ablation:<12} {r.mean_final('top100'):>10.6f} {r.mean_final('archive_diversity'):>12.6f}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return cmd_run(args)
    if args.command == "baseline":
        return cmd_baseline_random(args)
    if args.command == "report":
        return cmd_report(args)
    return cmd_ablation_sweep(args)


if __name__ == "__main__":
    sys.exit(main())
