"""Command-line interface.

Subcommands mirror the pipeline stages::

    slap collect --config cfg.json --out runs/c0
    slap train --config cfg.json --ledger runs/c0/ledger.jsonl --out runs/t0
    slap eval --config cfg.json --checkpoints runs/t0/checkpoints --out runs/e0
    slap baseline ppo --config cfg.json --out runs/b0
    slap ablate pruning --config cfg.json --ratios 5,10,15 --out runs/a0
    slap report --in runs --out runs/report

Exit codes: 0 on success, 2 when a task is unsolvable, 3 when the only
failures were training divergences.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from slap.config import load_config
from slap.graph import UnsolvableTaskError

EXIT_OK = 0
EXIT_UNSOLVABLE = 2
EXIT_DIVERGENCE = 3


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="config JSON path")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slap",
        description="Abstract planning with reinforcement-learned shortcut "
                    "options in a 2D manipulation environment.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="build training graphs, enumerate "
                       "and prune shortcut candidates")
    _add_common(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train policies for surviving "
                       "candidates")
    _add_common(p)
    p.add_argument("--ledger", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="plan with learned shortcuts on "
                       "held-out tasks")
    _add_common(p)
    p.add_argument("--checkpoints", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("baseline", help="baseline methods")
    bsub = p.add_subparsers(dest="baseline", required=True)
    bp = bsub.add_parser("ppo", help="flat PPO on the full task")
    _add_common(bp)
    bp.add_argument("--out", required=True)

    p = sub.add_parser("ablate", help="ablation studies")
    asub = p.add_subparsers(dest="ablation", required=True)
    ap = asub.add_parser("pruning", help="sweep the rollout keep threshold")
    _add_common(ap)
    ap.add_argument("--ratios", default="5,10,15,20,25,30,35",
                    help="comma-separated K/N percentages")
    ap.add_argument("--out", required=True)

    p = sub.add_parser("report", help="aggregate results into tables and "
                       "figures")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except UnsolvableTaskError as e:
        print(f"error: unsolvable task: {e}", file=sys.stderr)
        return EXIT_UNSOLVABLE


def _dispatch(args: argparse.Namespace) -> int:
    from slap import pipeline, report

    if args.command == "report":
        report.make_report(args.in_dir, args.out)
        print(f"report written to {args.out}")
        return EXIT_OK

    config = load_config(args.config, seed_override=args.seed)

    if args.command == "collect":
        stats = pipeline.collect(config, args.out)
        kept = sum(s["kept"] for s in stats)
        print(f"collected {len(stats)} candidates, {kept} kept "
              f"(ledger: {Path(args.out) / 'ledger.jsonl'})")
        return EXIT_OK

    if args.command == "train":
        saved, diverged = pipeline.train(config, args.ledger, args.out)
        print(f"trained {len(saved)} policies"
              + (f", {len(diverged)} diverged" if diverged else ""))
        return EXIT_DIVERGENCE if diverged else EXIT_OK

    if args.command == "eval":
        trained = pipeline.load_trained_shortcuts(config, args.checkpoints)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        records, _ = pipeline.evaluate(config, trained)
        gen_records = pipeline.evaluate_generalization(config, trained) \
            if (config.generalization.n_distractors > 0
                or config.generalization.random_goals) else []
        pipeline.write_records(records + gen_records, out / "results.csv")
        if config.dynamics:
            train_dir = Path(args.checkpoints).parent
            rows = pipeline.training_dynamics(config, train_dir)
            report.write_raw_dicts(rows, out / "dynamics_raw.csv")
        slap_rows = [r for r in records if r.method == "slap"]
        mean_len = sum(r.plan_length for r in slap_rows) / len(slap_rows)
        print(f"evaluated {len(slap_rows)} tasks; slap mean plan length "
              f"{mean_len:.1f} ({out / 'results.csv'})")
        return EXIT_OK

    if args.command == "baseline":
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        records = pipeline.run_flat_ppo_baseline(config, out)
        pipeline.write_records(records, out / "results.csv")
        rate = sum(r.success for r in records) / len(records)
        print(f"flat ppo success rate {rate:.0%} ({out / 'results.csv'})")
        return EXIT_OK

    if args.command == "ablate":
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        ratios = [int(r) for r in args.ratios.split(",")]
        rows = pipeline.ablate_pruning(config, ratios, out)
        report.write_raw_dicts(rows, out / "ablation_raw.csv")
        print(f"ablation over ratios {ratios} written to "
              f"{out / 'ablation_raw.csv'}")
        return EXIT_OK

    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
