#!/usr/bin/env python3
"""Headline benchmark on the hard synthetic dataset.

Runs zero-shot and contrastively trained retrieval, each with and without
per-scene mean aggregation, and prints one row per condition.
"""
import argparse
from pathlib import Path

from sceneret.harness import ExperimentConfig, SplitParams, SynthSpec, run_experiment
from sceneret.trainer import TrainConfig


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--scenes", type=int, default=60)
    parser.add_argument("--sigma", type=float, default=1.0)
    parser.add_argument("--k-db", type=int, default=8)
    parser.add_argument("--k-train", type=int, default=8)
    parser.add_argument("--epochs", type=int, default=600)
    args = parser.parse_args()

    data = SynthSpec(
        n_scenes=args.scenes,
        views_per_scene=24,
        dim=64,
        sigma=args.sigma,
        nuisance_dims=48,
    )
    split = SplitParams(k_db=args.k_db, k_query=1, k_train=args.k_train, mode="seen")
    train_cfg = TrainConfig(
        trunk_depth=1,
        widths=(),
        representation_dim=32,
        projection_dim=16,
        batch_scenes=min(32, args.scenes),
        epochs=args.epochs,
        lr=0.5,
        tau=0.2,
    )

    out = Path(args.out)
    rows = []
    for stage, train in (("raw", None), ("trained", train_cfg)):
        reports = run_experiment(
            ExperimentConfig(
                data=data,
                split=split,
                out_dir=str(out / stage),
                stage=stage,
                train=train,
                aggregation="both",
                ks=(1, 5),
                seed=args.seed,
            )
        )
        for agg in ("none", "mean"):
            rows.append((stage, agg, reports[agg].aggregates))

    print(f"{'stage':<10} {'aggregation':<12} {'recall@1':>9} {'recall@5':>9} {'mrr':>7}")
    for stage, agg, m in rows:
        print(
            f"{stage:<10} {agg:<12} {m['recall@1']:>9.3f} {m['recall@5']:>9.3f} {m['mrr']:>7.3f}"
        )
    print(f"\nreports under {out}/")


if __name__ == "__main__":
    main()
