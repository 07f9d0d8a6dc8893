#!/usr/bin/env python3
"""Database-size ablation: retrieval quality vs views per scene in the index.

Database views are nested across the axis (each smaller database is a subset
of the next), so the sweep isolates database size. Writes sweep_k_db.csv with
one row per (value, condition, aggregation).
"""
import argparse

from sceneret.harness import ExperimentConfig, SplitParams, SynthSpec, sweep_kdb
from sceneret.trainer import TrainConfig


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--values", type=int, nargs="+", default=[1, 2, 4, 8])
    parser.add_argument("--sigma", type=float, default=0.25)
    parser.add_argument("--k-train", type=int, default=10, help="train views per scene")
    parser.add_argument("--epochs", type=int, default=600)
    args = parser.parse_args()

    config = ExperimentConfig(
        data=SynthSpec(
            n_scenes=60, views_per_scene=32, dim=64, sigma=args.sigma, nuisance_dims=48
        ),
        split=SplitParams(k_db=max(args.values), k_query=1, k_train=args.k_train),
        out_dir=args.out,
        train=TrainConfig(
            trunk_depth=1, widths=(), representation_dim=32, projection_dim=16,
            batch_scenes=32, epochs=args.epochs, lr=0.5, tau=0.2,
        ),
        ks=(1, 5),
        seed=args.seed,
    )
    result = sweep_kdb(config, args.values)
    for condition in ("zero_shot", "trained_seen", "trained_unseen"):
        series = result.series(condition, "none", "recall@1")
        print(f"{condition:<15} recall@1 across k_db={list(result.values)}: "
              + " ".join(f"{v:.3f}" for v in series))
    print(f"\nfull grid in {args.out}/sweep_k_db.csv")


if __name__ == "__main__":
    main()
