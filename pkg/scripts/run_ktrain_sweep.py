#!/usr/bin/env python3
"""Training-view ablation: retrieval quality vs positive-pair pool size.

Trains one head per k_train value and evaluates against seen and unseen
databases at a fixed k_db, with the zero-shot series as a constant baseline.
Writes sweep_k_train.csv.
"""
import argparse

from sceneret.harness import ExperimentConfig, SplitParams, SynthSpec, sweep_ktrain
from sceneret.trainer import TrainConfig


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--values", type=int, nargs="+", default=[2, 4, 8, 16])
    parser.add_argument("--sigma", type=float, default=1.0)
    parser.add_argument("--k-db", type=int, default=4, help="database views per scene")
    parser.add_argument("--epochs", type=int, default=600)
    args = parser.parse_args()

    config = ExperimentConfig(
        data=SynthSpec(
            n_scenes=60, views_per_scene=40, dim=64, sigma=args.sigma, nuisance_dims=48
        ),
        split=SplitParams(k_db=args.k_db, k_query=1, k_train=max(args.values)),
        out_dir=args.out,
        train=TrainConfig(
            trunk_depth=1, widths=(), representation_dim=32, projection_dim=16,
            batch_scenes=32, epochs=args.epochs, lr=0.5, tau=0.2,
        ),
        ks=(1, 5),
        seed=args.seed,
    )
    result = sweep_ktrain(config, args.values)
    for condition in ("zero_shot", "trained_seen", "trained_unseen"):
        series = result.series(condition, "none", "recall@1")
        print(f"{condition:<15} recall@1 across k_train={list(result.values)}: "
              + " ".join(f"{v:.3f}" for v in series))
    print(f"\nfull grid in {args.out}/sweep_k_train.csv")


if __name__ == "__main__":
    main()
