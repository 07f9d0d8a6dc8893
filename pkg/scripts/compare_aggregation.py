#!/usr/bin/env python3
"""Compare the two scene-aggregation orders.

"pre-normalize" (the default) averages unit-normalized view vectors, making
the scene vector a spherical centroid; the alternative averages the raw
vectors first, so longer vectors dominate. Both are evaluated on the same
split and printed side by side.
"""
import argparse
from dataclasses import replace

from sceneret.harness import ExperimentConfig, SplitParams, SynthSpec, run_experiment


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--sigma", type=float, default=0.5)
    parser.add_argument("--k-db", type=int, default=20)
    args = parser.parse_args()

    base = ExperimentConfig(
        data=SynthSpec(
            n_scenes=100, views_per_scene=21, dim=64, sigma=args.sigma, nuisance_dims=48
        ),
        split=SplitParams(k_db=args.k_db, k_query=1),
        out_dir=f"{args.out}/pre_normalize",
        aggregation="mean",
        ks=(1, 5),
        seed=args.seed,
    )
    pre = run_experiment(base)["mean"].aggregates
    post = run_experiment(
        replace(
            base,
            aggregation_pre_normalize=False,
            out_dir=f"{args.out}/raw_mean",
        )
    )["mean"].aggregates

    print(f"{'variant':<15} {'recall@1':>9} {'recall@5':>9} {'mrr':>7}")
    for name, m in (("pre-normalize", pre), ("raw-mean", post)):
        print(f"{name:<15} {m['recall@1']:>9.3f} {m['recall@5']:>9.3f} {m['mrr']:>7.3f}")


if __name__ == "__main__":
    main()
