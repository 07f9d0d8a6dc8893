"""Command-line surface for the retrieval engine.

Machine-readable output (JSON lines, reports) goes to stdout; human
diagnostics go to stderr. Exit codes: 0 success, 2 usage error, 1 runtime
failure (message names the failing pipeline stage).
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .index import aggregate_scenes, build_index, load_index, query_top_k, save_index
from .store import EmbeddingRecord, SplitSpec, read_dataset, write_dataset
from .synth import synth_generate


def _print_json(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def _cmd_synth(args) -> int:
    records = synth_generate(
        n_scenes=args.scenes,
        views_per_scene=args.views,
        dim=args.dim,
        sigma=args.sigma,
        nuisance_dims=args.nuisance,
        seed=args.seed,
    )
    manifest = write_dataset(records, args.out)
    _print_json(
        {"out": str(args.out), "records": manifest.record_count, "dim": manifest.dim}
    )
    return 0


def _cmd_ingest(args) -> int:
    dataset = read_dataset(args.data, access="streamed")
    summary = {
        "data": str(args.data),
        "records": dataset.record_count,
        "dim": dataset.dim,
        "scenes": len(dataset.manifest.scenes),
        "views_per_scene": {
            "min": min(len(v) for _, v in dataset.manifest.scenes),
            "max": max(len(v) for _, v in dataset.manifest.scenes),
        },
    }
    if args.out:
        records = [
            EmbeddingRecord(sid, vid, dataset.vector(sid, vid))
            for sid, views in dataset.manifest.scenes
            for vid in views
        ]
        write_dataset(records, args.out)
        summary["out"] = str(args.out)
    _print_json(summary)
    return 0


def _load_split(args) -> SplitSpec:
    if not args.split:
        raise ValueError("either --split or --index is required")
    split_path = Path(args.split)
    if not split_path.is_file():
        raise FileNotFoundError(f"split file not found: {split_path}")
    return SplitSpec.load(split_path)


def _cmd_index(args) -> int:
    dataset = read_dataset(args.data)
    split = _load_split(args)
    index = build_index(dataset, split.db_selector())
    if args.agg == "mean":
        index = aggregate_scenes(index)
    save_index(index, args.out)
    _print_json({"out": str(args.out), "entries": len(index), "dim": index.dim, "level": index.level})
    return 0


def _cmd_query(args) -> int:
    dataset = read_dataset(args.data)
    if args.index:
        index = load_index(args.index)
    else:
        split = _load_split(args)
        index = build_index(dataset, split.db_selector())
        if args.agg == "mean":
            index = aggregate_scenes(index)
    try:
        scene_id, view_id = args.query_id.split("/", 1)
    except ValueError:
        raise ValueError(
            f"--query-id must look like SCENE/VIEW, got {args.query_id!r}"
        ) from None
    q = dataset.vector(scene_id, view_id)
    if args.k > len(index):
        print(
            f"warning: k={args.k} exceeds index size {len(index)}; returning full ranking",
            file=sys.stderr,
        )
    for hit in query_top_k(index, q, args.k):
        _print_json({"scene_id": hit.scene_id, "view_id": hit.view_id, "score": hit.score})
    return 0


def _load_experiment_config(args) -> harness.ExperimentConfig:
    config = harness.ExperimentConfig.load(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.out is not None:
        config = replace(config, out_dir=str(args.out))
    return config


def _cmd_train(args) -> int:
    config = _load_experiment_config(args)
    result = harness.train_only(config)
    _print_json(
        {
            "checkpoint": str(Path(config.out_dir) / "head.ckpt"),
            "batches": len(result.losses),
            "first_loss": result.losses[0][2],
            "final_loss": result.losses[-1][2],
        }
    )
    return 0


def _cmd_eval(args) -> int:
    config = _load_experiment_config(args)
    reports = harness.run_experiment(config)
    for label in sorted(reports):
        _print_json(
            {"aggregation": label, "out_dir": config.out_dir, **reports[label].aggregates}
        )
    return 0


def _cmd_sweep(args) -> int:
    raw = json.loads(Path(args.config).read_text("utf-8"))
    if "sweep" not in raw or "experiment" not in raw:
        raise ValueError("sweep config must carry 'experiment' and 'sweep' sections")
    config = harness.ExperimentConfig.from_json_obj(raw["experiment"])
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.out is not None:
        config = replace(config, out_dir=str(args.out))
    axis = raw["sweep"]["axis"]
    values = raw["sweep"]["values"]
    if axis == "k_db":
        result = harness.sweep_kdb(config, values)
    elif axis == "k_train":
        result = harness.sweep_ktrain(config, values)
    else:
        raise ValueError(f"sweep axis must be 'k_db' or 'k_train', got {axis!r}")
    csv_path = Path(config.out_dir) / f"sweep_{axis}.csv"
    _print_json(
        {"csv": str(csv_path), "points": len(result.values), "axis": result.axis}
    )
    return 0


def _cmd_export(args) -> int:
    config = _load_experiment_config(args)
    export_dir = harness.export_embeddings(config, args.stage)
    _print_json({"out": str(export_dir), "stage": args.stage})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sceneret",
        description="Exact cosine retrieval and contrastive training over scene/view embeddings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--scenes", type=int, required=True)
    p.add_argument("--views", type=int, required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--nuisance", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("ingest", help="validate a dataset, optionally rewriting it")
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("index", help="build and cache an index from a split's db views")
    p.add_argument("--data", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--agg", choices=["none", "mean"], default="none")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_index)

    p = sub.add_parser("query", help="rank database entries against a stored query vector")
    p.add_argument("--data", required=True)
    p.add_argument("--split", default=None)
    p.add_argument("--index", default=None, help="load a cached index instead of building")
    p.add_argument("--agg", choices=["none", "mean"], default="none")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--query-id", required=True, help="SCENE/VIEW of the query record")
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("train", help="train the contrastive head for a config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="run an experiment config end to end")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="run a k_db or k_train ablation sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("export", help="export raw or trained representations")
    p.add_argument("--config", required=True)
    p.add_argument("--stage", choices=["raw", "trained"], required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_export)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except harness.StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: [{args.command}] {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
