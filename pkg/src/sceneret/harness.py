"""Config-driven experiment pipeline: split, train, index, aggregate, score.

One root seed drives everything: per-component seeds (synthetic data, split
sampling, training) are derived from it hierarchically, so a persisted
config reproduces its reports bit for bit, and individual components can be
varied without disturbing the others.

Sweeps rely on the split construction's nesting guarantees: for a fixed
split seed, the database views at a smaller k_db are a prefix of those at a
larger k_db (and likewise train views across k_train), while query views
stay fixed. The k_db axis therefore isolates database size, and the
zero-shot series is constant across k_train.
"""
from __future__ import annotations

import contextlib
import csv
import io
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from .index import Index, aggregate_scenes, build_index, index_from_vectors, selected_keys
from .metrics import MetricReport, evaluate
from .store import (
    Dataset,
    SplitSpec,
    make_split,
    read_dataset,
    write_dataset,
    write_json_atomic,
)
from .synth import synth_generate
from .trainer import (
    HeadParams,
    TrainConfig,
    TrainResult,
    embed_batch,
    load_checkpoint,
    save_checkpoint,
    train,
)

AGGREGATIONS = ("none", "mean", "both")
CONDITIONS = ("zero_shot", "trained_seen", "trained_unseen")


class StageError(RuntimeError):
    """Pipeline failure, tagged with the stage that raised it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage


@contextlib.contextmanager
def _stage(name: str) -> Iterator[None]:
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


@dataclass(frozen=True)
class SynthSpec:
    n_scenes: int
    views_per_scene: int
    dim: int
    sigma: float
    nuisance_dims: int

    def to_json_obj(self) -> dict:
        return {
            "n_scenes": self.n_scenes,
            "views_per_scene": self.views_per_scene,
            "dim": self.dim,
            "sigma": self.sigma,
            "nuisance_dims": self.nuisance_dims,
        }

    @classmethod
    def from_json_obj(cls, obj: Mapping) -> "SynthSpec":
        return cls(
            n_scenes=int(obj["n_scenes"]),
            views_per_scene=int(obj["views_per_scene"]),
            dim=int(obj["dim"]),
            sigma=float(obj["sigma"]),
            nuisance_dims=int(obj["nuisance_dims"]),
        )


@dataclass(frozen=True)
class SplitParams:
    k_db: int
    k_query: int = 1
    k_train: int = 0
    mode: str = "seen"

    def to_json_obj(self) -> dict:
        return {
            "k_db": self.k_db,
            "k_query": self.k_query,
            "k_train": self.k_train,
            "mode": self.mode,
        }

    @classmethod
    def from_json_obj(cls, obj: Mapping) -> "SplitParams":
        return cls(
            k_db=int(obj["k_db"]),
            k_query=int(obj.get("k_query", 1)),
            k_train=int(obj.get("k_train", 0)),
            mode=obj.get("mode", "seen"),
        )


@dataclass(frozen=True)
class ExperimentConfig:
    data: str | SynthSpec
    split: SplitParams
    out_dir: str
    stage: str = "raw"  # "raw" | "trained"
    train: TrainConfig | None = None
    aggregation: str = "none"  # "none" | "mean" | "both"
    aggregation_pre_normalize: bool = True
    ks: tuple[int, ...] = (1, 5)
    recall_mode: str = "hit"
    seed: int = 0

    def __post_init__(self):
        if self.stage not in ("raw", "trained"):
            raise ValueError(f"stage must be 'raw' or 'trained', got {self.stage!r}")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(
                f"aggregation must be one of {AGGREGATIONS}, got {self.aggregation!r}"
            )
        if self.stage == "trained" and self.train is None:
            object.__setattr__(self, "train", TrainConfig())
        object.__setattr__(self, "ks", tuple(int(k) for k in self.ks))

    def to_json_obj(self) -> dict:
        data = (
            {"path": self.data}
            if isinstance(self.data, str)
            else {"synth": self.data.to_json_obj()}
        )
        return {
            "data": data,
            "split": self.split.to_json_obj(),
            "stage": self.stage,
            "train": self.train.to_json_obj() if self.train is not None else None,
            "aggregation": self.aggregation,
            "aggregation_pre_normalize": self.aggregation_pre_normalize,
            "ks": list(self.ks),
            "recall_mode": self.recall_mode,
            "seed": self.seed,
            "out_dir": self.out_dir,
        }

    @classmethod
    def from_json_obj(cls, obj: Mapping) -> "ExperimentConfig":
        data_obj = obj["data"]
        if "path" in data_obj:
            data: str | SynthSpec = data_obj["path"]
        elif "synth" in data_obj:
            data = SynthSpec.from_json_obj(data_obj["synth"])
        else:
            raise ValueError("config data must carry either 'path' or 'synth'")
        return cls(
            data=data,
            split=SplitParams.from_json_obj(obj["split"]),
            out_dir=obj["out_dir"],
            stage=obj.get("stage", "raw"),
            train=(
                TrainConfig.from_json_obj(obj["train"])
                if obj.get("train") is not None
                else None
            ),
            aggregation=obj.get("aggregation", "none"),
            aggregation_pre_normalize=bool(obj.get("aggregation_pre_normalize", True)),
            ks=tuple(obj.get("ks", (1, 5))),
            recall_mode=obj.get("recall_mode", "hit"),
            seed=int(obj.get("seed", 0)),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_json_obj(json.loads(Path(path).read_text("utf-8")))


def derive_seeds(root_seed: int) -> dict[str, int]:
    """Hierarchical sub-seeds for the synth, split, and train components."""
    children = np.random.SeedSequence(root_seed).spawn(3)
    names = ("synth", "split", "train")
    return {n: int(c.generate_state(1)[0]) for n, c in zip(names, children)}


def _prepare_dataset(config: ExperimentConfig, seeds: Mapping[str, int], out: Path) -> Dataset:
    if isinstance(config.data, str):
        return read_dataset(config.data)
    records = synth_generate(
        n_scenes=config.data.n_scenes,
        views_per_scene=config.data.views_per_scene,
        dim=config.data.dim,
        sigma=config.data.sigma,
        nuisance_dims=config.data.nuisance_dims,
        seed=seeds["synth"],
    )
    data_dir = out / "dataset"
    write_dataset(records, data_dir)
    return read_dataset(data_dir)


def _representation(
    head: HeadParams | None, vectors: np.ndarray
) -> np.ndarray:
    if head is None:
        return vectors
    return embed_batch(head, vectors)


def _query_items(
    dataset: Dataset, split: SplitSpec, head: HeadParams | None
) -> tuple[list[tuple[np.ndarray, str]], list[str]]:
    keys = [
        (s.scene_id, vid) for s in split.scenes for vid in s.query_views
    ]
    raw = dataset.vectors_for(keys)
    rep = _representation(head, raw)
    queries = [(rep[i], keys[i][0]) for i in range(len(keys))]
    ids = [f"{sid}/{vid}" for sid, vid in keys]
    return queries, ids


def _build_active_index(
    dataset: Dataset, split: SplitSpec, head: HeadParams | None
) -> Index:
    if head is None:
        return build_index(dataset, split.db_selector())
    keys = selected_keys(dataset, split.db_selector())
    reps = embed_batch(head, dataset.vectors_for(keys))
    return index_from_vectors(keys, reps, level="view")


def _setup_run(
    config: ExperimentConfig,
) -> tuple[Path, dict[str, int], Dataset, SplitSpec]:
    """Shared data + split stages; persists the resolved config and split."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds = derive_seeds(config.seed)

    resolved = config.to_json_obj()
    resolved["derived_seeds"] = seeds
    write_json_atomic(out / "config.json", resolved)

    with _stage("data"):
        dataset = _prepare_dataset(config, seeds, out)

    with _stage("split"):
        sp = config.split
        split = make_split(
            dataset.manifest,
            k_train=sp.k_train,
            k_db=sp.k_db,
            k_query=sp.k_query,
            mode=sp.mode,
            seed=seeds["split"],
        )
        split.save(out / "split.json")
    return out, seeds, dataset, split


def _train_stage(
    config: ExperimentConfig,
    out: Path,
    seeds: Mapping[str, int],
    dataset: Dataset,
    split: SplitSpec,
) -> TrainResult:
    with _stage("train"):
        assert config.train is not None
        train_cfg = replace(config.train, seed=seeds["train"])
        result = train(dataset, split, train_cfg)
        save_checkpoint(result.head, train_cfg, out / "head.ckpt")
        (out / "loss.csv").write_text(result.loss_csv(), "utf-8")
    return result


def train_only(config: ExperimentConfig) -> TrainResult:
    """Run just the data, split and train stages, persisting the checkpoint."""
    cfg = replace(config, stage="trained")
    out, seeds, dataset, split = _setup_run(cfg)
    return _train_stage(cfg, out, seeds, dataset, split)


def run_experiment(config: ExperimentConfig) -> dict[str, MetricReport]:
    """Run the full pipeline and return reports keyed by aggregation label.

    Persists every artifact (resolved config, synthetic dataset, split,
    checkpoint, loss trajectory, reports) under ``config.out_dir``, so the
    run is exactly reproducible from disk.
    """
    out, seeds, dataset, split = _setup_run(config)

    head: HeadParams | None = None
    if config.stage == "trained":
        head = _train_stage(config, out, seeds, dataset, split).head

    with _stage("index"):
        view_index = _build_active_index(dataset, split, head)

    indexes: dict[str, Index] = {}
    if config.aggregation in ("none", "both"):
        indexes["none"] = view_index
    if config.aggregation in ("mean", "both"):
        with _stage("aggregate"):
            indexes["mean"] = aggregate_scenes(
                view_index, pre_normalize=config.aggregation_pre_normalize
            )

    with _stage("evaluate"):
        queries, query_ids = _query_items(dataset, split, head)
        reports = {
            label: evaluate(
                idx, queries, ks=config.ks, recall_mode=config.recall_mode, query_ids=query_ids
            )
            for label, idx in indexes.items()
        }

    with _stage("report"):
        for label, report in reports.items():
            report.save(out / f"report_{label}.json", out / f"report_{label}.csv")
    return reports


@dataclass(frozen=True)
class SweepResult:
    axis: str
    values: tuple[int, ...]
    ks: tuple[int, ...]
    # (value, condition, aggregation) -> aggregate metrics
    summaries: dict[tuple[int, str, str], dict[str, float]]

    def series(self, condition: str, aggregation: str, metric: str) -> list[float]:
        return [self.summaries[(v, condition, aggregation)][metric] for v in self.values]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        metric_cols = ["mrr"] + [f"recall@{k}" for k in self.ks]
        writer.writerow([self.axis, "condition", "aggregation"] + metric_cols)
        for v in self.values:
            for condition in CONDITIONS:
                for agg in ("none", "mean"):
                    summary = self.summaries[(v, condition, agg)]
                    writer.writerow(
                        [v, condition, agg] + [repr(summary[c]) for c in metric_cols]
                    )
        return buf.getvalue()

    def save_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(), "utf-8")


def _condition_config(
    config: ExperimentConfig, condition: str, split: SplitParams, out_dir: Path
) -> ExperimentConfig:
    if condition == "zero_shot":
        return replace(
            config,
            stage="raw",
            train=None,
            split=replace(split, k_train=0, mode="seen"),
            aggregation="both",
            out_dir=str(out_dir),
        )
    mode = "seen" if condition == "trained_seen" else "unseen"
    return replace(
        config,
        stage="trained",
        train=config.train if config.train is not None else TrainConfig(),
        split=replace(split, mode=mode),
        aggregation="both",
        out_dir=str(out_dir),
    )


def _run_sweep(
    config: ExperimentConfig, axis: str, values: Sequence[int]
) -> SweepResult:
    out = Path(config.out_dir)
    summaries: dict[tuple[int, str, str], dict[str, float]] = {}
    for value in values:
        if axis == "k_db":
            split = replace(config.split, k_db=int(value))
        else:
            split = replace(config.split, k_train=int(value))
        for condition in CONDITIONS:
            point_dir = out / f"{axis}={value}" / condition
            cfg = _condition_config(config, condition, split, point_dir)
            reports = run_experiment(cfg)
            for agg, report in reports.items():
                summaries[(int(value), condition, agg)] = dict(report.aggregates)
    result = SweepResult(
        axis=axis, values=tuple(int(v) for v in values), ks=config.ks, summaries=summaries
    )
    result.save_csv(out / f"sweep_{axis}.csv")
    return result


def sweep_kdb(config: ExperimentConfig, values: Sequence[int]) -> SweepResult:
    """Evaluate all conditions across database sizes (nested db subsets)."""
    if not values:
        raise ValueError("no k_db values given")
    if any(int(v) < 1 for v in values):
        raise ValueError(f"k_db values must be >= 1, got {list(values)}")
    return _run_sweep(config, "k_db", values)


def sweep_ktrain(config: ExperimentConfig, values: Sequence[int]) -> SweepResult:
    """Train at each k_train and evaluate seen/unseen, with a zero-shot baseline."""
    if not values:
        raise ValueError("no k_train values given")
    if any(int(v) < 2 for v in values):
        raise ValueError(
            f"k_train values must be >= 2 (a positive pair needs two views), "
            f"got {list(values)}"
        )
    return _run_sweep(config, "k_train", values)


def export_embeddings(config: ExperimentConfig, stage: str) -> Path:
    """Write the split's records (raw or trunk representations) as a dataset.

    Output lands in ``<out_dir>/export_<stage>/`` in the canonical store
    format, with a ``roles.csv`` tagging each record's split roles. The
    trained stage requires ``<out_dir>/head.ckpt`` from a previous run.
    """
    if stage not in ("raw", "trained"):
        raise ValueError(f"stage must be 'raw' or 'trained', got {stage!r}")
    out = Path(config.out_dir)
    seeds = derive_seeds(config.seed)

    with _stage("data"):
        dataset = _prepare_dataset(config, seeds, out)
    with _stage("split"):
        sp = config.split
        split = make_split(
            dataset.manifest,
            k_train=sp.k_train,
            k_db=sp.k_db,
            k_query=sp.k_query,
            mode=sp.mode,
            seed=seeds["split"],
        )

    head: HeadParams | None = None
    if stage == "trained":
        ckpt = out / "head.ckpt"
        if not ckpt.is_file():
            raise StageError("export", FileNotFoundError(f"missing checkpoint {ckpt}"))
        head, _ = load_checkpoint(ckpt)

    roles: dict[tuple[str, str], list[str]] = {}
    for s in split.scenes:
        for role, views in (
            ("train", s.train_views),
            ("db", s.db_views),
            ("query", s.query_views),
        ):
            for vid in views:
                roles.setdefault((s.scene_id, vid), []).append(role)

    keys = [
        (sid, vid)
        for sid, views in dataset.manifest.scenes
        for vid in views
        if (sid, vid) in roles
    ]

    with _stage("export"):
        raw = dataset.vectors_for(keys)
        rep = _representation(head, raw)
        from .store import EmbeddingRecord

        records = [
            EmbeddingRecord(scene_id=sid, view_id=vid, vector=rep[i])
            for i, (sid, vid) in enumerate(keys)
        ]
        export_dir = out / f"export_{stage}"
        write_dataset(records, export_dir)

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["scene_id", "view_id", "roles"])
        for sid, vid in keys:
            writer.writerow([sid, vid, "+".join(roles[(sid, vid)])])
        (export_dir / "roles.csv").write_text(buf.getvalue(), "utf-8")
    return export_dir
