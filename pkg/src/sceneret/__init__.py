"""Scene retrieval over view-structured embedding stores.

Exact cosine top-k search over per-view or mean-aggregated scene vectors,
MRR/recall scoring, contrastive training of an MLP head over frozen
embeddings, and a config-driven experiment harness with k_db / k_train
ablation sweeps.
"""

from .index import (
    SCENE_AGGREGATE,
    Hit,
    Index,
    RankedResult,
    aggregate_scenes,
    build_index,
    cosine_similarity,
    full_ranking,
    index_from_vectors,
    load_index,
    query_top_k,
    save_index,
)
from .harness import (
    ExperimentConfig,
    SplitParams,
    StageError,
    SweepResult,
    SynthSpec,
    export_embeddings,
    run_experiment,
    sweep_kdb,
    sweep_ktrain,
)
from .metrics import MetricReport, evaluate, mrr, recall_at_k
from .store import (
    Dataset,
    DatasetConsistencyError,
    DatasetManifest,
    EmbeddingRecord,
    SplitSpec,
    make_split,
    read_dataset,
    write_dataset,
)
from .synth import synth_generate
from .trainer import (
    HeadParams,
    TrainConfig,
    TrainingDiverged,
    TrainResult,
    embed_with_head,
    forward,
    init_head,
    loss_gradients,
    nt_xent_loss,
    train,
)

__all__ = [
    "SCENE_AGGREGATE",
    "Dataset",
    "DatasetConsistencyError",
    "DatasetManifest",
    "EmbeddingRecord",
    "ExperimentConfig",
    "HeadParams",
    "Hit",
    "Index",
    "MetricReport",
    "RankedResult",
    "SplitParams",
    "SplitSpec",
    "StageError",
    "SweepResult",
    "SynthSpec",
    "TrainConfig",
    "TrainResult",
    "TrainingDiverged",
    "aggregate_scenes",
    "build_index",
    "cosine_similarity",
    "embed_with_head",
    "evaluate",
    "export_embeddings",
    "forward",
    "full_ranking",
    "index_from_vectors",
    "init_head",
    "load_index",
    "loss_gradients",
    "make_split",
    "mrr",
    "nt_xent_loss",
    "query_top_k",
    "read_dataset",
    "recall_at_k",
    "run_experiment",
    "save_index",
    "sweep_kdb",
    "sweep_ktrain",
    "synth_generate",
    "train",
    "write_dataset",
]
