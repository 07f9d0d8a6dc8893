"""Retrieval quality scoring: reciprocal rank and recall over ranked results.

Two recall readings are supported. "fraction" counts how many of the top k
entries come from the ground-truth scene and divides by k; "hit" (the
default) asks only whether any of them do. Fraction recall cannot exceed 1/k
against a scene-aggregated index (one entry per scene), which is why hit is
the default for cross-setting comparisons.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .index import Index, RankedResult, full_ranking
from .store import write_json_atomic

RECALL_MODES = ("hit", "fraction")


def _first_correct_rank(ranked: RankedResult, gt_scene: str, k: float) -> int | None:
    """1-based rank of the first entry from gt_scene within the top k, if any."""
    for pos, hit in enumerate(ranked, start=1):
        if pos > k:
            break
        if hit.scene_id == gt_scene:
            return pos
    return None


def mrr(ranked: RankedResult, gt_scene: str, k: float = math.inf) -> float:
    """Reciprocal rank of the first gt_scene entry in the top k, else 0."""
    if not ranked:
        raise ValueError("empty ranking")
    rank = _first_correct_rank(ranked, gt_scene, k)
    return 0.0 if rank is None else 1.0 / rank


def recall_at_k(
    ranked: RankedResult, gt_scene: str, k: int, mode: str = "hit"
) -> float:
    """Recall over the top k entries, per the chosen mode."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if mode not in RECALL_MODES:
        raise ValueError(f"recall mode must be one of {RECALL_MODES}, got {mode!r}")
    correct = sum(1 for hit in ranked[:k] if hit.scene_id == gt_scene)
    if mode == "hit":
        return 1.0 if correct else 0.0
    return correct / k


@dataclass(frozen=True)
class QueryRow:
    query_id: str
    gt_scene: str
    first_correct_rank: int | None
    mrr: float
    recalls: dict[int, float]


@dataclass(frozen=True)
class MetricReport:
    """Per-query rows plus aggregate means over the query set."""

    ks: tuple[int, ...]
    recall_mode: str
    rows: tuple[QueryRow, ...]
    aggregates: dict[str, float]

    @property
    def query_count(self) -> int:
        return len(self.rows)

    def to_json_obj(self) -> dict:
        return {
            "ks": list(self.ks),
            "recall_mode": self.recall_mode,
            "aggregates": self.aggregates,
            "counts": {"queries": self.query_count},
            "rows": [
                {
                    "query_id": r.query_id,
                    "gt_scene": r.gt_scene,
                    "first_correct_rank": r.first_correct_rank,
                    "mrr": r.mrr,
                    "recalls": {str(k): v for k, v in r.recalls.items()},
                }
                for r in self.rows
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json_obj(cls, obj: dict) -> "MetricReport":
        return cls(
            ks=tuple(obj["ks"]),
            recall_mode=obj["recall_mode"],
            rows=tuple(
                QueryRow(
                    query_id=r["query_id"],
                    gt_scene=r["gt_scene"],
                    first_correct_rank=r["first_correct_rank"],
                    mrr=r["mrr"],
                    recalls={int(k): v for k, v in r["recalls"].items()},
                )
                for r in obj["rows"]
            ),
            aggregates=dict(obj["aggregates"]),
        )

    def to_csv(self) -> str:
        """One row per query plus a trailing aggregate row."""
        buf = io.StringIO()
        recall_cols = [f"recall@{k}" for k in self.ks]
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["query_id", "gt_scene", "first_correct_rank", "mrr"] + recall_cols)
        for r in self.rows:
            writer.writerow(
                [r.query_id, r.gt_scene, r.first_correct_rank if r.first_correct_rank is not None else "", repr(r.mrr)]
                + [repr(r.recalls[k]) for k in self.ks]
            )
        writer.writerow(
            ["__aggregate__", "", "", repr(self.aggregates["mrr"])]
            + [repr(self.aggregates[c]) for c in recall_cols]
        )
        return buf.getvalue()

    def save(self, json_path: str | Path, csv_path: str | Path | None = None) -> None:
        write_json_atomic(Path(json_path), self.to_json_obj())
        if csv_path is not None:
            Path(csv_path).write_text(self.to_csv(), "utf-8")


def evaluate(
    index: Index,
    queries: Sequence[tuple[np.ndarray, str]],
    ks: Sequence[int] = (1, 5),
    recall_mode: str = "hit",
    query_ids: Sequence[str] | None = None,
) -> MetricReport:
    """Rank the full index for every query and average MRR / recall@k.

    MRR uses k = infinity (rank over all entries). Aggregates are exact sums
    (math.fsum) divided by the query count, so they do not depend on query
    order. Inputs are immutable; queries are processed independently.
    """
    if not queries:
        raise ValueError("no queries to evaluate")
    if recall_mode not in RECALL_MODES:
        raise ValueError(f"recall mode must be one of {RECALL_MODES}, got {recall_mode!r}")
    ks = tuple(int(k) for k in ks)
    if any(k < 1 for k in ks):
        raise ValueError(f"all ks must be >= 1, got {ks}")
    if query_ids is None:
        query_ids = [f"q{i:05d}" for i in range(len(queries))]
    elif len(query_ids) != len(queries):
        raise ValueError("query_ids length does not match queries")

    rows = []
    for qid, (vec, gt_scene) in zip(query_ids, queries):
        ranked = full_ranking(index, vec)
        rank = _first_correct_rank(ranked, gt_scene, math.inf)
        rows.append(
            QueryRow(
                query_id=qid,
                gt_scene=gt_scene,
                first_correct_rank=rank,
                mrr=0.0 if rank is None else 1.0 / rank,
                recalls={k: recall_at_k(ranked, gt_scene, k, recall_mode) for k in ks},
            )
        )

    n = len(rows)
    aggregates = {"mrr": math.fsum(r.mrr for r in rows) / n}
    for k in ks:
        aggregates[f"recall@{k}"] = math.fsum(r.recalls[k] for r in rows) / n
    return MetricReport(
        ks=ks, recall_mode=recall_mode, rows=tuple(rows), aggregates=aggregates
    )
