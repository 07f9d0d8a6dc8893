"""Exact cosine-similarity indexing and top-k retrieval.

The index holds unit-normalized float32 copies of the selected database
vectors in manifest order and is immutable after build. Queries are an exact
full scan: scores are inner products against the normalized matrix, computed
in float64 from the stored float32 rows so that results are reproducible and
independent of how the index was obtained (fresh build or cache load).
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .store import Dataset, write_json_atomic

SCENE_AGGREGATE = "__scene_mean__"

NORM_TOLERANCE = 1e-6

INDEX_META_NAME = "index.json"
INDEX_VECTORS_NAME = "vectors.bin"


class Hit(NamedTuple):
    scene_id: str
    view_id: str
    score: float


RankedResult = list[Hit]


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine of the angle between u and v, in [-1, 1]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError(f"shape mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine similarity undefined for zero-norm input")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


@dataclass(frozen=True, eq=False)
class Index:
    """Frozen table of unit-normalized vectors with their (scene, view) ids.

    ``level`` is "view" for per-view entries, "scene" after aggregation (the
    view id of a scene entry is ``SCENE_AGGREGATE``). ``norms`` holds each
    entry's pre-normalization L2 norm. Safe for concurrent queries.
    """

    level: str
    dim: int
    entries: tuple[tuple[str, str], ...]
    matrix: np.ndarray
    norms: np.ndarray
    _unit64: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.matrix.shape != (len(self.entries), self.dim):
            raise ValueError(
                f"matrix shape {self.matrix.shape} does not match "
                f"{len(self.entries)} entries of dim {self.dim}"
            )
        self.matrix.flags.writeable = False
        self.norms.flags.writeable = False
        unit64 = self.matrix.astype(np.float64)
        unit64.flags.writeable = False
        object.__setattr__(self, "_unit64", unit64)

    def __len__(self) -> int:
        return len(self.entries)


def _normalize_rows(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit-normalize rows (float64 arithmetic, float32 result)."""
    raw64 = raw.astype(np.float64)
    norms = np.linalg.norm(raw64, axis=1)
    return (raw64 / norms[:, None]).astype(np.float32), norms


def selected_keys(
    dataset: Dataset, selector: Mapping[str, Sequence[str]]
) -> list[tuple[str, str]]:
    """Resolve a scene -> views selector to keys in manifest order."""
    wanted = {sid: set(views) for sid, views in selector.items()}
    keys: list[tuple[str, str]] = []
    for sid, views in dataset.manifest.scenes:
        take = wanted.get(sid)
        if not take:
            continue
        for vid in views:
            if vid in take:
                keys.append((sid, vid))
                take.discard(vid)
    missing = [(sid, vid) for sid, take in wanted.items() for vid in sorted(take)]
    if missing:
        raise ValueError(f"selector names records not in the dataset: {missing[:5]}")
    if not keys:
        raise ValueError("selector matches no records; refusing to build an empty index")
    return keys


def build_index(dataset: Dataset, selector: Mapping[str, Sequence[str]]) -> Index:
    """Build a view-level index over the selected (scene, view) records.

    Entry order is manifest order filtered by the selector, so two builds
    from the same inputs are bitwise identical.
    """
    keys = selected_keys(dataset, selector)
    raw = dataset.vectors_for(keys)
    norms64 = np.linalg.norm(raw.astype(np.float64), axis=1)
    zero = np.nonzero(norms64 == 0.0)[0]
    if zero.size:
        sid, vid = keys[int(zero[0])]
        raise ValueError(f"zero vector for ({sid!r}, {vid!r}) cannot be indexed")

    matrix, norms = _normalize_rows(raw)
    return Index(
        level="view",
        dim=dataset.dim,
        entries=tuple(keys),
        matrix=matrix,
        norms=norms,
    )


def index_from_vectors(
    entries: Sequence[tuple[str, str]], raw: np.ndarray, level: str = "view"
) -> Index:
    """Build an index directly from raw (unnormalized) vectors."""
    raw = np.asarray(raw, dtype=np.float32)
    norms64 = np.linalg.norm(raw.astype(np.float64), axis=1)
    zero = np.nonzero(norms64 == 0.0)[0]
    if zero.size:
        sid, vid = entries[int(zero[0])]
        raise ValueError(f"zero vector for ({sid!r}, {vid!r}) cannot be indexed")
    matrix, norms = _normalize_rows(raw)
    return Index(
        level=level, dim=raw.shape[1], entries=tuple(entries), matrix=matrix, norms=norms
    )


def aggregate_scenes(index: Index, pre_normalize: bool = True) -> Index:
    """Collapse a view-level index to one mean vector per scene.

    With ``pre_normalize`` (default) the mean is taken over the stored
    unit-normalized view vectors; otherwise over the original raw vectors.
    Either way the mean is renormalized for storage, except when its norm is
    already within the index norm tolerance of 1 (notably a single-view
    scene, whose aggregate is then exactly its view vector).
    """
    if index.level != "view":
        raise ValueError(f"can only aggregate a view-level index, got {index.level!r}")

    scene_order: list[str] = []
    rows_by_scene: dict[str, list[int]] = {}
    for i, (sid, _) in enumerate(index.entries):
        if sid not in rows_by_scene:
            scene_order.append(sid)
            rows_by_scene[sid] = []
        rows_by_scene[sid].append(i)

    source = index._unit64
    if not pre_normalize:
        source = index._unit64 * index.norms[:, None]

    matrix = np.empty((len(scene_order), index.dim), dtype=np.float32)
    norms = np.empty(len(scene_order), dtype=np.float64)
    for s, sid in enumerate(scene_order):
        mean = source[rows_by_scene[sid]].mean(axis=0)
        norm = float(np.linalg.norm(mean))
        if norm < 1e-12:
            raise ValueError(
                f"scene {sid!r} aggregates to the zero vector (antipodal views)"
            )
        if abs(norm - 1.0) > NORM_TOLERANCE:
            mean = mean / norm
        matrix[s] = mean.astype(np.float32)
        norms[s] = norm

    entries = tuple((sid, SCENE_AGGREGATE) for sid in scene_order)
    return Index(level="scene", dim=index.dim, entries=entries, matrix=matrix, norms=norms)


def _prepare_query(index: Index, q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    if q.shape[0] != index.dim:
        raise ValueError(f"query dim {q.shape[0]} != index dim {index.dim}")
    norm = np.linalg.norm(q)
    if norm == 0.0:
        raise ValueError("zero-norm query")
    return q / norm


def query_top_k(index: Index, q: np.ndarray, k: int) -> RankedResult:
    """Exact top-k entries by cosine similarity to q.

    Ties are broken by ascending entry index. k larger than the index size
    returns the full ranking.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    qn = _prepare_query(index, q)
    scores = np.clip(index._unit64 @ qn, -1.0, 1.0)
    order = np.argsort(-scores, kind="stable")[: min(k, len(index))]
    return [
        Hit(index.entries[i][0], index.entries[i][1], float(scores[i])) for i in order
    ]


def full_ranking(index: Index, q: np.ndarray) -> RankedResult:
    """Rank every entry of the index against q."""
    return query_top_k(index, q, len(index))


def save_index(index: Index, path: str | Path) -> None:
    """Persist an index as a float32 matrix plus JSON sidecar."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    tmp = out / (INDEX_VECTORS_NAME + ".tmp")
    tmp.write_bytes(index.matrix.tobytes(order="C"))
    os.replace(tmp, out / INDEX_VECTORS_NAME)
    write_json_atomic(
        out / INDEX_META_NAME,
        {
            "level": index.level,
            "dim": index.dim,
            "entries": [[sid, vid] for sid, vid in index.entries],
            "norms": [float(x) for x in index.norms],
        },
    )


def load_index(path: str | Path) -> Index:
    """Load a cached index; equivalent bit-for-bit to rebuilding it."""
    src = Path(path)
    meta = json.loads((src / INDEX_META_NAME).read_text("utf-8"))
    entries = tuple((sid, vid) for sid, vid in meta["entries"])
    matrix = np.fromfile(src / INDEX_VECTORS_NAME, dtype="<f4")
    if matrix.size != len(entries) * meta["dim"]:
        raise ValueError(
            f"index cache at {src} holds {matrix.size} floats, "
            f"expected {len(entries) * meta['dim']}"
        )
    matrix = matrix.reshape(len(entries), meta["dim"])
    norms = np.asarray(meta["norms"], dtype=np.float64)
    return Index(
        level=meta["level"], dim=meta["dim"], entries=entries, matrix=matrix, norms=norms
    )
