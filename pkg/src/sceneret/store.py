"""On-disk embedding datasets: canonical file format, validation, and splits.

A dataset is a directory holding two files:

- ``manifest.json``: scene/view structure plus ``dim``, ``dtype`` and
  ``record_count``. The dense record index of a view is its position in
  depth-first manifest order (scenes in order, views in order).
- ``embeddings.bin``: ``record_count x dim`` little-endian IEEE-754 float32,
  row-major, no header, no padding.

Vectors are stored exactly as ingested (unnormalized); normalization is the
index's concern.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

DTYPE_TAG = "f32le"
MANIFEST_NAME = "manifest.json"
VECTORS_NAME = "embeddings.bin"
SPLIT_NAME = "split.json"

_SCAN_CHUNK_ROWS = 256


class DatasetConsistencyError(RuntimeError):
    """Manifest and binary file disagree, or stored vectors are not finite."""


def _write_atomic(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def write_json_atomic(path: Path, obj) -> None:
    _write_atomic(Path(path), (json.dumps(obj, indent=2) + "\n").encode("utf-8"))


@dataclass(frozen=True, eq=False)
class EmbeddingRecord:
    """One view's vector, keyed by (scene_id, view_id)."""

    scene_id: str
    view_id: str
    vector: np.ndarray


@dataclass(frozen=True)
class DatasetManifest:
    """Scene/view structure of a dataset, fixing the dense record order."""

    dim: int
    record_count: int
    scenes: tuple[tuple[str, tuple[str, ...]], ...]
    dtype: str = DTYPE_TAG

    def to_json_obj(self) -> dict:
        return {
            "dim": self.dim,
            "dtype": self.dtype,
            "record_count": self.record_count,
            "scenes": [
                {"scene_id": sid, "views": [{"view_id": vid} for vid in views]}
                for sid, views in self.scenes
            ],
        }

    @classmethod
    def from_json_obj(cls, obj: Mapping) -> "DatasetManifest":
        if obj.get("dtype") != DTYPE_TAG:
            raise DatasetConsistencyError(
                f"unsupported dtype tag {obj.get('dtype')!r}, expected {DTYPE_TAG!r}"
            )
        scenes = tuple(
            (s["scene_id"], tuple(v["view_id"] for v in s["views"]))
            for s in obj["scenes"]
        )
        n = sum(len(views) for _, views in scenes)
        if n != obj["record_count"]:
            raise DatasetConsistencyError(
                f"manifest record_count {obj['record_count']} != {n} views listed"
            )
        return cls(dim=int(obj["dim"]), record_count=n, scenes=scenes)

    def index_map(self) -> dict[tuple[str, str], int]:
        """(scene_id, view_id) -> dense record index, in manifest order."""
        out: dict[tuple[str, str], int] = {}
        i = 0
        for sid, views in self.scenes:
            for vid in views:
                out[(sid, vid)] = i
                i += 1
        return out

    def scene_ids(self) -> list[str]:
        return [sid for sid, _ in self.scenes]

    def views_of(self, scene_id: str) -> tuple[str, ...]:
        for sid, views in self.scenes:
            if sid == scene_id:
                return views
        raise KeyError(f"unknown scene {scene_id!r}")


def _validate_records(records: Sequence[EmbeddingRecord]) -> int:
    if not records:
        raise ValueError("cannot write an empty dataset")
    dim = None
    seen: set[tuple[str, str]] = set()
    for rec in records:
        vec = np.asarray(rec.vector)
        if vec.ndim != 1:
            raise ValueError(
                f"vector for ({rec.scene_id!r}, {rec.view_id!r}) must be 1-D, "
                f"got shape {vec.shape}"
            )
        if dim is None:
            dim = vec.shape[0]
        elif vec.shape[0] != dim:
            raise ValueError(
                f"dimension mismatch: ({rec.scene_id!r}, {rec.view_id!r}) has "
                f"dim {vec.shape[0]}, expected {dim}"
            )
        if not np.isfinite(vec).all():
            raise ValueError(
                f"non-finite values in vector for ({rec.scene_id!r}, {rec.view_id!r})"
            )
        key = (rec.scene_id, rec.view_id)
        if key in seen:
            raise ValueError(f"duplicate key ({rec.scene_id!r}, {rec.view_id!r})")
        seen.add(key)
    assert dim is not None
    return dim


def write_dataset(records: Sequence[EmbeddingRecord], path: str | Path) -> DatasetManifest:
    """Write records to ``path`` as manifest.json + embeddings.bin.

    Records are grouped by scene in first-appearance order; view order within
    a scene follows the input order. Returns the manifest matching the files
    on disk.
    """
    dim = _validate_records(records)

    scene_order: list[str] = []
    by_scene: dict[str, list[EmbeddingRecord]] = {}
    for rec in records:
        if rec.scene_id not in by_scene:
            scene_order.append(rec.scene_id)
            by_scene[rec.scene_id] = []
        by_scene[rec.scene_id].append(rec)

    scenes = tuple(
        (sid, tuple(r.view_id for r in by_scene[sid])) for sid in scene_order
    )
    manifest = DatasetManifest(dim=dim, record_count=len(records), scenes=scenes)

    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    matrix = np.empty((len(records), dim), dtype=np.float32)
    i = 0
    for sid in scene_order:
        for rec in by_scene[sid]:
            matrix[i] = np.asarray(rec.vector, dtype=np.float32)
            i += 1
    _write_atomic(out / VECTORS_NAME, matrix.tobytes(order="C"))
    write_json_atomic(out / MANIFEST_NAME, manifest.to_json_obj())
    return manifest


class Dataset:
    """Read handle over a dataset directory. Immutable after open.

    ``access="eager"`` loads the full matrix; ``access="streamed"`` memory-maps
    the binary file and materializes rows only on demand, so the full dataset
    is never held as a Python-owned copy.
    """

    def __init__(self, path: str | Path, access: str = "eager"):
        if access not in ("eager", "streamed"):
            raise ValueError(f"access must be 'eager' or 'streamed', got {access!r}")
        self.path = Path(path)
        self.access = access

        manifest_path = self.path / MANIFEST_NAME
        bin_path = self.path / VECTORS_NAME
        if not manifest_path.is_file():
            raise FileNotFoundError(f"missing {manifest_path}")
        if not bin_path.is_file():
            raise FileNotFoundError(f"missing {bin_path}")

        self.manifest = DatasetManifest.from_json_obj(
            json.loads(manifest_path.read_text("utf-8"))
        )
        expected = self.manifest.record_count * self.manifest.dim * 4
        actual = bin_path.stat().st_size
        if actual != expected:
            raise DatasetConsistencyError(
                f"{bin_path} is {actual} bytes, manifest implies {expected}"
            )

        shape = (self.manifest.record_count, self.manifest.dim)
        if access == "eager":
            self._rows = np.fromfile(bin_path, dtype="<f4").reshape(shape)
            self._rows.flags.writeable = False
        else:
            self._rows = np.memmap(bin_path, dtype="<f4", mode="r", shape=shape)
        self._index = self.manifest.index_map()
        self._keys = list(self._index)
        self._validate_finite()

    def _validate_finite(self) -> None:
        for start, chunk in self.iter_chunks():
            bad = ~np.isfinite(chunk)
            if bad.any():
                row = start + int(np.argwhere(bad)[0][0])
                sid, vid = self.key_at(row)
                raise DatasetConsistencyError(
                    f"non-finite value in record {row} ({sid!r}, {vid!r})"
                )

    @property
    def dim(self) -> int:
        return self.manifest.dim

    @property
    def record_count(self) -> int:
        return self.manifest.record_count

    def key_at(self, index: int) -> tuple[str, str]:
        return self._keys[index]

    def vector_at(self, index: int) -> np.ndarray:
        row = self._rows[index]
        if self.access == "streamed":
            return np.array(row)
        return row

    def vector(self, scene_id: str, view_id: str) -> np.ndarray:
        try:
            return self.vector_at(self._index[(scene_id, view_id)])
        except KeyError:
            raise KeyError(f"no record for ({scene_id!r}, {view_id!r})") from None

    def has(self, scene_id: str, view_id: str) -> bool:
        return (scene_id, view_id) in self._index

    def vectors_for(self, keys: Sequence[tuple[str, str]]) -> np.ndarray:
        """Gather rows for the given keys into a (len(keys), dim) float32 array."""
        out = np.empty((len(keys), self.dim), dtype=np.float32)
        for i, (sid, vid) in enumerate(keys):
            out[i] = self.vector(sid, vid)
        return out

    def iter_chunks(self, rows: int = _SCAN_CHUNK_ROWS) -> Iterator[tuple[int, np.ndarray]]:
        """Yield (start_index, chunk) pairs scanning the matrix in order."""
        for start in range(0, self.record_count, rows):
            chunk = self._rows[start : start + rows]
            if self.access == "streamed":
                chunk = np.array(chunk)
            yield start, chunk


def read_dataset(path: str | Path, access: str = "eager") -> Dataset:
    """Open a dataset directory, validating consistency and finiteness."""
    return Dataset(path, access=access)


@dataclass(frozen=True)
class SceneSplit:
    scene_id: str
    train_views: tuple[str, ...]
    db_views: tuple[str, ...]
    query_views: tuple[str, ...]


@dataclass(frozen=True)
class SplitSpec:
    """Per-scene partition of views into train/database/query roles.

    In ``unseen`` mode the three roles are pairwise disjoint within each
    scene. In ``seen`` mode train and db share views (whichever is smaller is
    contained in the other), matching training on database images; queries
    are always disjoint from both.
    """

    mode: str
    seed: int
    k_train: int
    k_db: int
    k_query: int
    scenes: tuple[SceneSplit, ...]

    def scene(self, scene_id: str) -> SceneSplit:
        for s in self.scenes:
            if s.scene_id == scene_id:
                return s
        raise KeyError(f"scene {scene_id!r} not in split")

    def db_selector(self) -> dict[str, tuple[str, ...]]:
        return {s.scene_id: s.db_views for s in self.scenes}

    def to_json_obj(self) -> dict:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "k_train": self.k_train,
            "k_db": self.k_db,
            "k_query": self.k_query,
            "scenes": [
                {
                    "scene_id": s.scene_id,
                    "train_views": list(s.train_views),
                    "db_views": list(s.db_views),
                    "query_views": list(s.query_views),
                }
                for s in self.scenes
            ],
        }

    @classmethod
    def from_json_obj(cls, obj: Mapping) -> "SplitSpec":
        return cls(
            mode=obj["mode"],
            seed=int(obj["seed"]),
            k_train=int(obj["k_train"]),
            k_db=int(obj["k_db"]),
            k_query=int(obj["k_query"]),
            scenes=tuple(
                SceneSplit(
                    scene_id=s["scene_id"],
                    train_views=tuple(s["train_views"]),
                    db_views=tuple(s["db_views"]),
                    query_views=tuple(s["query_views"]),
                )
                for s in obj["scenes"]
            ),
        )

    def save(self, path: str | Path) -> None:
        write_json_atomic(Path(path), self.to_json_obj())

    @classmethod
    def load(cls, path: str | Path) -> "SplitSpec":
        return cls.from_json_obj(json.loads(Path(path).read_text("utf-8")))


def make_split(
    manifest: DatasetManifest,
    k_train: int,
    k_db: int,
    k_query: int,
    mode: str,
    seed: int,
) -> SplitSpec:
    """Sample a per-scene train/db/query partition, deterministic per seed.

    Each scene's views are permuted once; roles are fixed slices of that
    permutation (query first, then db, with unseen-mode train taken from the
    tail). Because the permutation does not depend on the k values, db sets
    are nested across increasing k_db and train sets across increasing
    k_train, with the other roles unchanged.
    """
    if mode not in ("seen", "unseen"):
        raise ValueError(f"mode must be 'seen' or 'unseen', got {mode!r}")
    if k_db < 1 or k_query < 1 or k_train < 0:
        raise ValueError(
            f"need k_db >= 1, k_query >= 1, k_train >= 0; "
            f"got k_db={k_db}, k_query={k_query}, k_train={k_train}"
        )

    rng = np.random.default_rng(seed)
    scenes: list[SceneSplit] = []
    for sid, views in manifest.scenes:
        n = len(views)
        if mode == "unseen":
            needed = k_query + k_db + k_train
        else:
            needed = k_query + max(k_db, k_train)
        if n < needed:
            raise ValueError(
                f"scene {sid!r} has {n} views, {mode} split with "
                f"k_train={k_train}, k_db={k_db}, k_query={k_query} needs {needed}"
            )
        perm = rng.permutation(n)
        query = tuple(views[i] for i in perm[:k_query])
        db = tuple(views[i] for i in perm[k_query : k_query + k_db])
        if mode == "unseen":
            train = tuple(views[i] for i in perm[n - k_train :]) if k_train else ()
        else:
            train = tuple(views[i] for i in perm[k_query : k_query + k_train])
        scenes.append(SceneSplit(sid, train, db, query))

    return SplitSpec(
        mode=mode,
        seed=seed,
        k_train=k_train,
        k_db=k_db,
        k_query=k_query,
        scenes=tuple(scenes),
    )
