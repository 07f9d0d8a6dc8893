"""Synthetic scene/view embedding generation for desk-scale experiments.

Each scene gets a unit-norm centroid supported on the leading
``dim - nuisance_dims`` coordinates; each view adds Gaussian noise confined
to the trailing ``nuisance_dims`` coordinates and is renormalized. With
sigma=0 all views of a scene are identical; with large sigma the shared
signal subspace is drowned out, so raw cosine retrieval degrades while a
head that projects out the nuisance coordinates can recover it.
"""
from __future__ import annotations

import numpy as np

from .store import EmbeddingRecord


def synth_generate(
    n_scenes: int,
    views_per_scene: int,
    dim: int,
    sigma: float,
    nuisance_dims: int,
    seed: int,
) -> list[EmbeddingRecord]:
    """Generate ``n_scenes * views_per_scene`` records, deterministic per seed."""
    if n_scenes < 1 or views_per_scene < 1:
        raise ValueError(
            f"need n_scenes >= 1 and views_per_scene >= 1, "
            f"got {n_scenes} and {views_per_scene}"
        )
    if nuisance_dims < 0 or nuisance_dims >= dim:
        # dim == nuisance_dims would leave no room for a unit-norm centroid.
        raise ValueError(
            f"need 0 <= nuisance_dims < dim, got nuisance_dims={nuisance_dims}, dim={dim}"
        )
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")

    rng = np.random.default_rng(seed)
    signal_dims = dim - nuisance_dims
    records: list[EmbeddingRecord] = []
    for i in range(n_scenes):
        centroid = np.zeros(dim)
        c = rng.standard_normal(signal_dims)
        centroid[:signal_dims] = c / np.linalg.norm(c)
        for j in range(views_per_scene):
            v = centroid.copy()
            if sigma > 0 and nuisance_dims > 0:
                v[signal_dims:] += sigma * rng.standard_normal(nuisance_dims)
            v /= np.linalg.norm(v)
            records.append(
                EmbeddingRecord(
                    scene_id=f"scene_{i:04d}",
                    view_id=f"view_{j:03d}",
                    vector=v.astype(np.float32),
                )
            )
    return records
