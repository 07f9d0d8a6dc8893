"""Contrastive training of an MLP head over frozen embeddings.

The head is a small fully-connected trunk (ReLU between layers, linear
output) followed by a single affine projection layer. Training minimizes the
temperature-scaled cross-entropy contrastive loss over cosine similarities:
two views of the same scene form a positive pair, every other item in the
batch is a negative, and for each anchor i with partner j the loss is

    -log( exp(sim(z_i, z_j)/tau) / sum_{k != i} exp(sim(z_i, z_k)/tau) )

averaged over all 2N ordered anchors. Note the denominator excludes only
k = i, so the positive term itself is included. The projection layer is used
only for the loss; retrieval uses the trunk output.

Parameters are stored as float32; all forward/backward arithmetic runs in
float64 so analytic gradients can be checked against central finite
differences. Optimization is plain full-gradient descent per batch.
"""
from __future__ import annotations

import json
import math
import os
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .store import Dataset, SplitSpec


class TrainingDiverged(RuntimeError):
    """Raised when parameters become non-finite during training."""

    def __init__(self, epoch: int, batch: int):
        super().__init__(
            f"non-finite parameters after update at epoch {epoch}, batch {batch}"
        )
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class TrainConfig:
    tau: float = 0.5
    batch_scenes: int = 32
    lr: float = 0.05
    epochs: int = 100
    seed: int = 0
    trunk_depth: int = 3
    widths: tuple[int, ...] | None = None
    representation_dim: int = 128
    projection_dim: int = 64

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.batch_scenes < 2:
            raise ValueError(
                f"batch_scenes must be >= 2 (need in-batch negatives), got {self.batch_scenes}"
            )
        if self.lr < 0:
            raise ValueError(f"lr must be >= 0, got {self.lr}")
        if self.trunk_depth < 1:
            raise ValueError(f"trunk_depth must be >= 1, got {self.trunk_depth}")
        widths = self.widths
        if widths is None:
            widths = (256,) * (self.trunk_depth - 1)
            object.__setattr__(self, "widths", widths)
        else:
            object.__setattr__(self, "widths", tuple(int(w) for w in widths))
        if len(self.widths) != self.trunk_depth - 1:
            raise ValueError(
                f"widths {self.widths} must list {self.trunk_depth - 1} hidden "
                f"layer sizes for trunk_depth {self.trunk_depth}"
            )

    def to_json_obj(self) -> dict:
        return {
            "tau": self.tau,
            "batch_scenes": self.batch_scenes,
            "lr": self.lr,
            "epochs": self.epochs,
            "seed": self.seed,
            "trunk_depth": self.trunk_depth,
            "widths": list(self.widths),
            "representation_dim": self.representation_dim,
            "projection_dim": self.projection_dim,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "TrainConfig":
        return cls(
            tau=float(obj.get("tau", 0.5)),
            batch_scenes=int(obj.get("batch_scenes", 32)),
            lr=float(obj.get("lr", 0.05)),
            epochs=int(obj.get("epochs", 100)),
            seed=int(obj.get("seed", 0)),
            trunk_depth=int(obj.get("trunk_depth", 3)),
            widths=tuple(obj["widths"]) if obj.get("widths") is not None else None,
            representation_dim=int(obj.get("representation_dim", 128)),
            projection_dim=int(obj.get("projection_dim", 64)),
        )


@dataclass(frozen=True, eq=False)
class HeadParams:
    """Trunk and projection weights. Layers are (W, b) with W of shape (out, in)."""

    input_dim: int
    trunk: tuple[tuple[np.ndarray, np.ndarray], ...]
    projection: tuple[np.ndarray, np.ndarray]

    def __post_init__(self):
        prev = self.input_dim
        for i, (w, b) in enumerate(self.trunk):
            if w.shape[1] != prev or b.shape != (w.shape[0],):
                raise ValueError(
                    f"trunk layer {i} shapes {w.shape}/{b.shape} do not chain from {prev}"
                )
            prev = w.shape[0]
        w, b = self.projection
        if w.shape[1] != prev or b.shape != (w.shape[0],):
            raise ValueError(
                f"projection shapes {w.shape}/{b.shape} do not chain from {prev}"
            )

    @property
    def representation_dim(self) -> int:
        return self.trunk[-1][0].shape[0]

    @property
    def projection_dim(self) -> int:
        return self.projection[0].shape[0]

    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return list(self.trunk) + [self.projection]

    def all_finite(self) -> bool:
        return all(
            np.isfinite(w).all() and np.isfinite(b).all() for w, b in self.layers()
        )


def init_head(config: TrainConfig, input_dim: int) -> HeadParams:
    """Seeded Gaussian init (std 1/sqrt(fan_in)), zero biases."""
    rng = np.random.default_rng(config.seed)
    dims = [input_dim, *config.widths, config.representation_dim]
    trunk = []
    for d_in, d_out in zip(dims, dims[1:]):
        w = (rng.standard_normal((d_out, d_in)) / math.sqrt(d_in)).astype(np.float32)
        trunk.append((w, np.zeros(d_out, dtype=np.float32)))
    d_in = config.representation_dim
    w = (rng.standard_normal((config.projection_dim, d_in)) / math.sqrt(d_in)).astype(
        np.float32
    )
    projection = (w, np.zeros(config.projection_dim, dtype=np.float32))
    return HeadParams(input_dim=input_dim, trunk=tuple(trunk), projection=projection)


def _forward_cached(head: HeadParams, x: np.ndarray):
    """Float64 forward over a (n, d) batch, keeping pre-activations for backprop.

    Returns (rep, proj, cache) where cache holds each trunk layer's input and
    pre-activation.
    """
    h = np.asarray(x, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != head.input_dim:
        raise ValueError(f"batch shape {h.shape} does not match input dim {head.input_dim}")
    cache = []
    last = len(head.trunk) - 1
    for i, (w, b) in enumerate(head.trunk):
        z = h @ w.astype(np.float64).T + b.astype(np.float64)
        cache.append((h, z))
        h = z if i == last else np.maximum(z, 0.0)
    rep = h
    pw, pb = head.projection
    proj = rep @ pw.astype(np.float64).T + pb.astype(np.float64)
    return rep, proj, cache


def forward(head: HeadParams, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map one raw embedding to its (representation, projection) pair."""
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError(f"expected a single vector, got shape {x.shape}")
    rep, proj, _ = _forward_cached(head, x[None, :])
    return rep[0].astype(np.float32), proj[0].astype(np.float32)


def embed_with_head(head: HeadParams, x: np.ndarray) -> np.ndarray:
    """Trunk output for one raw embedding (the projection layer is discarded)."""
    return forward(head, x)[0]


def embed_batch(head: HeadParams, x: np.ndarray) -> np.ndarray:
    """Trunk outputs for a (n, d) batch of raw embeddings, as float32."""
    rep, _, _ = _forward_cached(head, x)
    return rep.astype(np.float32)


def _pair_partner(i: int) -> int:
    return i + 1 if i % 2 == 0 else i - 1


def _loss_from_projections(proj: np.ndarray, tau: float):
    """Batch loss and its gradient w.r.t. the raw projections (float64)."""
    n = proj.shape[0]
    if n < 4 or n % 2:
        raise ValueError(f"batch must hold 2N items with N >= 2, got {n}")
    norms = np.linalg.norm(proj, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("zero-norm projection in batch")
    unit = proj / norms[:, None]
    sims = unit @ unit.T

    logits = sims / tau
    np.fill_diagonal(logits, -np.inf)
    row_max = logits.max(axis=1, keepdims=True)
    exp = np.exp(logits - row_max)
    denom = exp.sum(axis=1, keepdims=True)
    log_softmax = (logits - row_max) - np.log(denom)

    partners = np.array([_pair_partner(i) for i in range(n)])
    loss = float(-log_softmax[np.arange(n), partners].mean())

    # d(loss)/d(sims), accounting for each anchor's softmax and its positive.
    grad_s = exp / denom
    grad_s[np.arange(n), partners] -= 1.0
    grad_s /= n * tau
    np.fill_diagonal(grad_s, 0.0)

    grad_unit = (grad_s + grad_s.T) @ unit
    # Back through the row normalization z / |z|.
    grad_proj = (grad_unit - (grad_unit * unit).sum(axis=1, keepdims=True) * unit) / norms[
        :, None
    ]
    return loss, grad_proj


def nt_xent_loss(projections: np.ndarray, tau: float) -> float:
    """Contrastive loss over a (2N, p) batch of projections.

    Rows (2t, 2t+1) are the two views of one scene. Always positive.
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    proj = np.asarray(projections, dtype=np.float64)
    loss, _ = _loss_from_projections(proj, tau)
    return loss


@dataclass(frozen=True, eq=False)
class HeadGrads:
    """Gradients mirroring HeadParams, in float64."""

    trunk: tuple[tuple[np.ndarray, np.ndarray], ...]
    projection: tuple[np.ndarray, np.ndarray]

    def scaled(self, factor: float) -> "HeadGrads":
        return HeadGrads(
            trunk=tuple((w * factor, b * factor) for w, b in self.trunk),
            projection=(self.projection[0] * factor, self.projection[1] * factor),
        )


def loss_gradients(
    head: HeadParams, inputs: np.ndarray, tau: float
) -> tuple[float, HeadGrads]:
    """Loss and its full gradient w.r.t. every weight and bias.

    ``inputs`` is the (2N, d) batch of raw embeddings in pair order.
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    rep, proj, cache = _forward_cached(head, inputs)
    loss, grad_proj = _loss_from_projections(proj, tau)

    pw, _ = head.projection
    d_pw = grad_proj.T @ rep
    d_pb = grad_proj.sum(axis=0)
    grad_h = grad_proj @ pw.astype(np.float64)

    trunk_grads: list[tuple[np.ndarray, np.ndarray]] = []
    last = len(head.trunk) - 1
    for i in range(last, -1, -1):
        h_in, z = cache[i]
        grad_z = grad_h if i == last else grad_h * (z > 0.0)
        trunk_grads.append((grad_z.T @ h_in, grad_z.sum(axis=0)))
        if i > 0:
            w, _ = head.trunk[i]
            grad_h = grad_z @ w.astype(np.float64)

    grads = HeadGrads(trunk=tuple(reversed(trunk_grads)), projection=(d_pw, d_pb))
    return loss, grads


def _apply_update(head: HeadParams, grads: HeadGrads, lr: float) -> HeadParams:
    trunk = tuple(
        (
            (w.astype(np.float64) - lr * gw).astype(np.float32),
            (b.astype(np.float64) - lr * gb).astype(np.float32),
        )
        for (w, b), (gw, gb) in zip(head.trunk, grads.trunk)
    )
    pw, pb = head.projection
    gw, gb = grads.projection
    projection = (
        (pw.astype(np.float64) - lr * gw).astype(np.float32),
        (pb.astype(np.float64) - lr * gb).astype(np.float32),
    )
    return HeadParams(input_dim=head.input_dim, trunk=trunk, projection=projection)


@dataclass(frozen=True)
class TrainResult:
    head: HeadParams
    losses: tuple[tuple[int, int, float], ...]  # (epoch, batch, loss)

    def loss_csv(self) -> str:
        lines = ["epoch,batch,loss"]
        lines += [f"{e},{b},{l!r}" for e, b, l in self.losses]
        return "\n".join(lines) + "\n"


def train(dataset: Dataset, split: SplitSpec, config: TrainConfig) -> TrainResult:
    """Contrastive training over the split's train views.

    Each epoch shuffles the scene list and walks it in chunks of
    ``batch_scenes``; every scene in a chunk contributes two distinct train
    views, giving a 2N-item batch. Fully deterministic for a fixed
    (dataset, split, config).
    """
    scenes = [s for s in split.scenes]
    short = [s.scene_id for s in scenes if len(s.train_views) < 2]
    if short:
        raise ValueError(
            f"scenes {short[:5]} have fewer than 2 train views; "
            f"a positive pair needs two distinct views per scene"
        )
    if config.batch_scenes > len(scenes):
        raise ValueError(
            f"batch_scenes={config.batch_scenes} exceeds {len(scenes)} scenes in split"
        )

    root = np.random.SeedSequence(config.seed)
    init_seed, shuffle_seed = root.spawn(2)
    head = init_head(
        replace(config, seed=int(init_seed.generate_state(1)[0])), dataset.dim
    )
    rng = np.random.default_rng(shuffle_seed)

    train_vectors = {
        s.scene_id: dataset.vectors_for([(s.scene_id, v) for v in s.train_views])
        for s in scenes
    }

    losses: list[tuple[int, int, float]] = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(scenes))
        for batch_idx, start in enumerate(range(0, len(scenes), config.batch_scenes)):
            chunk = order[start : start + config.batch_scenes]
            if len(chunk) < 2:
                continue
            batch = np.empty((2 * len(chunk), dataset.dim), dtype=np.float32)
            for t, scene_pos in enumerate(chunk):
                s = scenes[scene_pos]
                i, j = rng.choice(len(s.train_views), size=2, replace=False)
                batch[2 * t] = train_vectors[s.scene_id][i]
                batch[2 * t + 1] = train_vectors[s.scene_id][j]
            loss, grads = loss_gradients(head, batch, config.tau)
            head = _apply_update(head, grads, config.lr)
            if not head.all_finite():
                raise TrainingDiverged(epoch, batch_idx)
            losses.append((epoch, batch_idx, loss))

    return TrainResult(head=head, losses=tuple(losses))


CHECKPOINT_MAGIC = b"SRHD"


def save_checkpoint(
    result_head: HeadParams, config: TrainConfig, path: str | Path
) -> None:
    """Single-file checkpoint: magic, length-prefixed JSON header, f32le blob."""
    header = {
        "input_dim": result_head.input_dim,
        "trunk_shapes": [list(w.shape) for w, _ in result_head.trunk],
        "projection_shape": list(result_head.projection[0].shape),
        "config": config.to_json_obj(),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = b"".join(
        np.ascontiguousarray(a, dtype="<f4").tobytes()
        for w, b in result_head.layers()
        for a in (w, b)
    )
    out = Path(path)
    tmp = out.with_name(out.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", len(header_bytes)))
        f.write(header_bytes)
        f.write(blob)
    os.replace(tmp, out)


def load_checkpoint(path: str | Path) -> tuple[HeadParams, TrainConfig]:
    raw = Path(path).read_bytes()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path} is not a head checkpoint")
    (header_len,) = struct.unpack("<I", raw[4:8])
    header = json.loads(raw[8 : 8 + header_len].decode("utf-8"))
    blob = np.frombuffer(raw[8 + header_len :], dtype="<f4")

    shapes = [tuple(s) for s in header["trunk_shapes"]]
    shapes.append(tuple(header["projection_shape"]))
    layers = []
    offset = 0
    for out_dim, in_dim in shapes:
        w = blob[offset : offset + out_dim * in_dim].reshape(out_dim, in_dim).copy()
        offset += out_dim * in_dim
        b = blob[offset : offset + out_dim].copy()
        offset += out_dim
        layers.append((w, b))
    if offset != blob.size:
        raise ValueError(f"checkpoint blob has {blob.size} floats, expected {offset}")
    head = HeadParams(
        input_dim=int(header["input_dim"]),
        trunk=tuple(layers[:-1]),
        projection=layers[-1],
    )
    return head, TrainConfig.from_json_obj(header["config"])
