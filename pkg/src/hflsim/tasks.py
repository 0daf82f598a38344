"""Desk-scale convex learning tasks with controllable inter-edge heterogeneity.

Every edge ``e`` receives a feature mean shift ``m_e = h * s_e * u_e`` where
``h`` is the heterogeneity knob, ``s_e`` an optional per-edge scale and
``u_e`` a random unit direction. Vehicles under the edge draw features from
``N(m_e, I)``; labels come from one shared ground-truth model plus noise, so
every vehicle sees the same conditional but a different input distribution.

Each sample also carries a small 8-bit RGB "pixel proxy" image whose mean
intensity is ``128 + clamp(pixel_scale * |m_e|)``. The texture is shared by
all vehicles and only cyclically shifted per sample, so image statistics
depend on the edge shift alone and ``h = 0`` gives identical summaries
everywhere.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError
from .gaussian_stats import GaussianSummary, ImagePixels, dataset_summary
from .topology import Topology

TASK_KINDS = ("linear_regression", "softmax_classification")

# stream tags for SeedSequence spawn keys
_GROUND_TRUTH, _DIRECTIONS, _VEHICLE_DATA, _TEXTURE, _EVAL, _PROBE, _BATCHES = range(7)

_TEXTURE_HALF_RANGE = 30
_MAX_OFFSET = 255 - 128 - _TEXTURE_HALF_RANGE


@dataclass(frozen=True)
class TaskConfig:
    kind: str = "softmax_classification"
    input_dim: int = 16
    num_classes: int = 4
    samples_per_vehicle: int = 64
    heterogeneity: float = 0.0
    noise_std: float = 0.5
    seed: int = 0
    batch_size: int = 16
    signal: float = 3.0
    edge_shift_scales: Optional[tuple[float, ...]] = None
    eval_samples: int = 2000
    image_size: int = 8
    pixel_scale: float = 10.0

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ConfigError(f"task.kind must be one of {TASK_KINDS}, got {self.kind!r}")
        if self.input_dim < 1:
            raise ConfigError("task.input_dim must be >= 1")
        if self.kind == "softmax_classification" and self.num_classes < 2:
            raise ConfigError("task.num_classes must be >= 2 for softmax_classification")
        if self.samples_per_vehicle < 2:
            raise ConfigError("task.samples_per_vehicle must be >= 2")
        if self.heterogeneity < 0 or self.noise_std < 0:
            raise ConfigError("task.heterogeneity and task.noise_std must be >= 0")
        if self.batch_size < 1 or self.eval_samples < 1 or self.image_size < 1:
            raise ConfigError("task.batch_size, task.eval_samples and task.image_size must be >= 1")
        if self.edge_shift_scales is not None:
            object.__setattr__(self, "edge_shift_scales", tuple(float(s) for s in self.edge_shift_scales))
            if any(s < 0 for s in self.edge_shift_scales):
                raise ConfigError("task.edge_shift_scales entries must be >= 0")

    @property
    def model_size(self) -> int:
        if self.kind == "softmax_classification":
            return self.num_classes * self.input_dim
        return self.input_dim

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["edge_shift_scales"] is not None:
            d["edge_shift_scales"] = list(d["edge_shift_scales"])
        return d


@dataclass
class VehicleDataset:
    kind: str
    features: np.ndarray
    labels: np.ndarray
    num_classes: int = 0
    pixel_proxy: list = field(default_factory=list)

    def __post_init__(self):
        n = self.features.shape[0]
        if self.labels.shape[0] != n or (self.pixel_proxy and len(self.pixel_proxy) != n):
            raise ConfigError("features, labels and pixel_proxy must have the same row count")

    def __len__(self) -> int:
        return int(self.features.shape[0])

    def summary(self) -> GaussianSummary:
        return dataset_summary(self.pixel_proxy)


def _rng(cfg: TaskConfig, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=key))


def ground_truth_model(cfg: TaskConfig) -> np.ndarray:
    rng = _rng(cfg, _GROUND_TRUTH)
    return cfg.signal * rng.standard_normal(cfg.model_size) / np.sqrt(cfg.input_dim)


def _labels(cfg: TaskConfig, truth: np.ndarray, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if cfg.kind == "softmax_classification":
        W = truth.reshape(cfg.num_classes, cfg.input_dim)
        logits = x @ W.T + cfg.noise_std * rng.standard_normal((x.shape[0], cfg.num_classes))
        return np.argmax(logits, axis=1).astype(np.int64)
    return x @ truth + cfg.noise_std * rng.standard_normal(x.shape[0])


def edge_shifts(topology: Topology, cfg: TaskConfig) -> dict[str, np.ndarray]:
    scales = cfg.edge_shift_scales
    if scales is None:
        scales = (1.0,) * len(topology.edges)
    if len(scales) != len(topology.edges):
        raise ConfigError(
            f"task.edge_shift_scales has {len(scales)} entries for {len(topology.edges)} edges"
        )
    rng = _rng(cfg, _DIRECTIONS)
    out = {}
    for e, s in zip(topology.edges, scales):
        u = rng.standard_normal(cfg.input_dim)
        u /= np.linalg.norm(u)
        out[e.id] = cfg.heterogeneity * s * u
    return out


def _texture(cfg: TaskConfig) -> np.ndarray:
    rng = _rng(cfg, _TEXTURE)
    n = 3 * cfg.image_size * cfg.image_size
    return rng.integers(-_TEXTURE_HALF_RANGE, _TEXTURE_HALF_RANGE + 1, size=n)


def render_pixel_proxy(shift: np.ndarray, count: int, cfg: TaskConfig) -> list[ImagePixels]:
    offset = int(round(min(cfg.pixel_scale * float(np.linalg.norm(shift)), _MAX_OFFSET)))
    base = (128 + offset + _texture(cfg)).astype(np.uint8)
    s = cfg.image_size
    return [ImagePixels(s, s, 3, np.roll(base, i)) for i in range(count)]


def generate_scenario(topology: Topology, cfg: TaskConfig) -> dict[str, VehicleDataset]:
    """Vehicle datasets, fully determined by ``cfg`` (including its seed)."""
    truth = ground_truth_model(cfg)
    shifts = edge_shifts(topology, cfg)
    out = {}
    for ei, e in enumerate(topology.edges):
        m = shifts[e.id]
        proxy = render_pixel_proxy(m, cfg.samples_per_vehicle, cfg)
        for ci, vid in enumerate(e.vehicles):
            rng = _rng(cfg, _VEHICLE_DATA, ei, ci)
            x = m + rng.standard_normal((cfg.samples_per_vehicle, cfg.input_dim))
            y = _labels(cfg, truth, x, rng)
            out[vid] = VehicleDataset(cfg.kind, x, y, cfg.num_classes, list(proxy))
    return out


def make_eval_set(cfg: TaskConfig) -> VehicleDataset:
    """Held-out, unshifted evaluation data."""
    rng = _rng(cfg, _EVAL)
    x = rng.standard_normal((cfg.eval_samples, cfg.input_dim))
    y = _labels(cfg, ground_truth_model(cfg), x, rng)
    return VehicleDataset(cfg.kind, x, y, cfg.num_classes)


def zero_model(cfg: TaskConfig) -> np.ndarray:
    return np.zeros(cfg.model_size)


# ---------------------------------------------------------------------------
# losses


def _rows(data: VehicleDataset, batch):
    if batch is None:
        return data.features, data.labels
    return data.features[batch], data.labels[batch]


def _softmax_parts(model: np.ndarray, x: np.ndarray, k: int):
    W = model.reshape(k, x.shape[1])
    z = x @ W.T
    zmax = z.max(axis=1, keepdims=True)
    ez = np.exp(z - zmax)
    s = ez.sum(axis=1, keepdims=True)
    lse = (zmax + np.log(s))[:, 0]
    return z, lse, ez / s


def loss(model: np.ndarray, data: VehicleDataset, batch=None) -> float:
    """Mean squared error (regression) or mean cross-entropy (softmax) over ``batch``."""
    x, y = _rows(data, batch)
    if data.kind == "softmax_classification":
        z, lse, _ = _softmax_parts(model, x, data.num_classes)
        return float(np.mean(lse - z[np.arange(len(y)), y]))
    r = x @ model - y
    return float(np.mean(r * r))


def gradient(model: np.ndarray, data: VehicleDataset, batch=None) -> np.ndarray:
    x, y = _rows(data, batch)
    n = x.shape[0]
    if data.kind == "softmax_classification":
        _, _, p = _softmax_parts(model, x, data.num_classes)
        p[np.arange(n), y] -= 1.0
        return (p.T @ x).reshape(-1) / n
    r = x @ model - y
    return 2.0 * (x.T @ r) / n


def predict(model: np.ndarray, data: VehicleDataset) -> np.ndarray:
    if data.kind == "softmax_classification":
        W = model.reshape(data.num_classes, data.features.shape[1])
        return np.argmax(data.features @ W.T, axis=1)
    return data.features @ model


class BatchStream:
    """Minibatch indices sampled without replacement within each epoch.

    When the batch covers the whole dataset the natural row order is used,
    so one full-batch step is exactly one gradient-descent step.
    """

    def __init__(self, n: int, batch_size: int, rng: np.random.Generator):
        self.n = n
        self.batch_size = batch_size
        self.rng = rng
        self._perm = np.empty(0, dtype=np.int64)
        self._pos = 0

    def next(self):
        if self.batch_size >= self.n:
            return None
        if self._pos + self.batch_size > self._perm.size:
            self._perm = self.rng.permutation(self.n)
            self._pos = 0
        idx = self._perm[self._pos:self._pos + self.batch_size]
        self._pos += self.batch_size
        return idx


def batch_stream(cfg: TaskConfig, edge_index: int, vehicle_index: int, n: int) -> BatchStream:
    return BatchStream(n, cfg.batch_size, _rng(cfg, _BATCHES, edge_index, vehicle_index))


def probe_indices(cfg: TaskConfig, edge_index: int, vehicle_index: int, n: int, size: int) -> np.ndarray:
    if size >= n:
        return np.arange(n)
    return np.sort(_rng(cfg, _PROBE, edge_index, vehicle_index).choice(n, size, replace=False))


def local_update(model: np.ndarray, data: VehicleDataset, steps: int, lr: float,
                 stream: BatchStream) -> np.ndarray:
    if steps < 1 or not lr > 0:
        raise ConfigError(f"local_update needs steps >= 1 and lr > 0, got {steps}, {lr}")
    w = model
    for _ in range(steps):
        w = w - lr * gradient(w, data, stream.next())
    return w
