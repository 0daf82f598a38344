"""Aggregation weights for each parent/children level of the hierarchy.

Two policies are provided:

* ``proportional`` -- each child weighted by its share of the parent's images.
* ``fedgau`` -- each child weighted by the normalised reciprocal of its
  Bhattacharyya distance to the parent's merged Gaussian summary. Distances
  are floored at ``epsilon`` so an exactly matching child gets a finite,
  near-one weight instead of a division by zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .divergence import bhattacharyya_distance
from .errors import ConfigError, ConsistencyError, HflError
from .gaussian_stats import GaussianSummary, merge_summaries
from .topology import Topology

POLICIES = ("fedgau", "proportional")


@dataclass(frozen=True)
class PolicyConfig:
    kind: str = "fedgau"
    epsilon: float = 1e-6

    def __post_init__(self):
        if self.kind not in POLICIES:
            raise ConfigError(f"policy.kind must be one of {POLICIES}, got {self.kind!r}")
        if not self.epsilon > 0:
            raise ConfigError(f"policy.epsilon must be > 0, got {self.epsilon}")


def proportional_weights(sizes: Sequence[int]) -> np.ndarray:
    if len(sizes) == 0:
        raise HflError("proportional weights need at least one child")
    if any(int(s) != s or s < 1 for s in sizes):
        raise HflError(f"child sizes must be positive integers, got {list(sizes)}")
    total = sum(int(s) for s in sizes)
    return np.array([int(s) / total for s in sizes], dtype=np.float64)


def reciprocal_weights(distances: Sequence[float], epsilon: float = 1e-6) -> np.ndarray:
    """Normalised 1/d weights with d floored at ``epsilon``.

    Written as w_i = 1 / sum_j(d_i / d_j): equal distances give exactly 1/k,
    the same bits the proportional rule yields for equal sizes.
    """
    d = np.maximum(np.asarray(distances, dtype=np.float64), epsilon)
    if d.size == 0:
        raise HflError("reciprocal weights need at least one child")
    return np.array([1.0 / float(np.sum(di / d)) for di in d])


def fedgau_weights(children: Sequence[GaussianSummary], parent: GaussianSummary,
                   cfg: PolicyConfig = PolicyConfig()) -> np.ndarray:
    dists = [bhattacharyya_distance(c, parent) for c in children]
    return reciprocal_weights(dists, cfg.epsilon)


def level_weights(children: Sequence[GaussianSummary], cfg: PolicyConfig) -> tuple[np.ndarray, GaussianSummary]:
    parent = merge_summaries(children)
    if cfg.kind == "proportional":
        return proportional_weights([c.n for c in children]), parent
    return fedgau_weights(children, parent, cfg), parent


@dataclass
class HierarchyWeights:
    vehicle: dict[str, float]
    edge: dict[str, float]
    edge_summaries: dict[str, GaussianSummary]
    cloud_summary: GaussianSummary

    def to_dict(self, topology: Topology) -> dict:
        return {"edges": [
            {"id": e.id, "weight": self.edge[e.id],
             "vehicles": [{"id": v, "weight": self.vehicle[v]} for v in e.vehicles]}
            for e in topology.edges
        ]}


def hierarchy_weights(topology: Topology, vehicle_summaries: Mapping[str, GaussianSummary],
                      cfg: PolicyConfig = PolicyConfig()) -> HierarchyWeights:
    """Per-edge vehicle weights, then cloud-level edge weights (edge summaries merged first)."""
    missing = [v for v in topology.vehicle_ids if v not in vehicle_summaries]
    extra = set(vehicle_summaries) - set(topology.vehicle_ids)
    if missing or extra:
        raise ConsistencyError(
            f"topology/summary mismatch: missing {missing[:5]}, unknown {sorted(extra)[:5]}"
        )
    vehicle_w: dict[str, float] = {}
    edge_sums: dict[str, GaussianSummary] = {}
    for e in topology.edges:
        w, edge_sums[e.id] = level_weights([vehicle_summaries[v] for v in e.vehicles], cfg)
        vehicle_w.update(zip(e.vehicles, map(float, w)))
    w_edge, cloud = level_weights([edge_sums[e.id] for e in topology.edges], cfg)
    edge_w = {e.id: float(x) for e, x in zip(topology.edges, w_edge)}
    return HierarchyWeights(vehicle_w, edge_w, edge_sums, cloud)
