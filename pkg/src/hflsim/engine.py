"""Hierarchical FL rounds: tau1 local steps per edge aggregation, tau2 edge
aggregations per cloud aggregation, with exact model-exchange accounting."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from . import tasks
from .errors import ConfigError, ConsistencyError
from .evalkit import ConfusionMatrix, accumulate, metrics
from .tasks import TaskConfig, VehicleDataset
from .topology import Topology
from .weights import HierarchyWeights

PERFORMANCE_KINDS = ("neg_loss", "accuracy", "miou")
WORKERS_ENV = "HFLSIM_WORKERS"


@dataclass(frozen=True)
class RoundPlan:
    tau1: int
    tau2: int
    iteration_budget: int

    def __post_init__(self):
        if self.tau1 < 1 or self.tau2 < 1:
            raise ConfigError(f"tau1 and tau2 must be >= 1, got ({self.tau1}, {self.tau2})")
        if self.tau1 * self.tau2 != self.iteration_budget:
            raise ConfigError(
                f"tau1*tau2 must equal the iteration budget: "
                f"{self.tau1}*{self.tau2} != {self.iteration_budget}"
            )


REPORT_FIELDS = ("round", "tau1", "tau2", "eval_loss", "perf", "n_exc", "cum_exc",
                 "qoc", "vartheta", "accuracy")


@dataclass
class RoundReport:
    round: int
    tau1: int
    tau2: int
    eval_loss: float
    perf: float
    n_exc: int
    cum_exc: int
    qoc: Optional[float] = None
    vartheta: Optional[float] = None
    accuracy: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExchangeLedger:
    model_size_mb: float = 1.0
    per_round: list[int] = field(default_factory=list)

    @property
    def cumulative(self) -> int:
        return sum(self.per_round)

    @property
    def traffic_mb(self) -> float:
        return self.cumulative * self.model_size_mb

    def record(self, n_exc: int) -> int:
        if n_exc < 0:
            raise ConsistencyError("exchange counts are non-negative")
        self.per_round.append(int(n_exc))
        return self.cumulative


def count_exchanges(topology: Topology, tau2: int) -> int:
    """Uplink plus downlink model transfers in one round: 2 (tau2 * sum|C_e| + |M|)."""
    return 2 * (tau2 * topology.num_vehicles + len(topology.edges))


def weighted_aggregate(models: Sequence[np.ndarray], weights: Sequence[float]) -> np.ndarray:
    if len(models) == 0 or len(models) != len(weights):
        raise ConsistencyError(f"got {len(models)} models for {len(weights)} weights")
    shape = np.shape(models[0])
    for m in models[1:]:
        if np.shape(m) != shape:
            raise ConsistencyError(f"model shape mismatch: {np.shape(m)} vs {shape}")
    acc = weights[0] * models[0]
    for w, m in zip(weights[1:], models[1:]):
        acc = acc + w * m
    return acc


def evaluate_global(model: np.ndarray, eval_set: VehicleDataset,
                    performance: str = "neg_loss") -> tuple[float, float]:
    """(eval loss, performance scalar) on held-out data."""
    ev_loss = tasks.loss(model, eval_set)
    if performance == "neg_loss":
        return ev_loss, -ev_loss
    if eval_set.kind != "softmax_classification":
        raise ConfigError(f"performance {performance!r} needs a classification task")
    if performance == "accuracy":
        return ev_loss, accuracy(model, eval_set)
    if performance == "miou":
        return ev_loss, metrics(confusion(model, eval_set)).miou
    raise ConfigError(f"performance must be one of {PERFORMANCE_KINDS}, got {performance!r}")


def accuracy(model: np.ndarray, eval_set: VehicleDataset) -> float:
    return float(np.mean(tasks.predict(model, eval_set) == eval_set.labels))


def confusion(model: np.ndarray, eval_set: VehicleDataset) -> ConfusionMatrix:
    cm = ConfusionMatrix.empty(eval_set.num_classes)
    return accumulate(cm, eval_set.labels, tasks.predict(model, eval_set))


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer") from None


class HFLState:
    """Mutable simulation state: vehicle models, batch streams and telemetry."""

    def __init__(self, topology: Topology, datasets: Mapping[str, VehicleDataset],
                 task_cfg: TaskConfig, eval_set: Optional[VehicleDataset] = None,
                 init_model: Optional[np.ndarray] = None, probe_size: int = 32,
                 performance: str = "neg_loss", model_size_mb: float = 1.0,
                 workers: Optional[int] = None):
        if set(datasets) != set(topology.vehicle_ids):
            raise ConsistencyError("datasets must cover exactly the topology's vehicles")
        if performance not in PERFORMANCE_KINDS:
            raise ConfigError(f"performance must be one of {PERFORMANCE_KINDS}, got {performance!r}")
        self.topology = topology
        self.datasets = dict(datasets)
        self.task_cfg = task_cfg
        self.eval_set = eval_set if eval_set is not None else tasks.make_eval_set(task_cfg)
        self.performance = performance
        self.cloud_model = tasks.zero_model(task_cfg) if init_model is None else np.asarray(init_model, float)
        self.models = {v: self.cloud_model for v in topology.vehicle_ids}
        self.streams = {}
        self.probes = {}
        for ei, e in enumerate(topology.edges):
            for ci, v in enumerate(e.vehicles):
                n = len(self.datasets[v])
                self.streams[v] = tasks.batch_stream(task_cfg, ei, ci, n)
                self.probes[v] = tasks.probe_indices(task_cfg, ei, ci, n, probe_size)
        self.ledger = ExchangeLedger(model_size_mb)
        self.round_index = 0
        self.workers = default_workers() if workers is None else workers
        # pre-aggregation vehicle models and edge models of the last edge aggregation
        self.last_local: dict[str, np.ndarray] = {}
        self.last_edge: dict[str, np.ndarray] = {}

    def evaluate(self) -> tuple[float, float]:
        return evaluate_global(self.cloud_model, self.eval_set, self.performance)


def _local_updates(state: HFLState, steps: int, eta: float) -> dict[str, np.ndarray]:
    vids = state.topology.vehicle_ids

    def one(v):
        return tasks.local_update(state.models[v], state.datasets[v], steps, eta, state.streams[v])

    if state.workers > 1 and len(vids) > 1:
        with ThreadPoolExecutor(max_workers=state.workers) as pool:
            return dict(zip(vids, pool.map(one, vids)))
    return {v: one(v) for v in vids}


def run_round(state: HFLState, plan: RoundPlan, weights: HierarchyWeights, eta: float) -> RoundReport:
    topo = state.topology
    edge_models: dict[str, np.ndarray] = {}
    local: dict[str, np.ndarray] = {}
    for _ in range(plan.tau2):
        local = _local_updates(state, plan.tau1, eta)
        for e in topo.edges:
            edge_models[e.id] = weighted_aggregate(
                [local[v] for v in e.vehicles], [weights.vehicle[v] for v in e.vehicles]
            )
            for v in e.vehicles:
                state.models[v] = edge_models[e.id]
    state.last_local, state.last_edge = local, dict(edge_models)
    cloud = weighted_aggregate([edge_models[e.id] for e in topo.edges],
                               [weights.edge[e.id] for e in topo.edges])
    state.cloud_model = cloud
    for v in topo.vehicle_ids:
        state.models[v] = cloud

    state.round_index += 1
    n_exc = count_exchanges(topo, plan.tau2)
    cum = state.ledger.record(n_exc)
    ev_loss, perf = state.evaluate()
    acc = accuracy(cloud, state.eval_set) if state.eval_set.kind == "softmax_classification" else None
    return RoundReport(state.round_index, plan.tau1, plan.tau2, ev_loss, perf, n_exc, cum, accuracy=acc)
