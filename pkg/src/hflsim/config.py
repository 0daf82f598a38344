"""Scenario configuration: a JSON document with a fixed key schema.

Top-level keys (``seed`` is mandatory, everything else has a default)::

    seed            int     master seed for data, batches and probes
    rounds          int     number of cloud rounds R                  (30)
    eta             float   local SGD learning rate                   (0.05)
    model_size_mb   float   size of one model transfer, for traffic   (1.0)
    output_dir      str     where ``run`` writes when --out is absent (null)
    topology        {edges: int, vehicles_per_edge: int | [int, ...]}
    task            see :class:`hflsim.tasks.TaskConfig` (minus ``seed``)
    policy          {kind: fedgau | proportional, epsilon: float}
    scheduler       {kind: adaprs | statrs, tau1, tau2, iteration_budget,
                     performance: neg_loss | accuracy | miou, probe_size}

For ``adaprs`` the (tau1, tau2) pair is the plan of the first round.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Optional, Union

from .engine import PERFORMANCE_KINDS, RoundPlan
from .errors import ConfigError, HflError
from .tasks import TaskConfig
from .topology import Topology
from .weights import PolicyConfig

SCHEDULERS = ("adaprs", "statrs")


@dataclass(frozen=True)
class TopologyConfig:
    edges: int = 3
    vehicles_per_edge: Union[int, tuple] = 3

    def __post_init__(self):
        v = self.vehicles_per_edge
        if isinstance(v, (list, tuple)):
            v = tuple(int(x) for x in v)
            object.__setattr__(self, "vehicles_per_edge", v)
            if len(v) != self.edges:
                raise ConfigError(
                    f"topology.vehicles_per_edge lists {len(v)} edges but topology.edges = {self.edges}"
                )
            if any(x < 1 for x in v):
                raise ConfigError("topology.vehicles_per_edge entries must be >= 1")
        elif int(v) < 1:
            raise ConfigError("topology.vehicles_per_edge must be >= 1")
        if self.edges < 1:
            raise ConfigError("topology.edges must be >= 1")

    def build(self) -> Topology:
        v = self.vehicles_per_edge
        sizes = v if isinstance(v, tuple) else [int(v)] * self.edges
        return Topology.from_sizes(sizes)

    def to_dict(self) -> dict:
        v = self.vehicles_per_edge
        return {"edges": self.edges, "vehicles_per_edge": list(v) if isinstance(v, tuple) else v}


@dataclass(frozen=True)
class SchedulerConfig:
    kind: str = "adaprs"
    tau1: int = 6
    tau2: int = 4
    iteration_budget: int = 24
    performance: str = "neg_loss"
    probe_size: int = 32

    def __post_init__(self):
        if self.kind not in SCHEDULERS:
            raise ConfigError(f"scheduler.kind must be one of {SCHEDULERS}, got {self.kind!r}")
        if self.performance not in PERFORMANCE_KINDS:
            raise ConfigError(
                f"scheduler.performance must be one of {PERFORMANCE_KINDS}, got {self.performance!r}"
            )
        if self.probe_size < 1:
            raise ConfigError("scheduler.probe_size must be >= 1")
        try:
            self.initial_plan()
        except ConfigError as exc:
            raise ConfigError(f"scheduler.iteration_budget: {exc}") from None

    def initial_plan(self) -> RoundPlan:
        return RoundPlan(self.tau1, self.tau2, self.iteration_budget)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    rounds: int = 30
    eta: float = 0.05
    model_size_mb: float = 1.0
    output_dir: Optional[str] = None
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    task: TaskConfig = field(default_factory=TaskConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)

    def __post_init__(self):
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if not self.eta > 0:
            raise ConfigError("eta must be > 0")
        if not self.model_size_mb > 0:
            raise ConfigError("model_size_mb must be > 0")
        if self.task.seed != self.seed:
            object.__setattr__(self, "task", dataclasses.replace(self.task, seed=self.seed))
        n_edges = self.topology.edges
        scales = self.task.edge_shift_scales
        if scales is not None and len(scales) != n_edges:
            raise ConfigError(
                f"task.edge_shift_scales has {len(scales)} entries for topology.edges = {n_edges}"
            )

    def to_dict(self) -> dict:
        task = self.task.to_dict()
        task.pop("seed")
        return {
            "seed": self.seed, "rounds": self.rounds, "eta": self.eta,
            "model_size_mb": self.model_size_mb, "output_dir": self.output_dir,
            "topology": self.topology.to_dict(), "task": task,
            "policy": dataclasses.asdict(self.policy), "scheduler": self.scheduler.to_dict(),
        }

    def with_overrides(self, **kw) -> "ScenarioConfig":
        """Copy with top-level or dotted nested overrides, e.g. ``{"policy.kind": "proportional"}``."""
        return from_dict(_merge(self.to_dict(), kw))


def _merge(d: dict, overrides: dict) -> dict:
    d = json.loads(json.dumps(d))
    for key, value in overrides.items():
        node = d
        *path, last = key.replace("__", ".").split(".")
        for p in path:
            node = node[p]
        node[last] = value
    return d


_SECTIONS = {
    "topology": TopologyConfig,
    "task": TaskConfig,
    "policy": PolicyConfig,
    "scheduler": SchedulerConfig,
}


def _build(cls, raw, path: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected an object, got {type(raw).__name__}")
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    if cls is TaskConfig:
        names.discard("seed")
    for key in raw:
        if key not in names:
            raise ConfigError(f"{path}.{key}: unknown key")
    try:
        return cls(**raw)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def from_dict(raw: dict) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a JSON object at top level")
    if "seed" not in raw:
        raise ConfigError("seed: missing; scenario files must set an explicit seed")
    top = {f.name for f in dataclasses.fields(ScenarioConfig)}
    kwargs = {}
    for key, value in raw.items():
        if key not in top:
            raise ConfigError(f"{key}: unknown key")
        if key in _SECTIONS:
            kwargs[key] = _build(_SECTIONS[key], value, key)
        else:
            kwargs[key] = value
    seed = kwargs["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        raise ConfigError(f"seed: must be an integer in [0, 2^64), got {seed!r}")
    if "task" in kwargs:
        kwargs["task"] = dataclasses.replace(kwargs["task"], seed=seed)
    else:
        kwargs["task"] = TaskConfig(seed=seed)
    try:
        return ScenarioConfig(**kwargs)
    except HflError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config: {exc}") from None


def parse_config(text_or_path: str) -> ScenarioConfig:
    """Parse a config from a file path or a JSON string."""
    text = text_or_path
    if not text_or_path.lstrip().startswith("{"):
        try:
            with open(text_or_path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {text_or_path}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return from_dict(raw)


def serialize_config(cfg: ScenarioConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2) + "\n"
