"""End-to-end scenario runs: weights, rounds, scheduling and report files."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import tasks
from .config import ScenarioConfig, serialize_config
from .engine import REPORT_FIELDS, HFLState, RoundReport, confusion, run_round
from .evalkit import dumps, emit_reports, metrics
from .scheduler import (
    SchedulerState,
    estimate_round,
    performance_factor,
    scan_plans,
)
from .topology import Topology
from .weights import HierarchyWeights, hierarchy_weights

SCHEDULER_LOG_FIELDS = ("round", "vartheta", "qoc", "qoc_max", "tau1", "tau2", "objective",
                        "feasible_set_size", "fallback", "estimates")


@dataclass
class RunResult:
    config: ScenarioConfig
    topology: Topology
    weights: HierarchyWeights
    initial_loss: float
    initial_perf: float
    reports: list[RoundReport] = field(default_factory=list)
    scheduler_log: list[dict] = field(default_factory=list)
    final_metrics: Optional[dict] = None

    @property
    def cumulative_exchanges(self) -> int:
        return self.reports[-1].cum_exc if self.reports else 0

    @property
    def final_loss(self) -> float:
        return self.reports[-1].eval_loss if self.reports else self.initial_loss

    def eval_losses(self) -> list[float]:
        return [r.eval_loss for r in self.reports]


def build_state(cfg: ScenarioConfig):
    topo = cfg.topology.build()
    datasets = tasks.generate_scenario(topo, cfg.task)
    summaries = {v: d.summary() for v, d in datasets.items()}
    weights = hierarchy_weights(topo, summaries, cfg.policy)
    state = HFLState(topo, datasets, cfg.task, probe_size=cfg.scheduler.probe_size,
                     performance=cfg.scheduler.performance, model_size_mb=cfg.model_size_mb)
    return topo, weights, state


def run_scenario(cfg: ScenarioConfig,
                 on_round: Optional[Callable[[RoundReport], None]] = None) -> RunResult:
    topo, weights, state = build_state(cfg)
    loss0, perf0 = state.evaluate()
    result = RunResult(cfg, topo, weights, loss0, perf0)
    sched = SchedulerState(perf_history=[perf0])
    sc = cfg.scheduler
    plan = sc.initial_plan()
    for _ in range(cfg.rounds):
        report = run_round(state, plan, weights, cfg.eta)
        report.vartheta = performance_factor(sched, report.perf - sched.perf_history[-1], report.n_exc)
        report.qoc = sched.qoc_history[-1]
        sched.perf_history.append(report.perf)
        record = {"round": report.round, "vartheta": report.vartheta, "qoc": report.qoc,
                  "qoc_max": sched.qoc_max}
        if sc.kind == "adaprs":
            est = estimate_round(state, weights, cfg.eta)
            decision = scan_plans(sc.iteration_budget, report.vartheta, est, weights.edge)
            plan = decision.plan
            record.update(tau1=plan.tau1, tau2=plan.tau2, objective=decision.objective,
                          feasible_set_size=decision.feasible_set_size, fallback=decision.fallback,
                          estimates=est.to_dict())
        else:
            record.update(tau1=plan.tau1, tau2=plan.tau2, objective=None,
                          feasible_set_size=None, fallback=None, estimates=None)
        result.reports.append(report)
        result.scheduler_log.append(record)
        if on_round is not None:
            on_round(report)
    if cfg.task.kind == "softmax_classification":
        result.final_metrics = metrics(confusion(state.cloud_model, state.eval_set)).to_dict()
    return result


def write_outputs(result: RunResult, out_dir: str) -> dict[str, str]:
    """Round reports (CSV + JSON-lines), weight snapshot, scheduler log, config echo."""
    cfg_dict = result.config.to_dict()
    csv_path, jsonl_path = emit_reports(result.reports, out_dir, REPORT_FIELDS, header=cfg_dict)
    paths = {"rounds_csv": csv_path, "rounds_jsonl": jsonl_path}

    weights = result.weights.to_dict(result.topology)
    weights["policy"] = result.config.policy.kind
    weights["edge_summaries"] = {k: v.to_dict() for k, v in result.weights.edge_summaries.items()}
    weights["cloud_summary"] = result.weights.cloud_summary.to_dict()
    paths["weights"] = _write_text(out_dir, "weights.json", json.dumps(weights, indent=2) + "\n")

    log = "".join(dumps({k: rec.get(k) for k in SCHEDULER_LOG_FIELDS}) + "\n"
                  for rec in result.scheduler_log)
    paths["scheduler"] = _write_text(out_dir, "scheduler.jsonl", log)
    paths["config"] = _write_text(out_dir, "config.json", serialize_config(result.config))

    summary = {
        "initial_eval_loss": result.initial_loss,
        "initial_perf": result.initial_perf,
        "final_eval_loss": result.final_loss,
        "cumulative_exchanges": result.cumulative_exchanges,
        "traffic_mb": result.cumulative_exchanges * result.config.model_size_mb,
        "final_metrics": result.final_metrics,
    }
    paths["summary"] = _write_text(out_dir, "summary.json", json.dumps(summary, indent=2) + "\n")
    return paths


def _write_text(out_dir: str, name: str, text: str) -> str:
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path
