"""Performance-aware adaptive round scheduling (AdapRS) and the static baseline.

After every round the cloud estimates per-vehicle Lipschitz / smoothness /
gradient-gap constants, folds them up the hierarchy with the aggregation
weights, and picks the (tau1, tau2) split of a fixed iteration budget that
minimises the round-wise convergence bound

    C/t + rho*p + sqrt(C^2/t^2 + 2*C*rho*p/t),     t = tau1 * tau2
    p = q(t; theta, beta) + (tau2 + 1) * sum_e p_e * q(tau1; theta_e, beta_e)
    q(t; theta, beta) = theta * ((1 + eta*beta)^t - 1 - t*eta*beta) / beta

subject to 1 <= tau2 <= vartheta * tau1. Instead of a continuous solver the
(small) set of integer divisor pairs of the budget is scanned exhaustively.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from . import tasks
from .engine import HFLState, RoundPlan
from .errors import ConfigError, ObjectiveOverflowError, StabilityError
from .topology import Topology
from .weights import HierarchyWeights

Triple = tuple[float, float, float]

# exp() overflows just above this
_MAX_LOG = 709.0


@dataclass(frozen=True)
class DivergenceEstimates:
    rho: float
    beta: float
    theta: float
    per_edge: dict = field(default_factory=dict)
    per_vehicle: dict = field(default_factory=dict)
    C: float = 0.0
    eta: float = 0.01

    def to_dict(self) -> dict:
        return {
            "rho": self.rho, "beta": self.beta, "theta": self.theta, "C": self.C, "eta": self.eta,
            "per_edge": {k: list(v) for k, v in self.per_edge.items()},
        }


@dataclass
class SchedulerState:
    qoc_history: list[float] = field(default_factory=list)
    qoc_max: float = -math.inf
    vartheta: float = 1.0
    perf_history: list[float] = field(default_factory=list)


# ---------------------------------------------------------------------------
# parameter estimation


def estimate_vehicle_divergence(local_model: np.ndarray, edge_model: np.ndarray,
                                loss_fn: Callable[[np.ndarray], float],
                                grad_fn: Callable[[np.ndarray], np.ndarray]) -> Triple:
    """(rho, beta, theta) between a vehicle's model and its edge model.

    Identical models give (0, 0, 0). theta is returned as beta * |dw| so the
    identity between the two holds bit-for-bit.
    """
    dw = float(np.linalg.norm(np.asarray(local_model) - np.asarray(edge_model)))
    if dw == 0.0:
        return 0.0, 0.0, 0.0
    dl = abs(float(loss_fn(local_model)) - float(loss_fn(edge_model)))
    dg = float(np.linalg.norm(np.asarray(grad_fn(local_model)) - np.asarray(grad_fn(edge_model))))
    beta = dg / dw
    return dl / dw, beta, beta * dw


def aggregate_divergence(per_vehicle: Mapping[str, Triple], topology: Topology,
                         vehicle_weights: Mapping[str, float], edge_weights: Mapping[str, float],
                         eta: float) -> DivergenceEstimates:
    per_edge = {}
    glob = [0.0, 0.0, 0.0]
    for e in topology.edges:
        acc = [0.0, 0.0, 0.0]
        for v in e.vehicles:
            p = vehicle_weights[v]
            for i in range(3):
                acc[i] += p * per_vehicle[v][i]
        per_edge[e.id] = tuple(acc)
        for i in range(3):
            glob[i] += edge_weights[e.id] * acc[i]
    return DivergenceEstimates(rho=glob[0], beta=glob[1], theta=glob[2], per_edge=per_edge,
                               per_vehicle=dict(per_vehicle), C=0.0, eta=eta)


def check_stability(eta: float, beta: float) -> None:
    if eta * beta >= 2.0:
        raise StabilityError(
            f"eta*beta = {eta * beta:.6g} >= 2: the convergence bound's denominator is non-positive"
        )


def estimate_C(grad_norm: float, eta: float, beta: float) -> float:
    """|grad L(w_r)|^2 / (eta * beta^2 * (2 - eta*beta))."""
    if not eta > 0 or not beta > 0:
        raise StabilityError(f"C estimate needs eta > 0 and beta > 0, got eta={eta}, beta={beta}")
    check_stability(eta, beta)
    return grad_norm * grad_norm / (eta * beta * beta * (2.0 - eta * beta))


def estimate_round(state: HFLState, weights: HierarchyWeights, eta: float) -> DivergenceEstimates:
    """Estimates from the last edge aggregation of the round just played."""
    topo = state.topology
    triples = {}
    for e in topo.edges:
        edge_model = state.last_edge[e.id]
        for v in e.vehicles:
            data, probe = state.datasets[v], state.probes[v]
            triples[v] = estimate_vehicle_divergence(
                state.last_local[v], edge_model,
                lambda w: tasks.loss(w, data, probe),
                lambda w: tasks.gradient(w, data, probe),
            )
    est = aggregate_divergence(triples, topo, weights.vehicle, weights.edge, eta)
    g = None
    for e in topo.edges:
        for v in e.vehicles:
            term = (weights.edge[e.id] * weights.vehicle[v]) * tasks.gradient(
                state.cloud_model, state.datasets[v], state.probes[v])
            g = term if g is None else g + term
    if est.beta == 0.0:
        # no divergence anywhere: every plan scores 2C/I and the choice ignores C
        return est
    return replace(est, C=estimate_C(float(np.linalg.norm(g)), eta, est.beta))


# ---------------------------------------------------------------------------
# convergence bound


def q_term(t: int, theta: float, beta: float, eta: float) -> float:
    """theta * ((1/beta)(1 + eta*beta)^t - 1/beta - eta*t), evaluated stably.

    Exactly 0 at t = 1 and in the beta -> 0 limit.
    """
    if t == 1 or theta == 0.0 or beta == 0.0:
        return 0.0
    x = eta * beta
    if t * x < 0.5:
        # (1+x)^t - 1 - t*x = sum_{k>=2} C(t,k) x^k, no cancellation
        term = t * (t - 1) / 2.0 * x * x
        s = 0.0
        k = 2
        while term != 0.0 and k <= t:
            s += term
            if term < 1e-18 * s:
                break
            term *= (t - k) / (k + 1.0) * x
            k += 1
        excess = s
    else:
        log_growth = t * math.log1p(x)
        if log_growth > _MAX_LOG:
            raise OverflowError
        excess = math.expm1(log_growth) - t * x
    return theta * excess / beta


def convergence_objective(tau1: int, tau2: int, est: DivergenceEstimates,
                          edge_weights: Mapping[str, float]) -> float:
    if tau1 < 1 or tau2 < 1:
        raise ConfigError(f"tau1 and tau2 must be >= 1, got ({tau1}, {tau2})")
    t = tau1 * tau2
    try:
        qc = q_term(t, est.theta, est.beta, est.eta)
        qe = 0.0
        for eid, pe in edge_weights.items():
            _, beta_e, theta_e = est.per_edge[eid]
            qe += pe * q_term(tau1, theta_e, beta_e, est.eta)
        p = qc + (tau2 + 1) * qe
        a = est.C / t
        rp = est.rho * p
        # sqrt(a^2 + 2*a*rp) without squaring a, which under/overflows at the range ends
        value = a + rp + math.hypot(a, math.sqrt(2.0 * a) * math.sqrt(rp))
    except OverflowError:
        raise ObjectiveOverflowError(tau1, tau2) from None
    if not math.isfinite(value):
        raise ObjectiveOverflowError(tau1, tau2)
    return value


# ---------------------------------------------------------------------------
# planning


def performance_factor(state: SchedulerState, perf_delta: float, n_exc: int) -> float:
    """Append this round's QoC and return vartheta = max(0, QoC_r / QoC_max).

    If no round has improved performance yet (QoC_max <= 0) vartheta is 0.
    """
    if n_exc < 1:
        raise ConfigError(f"n_exc must be >= 1, got {n_exc}")
    qoc = perf_delta / n_exc
    state.qoc_history.append(qoc)
    state.qoc_max = max(state.qoc_history)
    if state.qoc_max <= 0.0:
        state.vartheta = 0.0
    else:
        state.vartheta = min(1.0, max(0.0, qoc / state.qoc_max))
    return state.vartheta


def divisor_pairs(budget: int) -> list[tuple[int, int]]:
    """All (tau1, tau2) with tau1 * tau2 == budget, ascending in tau2."""
    if budget < 1:
        raise ConfigError(f"iteration budget must be >= 1, got {budget}")
    return [(budget // d, d) for d in range(1, budget + 1) if budget % d == 0]


def is_feasible(tau1: int, tau2: int, vartheta: float) -> bool:
    return 1 <= tau2 <= vartheta * tau1


@dataclass(frozen=True)
class PlanDecision:
    plan: RoundPlan
    objective: float
    table: tuple  # ((tau1, tau2, objective), ...) over the feasible set
    fallback: bool

    @property
    def feasible_set_size(self) -> int:
        return len(self.table)


def scan_plans(budget: int, vartheta: float, est: DivergenceEstimates,
               edge_weights: Mapping[str, float]) -> PlanDecision:
    table = []
    best = None
    for tau1, tau2 in divisor_pairs(budget):
        if not is_feasible(tau1, tau2, vartheta):
            continue
        obj = convergence_objective(tau1, tau2, est, edge_weights)
        table.append((tau1, tau2, obj))
        # strict '<' keeps the smallest tau2 among ties
        if best is None or obj < best[2]:
            best = (tau1, tau2, obj)
    if best is None:
        obj = convergence_objective(budget, 1, est, edge_weights)
        return PlanDecision(RoundPlan(budget, 1, budget), obj, (), True)
    return PlanDecision(RoundPlan(best[0], best[1], budget), best[2], tuple(table), False)


def plan_next_round(budget: int, vartheta: float, est: DivergenceEstimates,
                    edge_weights: Mapping[str, float]) -> RoundPlan:
    return scan_plans(budget, vartheta, est, edge_weights).plan


def statrs_plan(tau1: int, tau2: int, budget: int) -> RoundPlan:
    """The fixed plan used every round by the static baseline."""
    return RoundPlan(tau1, tau2, budget)
