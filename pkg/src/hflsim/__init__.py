"""Deterministic hierarchical federated-learning simulator with Gaussian-statistics
aggregation weights (FedGau) and adaptive round scheduling (AdapRS)."""

from .divergence import bhattacharyya_coefficient, bhattacharyya_distance
from .engine import RoundPlan, RoundReport, count_exchanges, run_round, weighted_aggregate
from .errors import HflError
from .gaussian_stats import GaussianSummary, ImagePixels, estimate_image_summary, load_ppm, merge_summaries
from .topology import Topology
from .weights import PolicyConfig, fedgau_weights, hierarchy_weights, proportional_weights

__version__ = "0.1.0"

__all__ = [
    "GaussianSummary", "HflError", "ImagePixels", "PolicyConfig", "RoundPlan", "RoundReport", "Topology",
    "bhattacharyya_coefficient", "bhattacharyya_distance", "count_exchanges", "estimate_image_summary",
    "fedgau_weights", "hierarchy_weights", "load_ppm", "merge_summaries", "proportional_weights",
    "run_round", "weighted_aggregate",
]
