"""Bhattacharyya overlap between two univariate Gaussian summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateDistributionError
from .gaussian_stats import GaussianSummary


@dataclass(frozen=True)
class Divergence:
    coefficient: float
    distance: float


def _check(a: GaussianSummary, b: GaussianSummary) -> None:
    if not (a.var > 0 and b.var > 0):
        raise DegenerateDistributionError(
            f"Bhattacharyya distance needs positive variances, got {a.var} and {b.var}"
        )


def bhattacharyya_distance(a: GaussianSummary, b: GaussianSummary) -> float:
    """0.25 * dmu^2 / (v1 + v2) + 0.5 * ln((v1 + v2) / (2 sqrt(v1 v2))).

    Every operation is commutative in (a, b), so the result is exactly symmetric.
    """
    _check(a, b)
    vsum = a.var + b.var
    d = a.mean - b.mean
    mean_term = 0.25 * (d * d) / vsum
    spread_term = 0.5 * math.log(vsum / (2.0 * math.sqrt(a.var * b.var)))
    return mean_term + max(spread_term, 0.0)


def bhattacharyya_coefficient(a: GaussianSummary, b: GaussianSummary) -> float:
    # evaluated from the distance (log domain) so large mean gaps underflow gracefully
    return math.exp(-bhattacharyya_distance(a, b))


def divergence(a: GaussianSummary, b: GaussianSummary) -> Divergence:
    dist = bhattacharyya_distance(a, b)
    return Divergence(coefficient=math.exp(-dist), distance=dist)
