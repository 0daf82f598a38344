"""Independent reference implementations used as test oracles.

Nothing here imports the code under test except plain data containers, so
agreement between the two is real evidence rather than a tautology.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy import integrate


def exact_moments(samples: Sequence[int]) -> tuple[Fraction, Fraction]:
    """Sample mean and Bessel-corrected variance in rational arithmetic."""
    xs = [Fraction(int(x)) for x in samples]
    n = len(xs)
    mean = sum(xs) / n
    var = sum((x - mean) ** 2 for x in xs) / (n - 1)
    return mean, var


def exact_merge(children: Sequence[tuple[int, Fraction, Fraction]]) -> tuple[int, Fraction, Fraction]:
    n = sum(c[0] for c in children)
    mean = sum(Fraction(c[0]) * c[1] for c in children) / n
    var = sum(Fraction(c[0]) ** 2 * c[2] for c in children) / Fraction(n) ** 2
    return n, mean, var


def numeric_bhattacharyya(m1: float, v1: float, m2: float, v2: float) -> float:
    """-ln of the integral of sqrt(f1 f2), by adaptive quadrature."""
    s1, s2 = math.sqrt(v1), math.sqrt(v2)

    def integrand(x):
        f1 = math.exp(-0.5 * ((x - m1) / s1) ** 2) / (s1 * math.sqrt(2 * math.pi))
        f2 = math.exp(-0.5 * ((x - m2) / s2) ** 2) / (s2 * math.sqrt(2 * math.pi))
        return math.sqrt(f1 * f2)

    lo = min(m1 - 12 * s1, m2 - 12 * s2)
    hi = max(m1 + 12 * s1, m2 + 12 * s2)
    mid = 0.5 * (m1 + m2)
    points = sorted({m1, m2, mid})
    coeff, _ = integrate.quad(integrand, lo, hi, points=points, epsabs=1e-14, epsrel=1e-12, limit=500)
    return -math.log(coeff)


def exact_reciprocal_weights(distances: Sequence[float]) -> list[Fraction]:
    inv = [1 / Fraction(d) for d in distances]
    total = sum(inv)
    return [x / total for x in inv]


def mp_q(t: int, theta, beta, eta, dps: int = 60):
    """theta * ((1/beta)(1 + eta*beta)^t - 1/beta - eta*t), written out literally."""
    with mpmath.workdps(dps):
        theta, beta, eta = mpmath.mpf(theta), mpmath.mpf(beta), mpmath.mpf(eta)
        if beta == 0:
            return mpmath.mpf(0)
        return +(theta * ((1 / beta) * (1 + eta * beta) ** t - 1 / beta - eta * t))


def mp_objective(tau1: int, tau2: int, C, rho, beta, theta, eta,
                 edges: Sequence[tuple[float, float, float]], dps: int = 60) -> float:
    """Bound value at (tau1, tau2); ``edges`` holds (p_e, beta_e, theta_e)."""
    with mpmath.workdps(dps):
        t = tau1 * tau2
        p = mp_q(t, theta, beta, eta, dps)
        p += (tau2 + 1) * sum(mpmath.mpf(pe) * mp_q(tau1, te, be, eta, dps) for pe, be, te in edges)
        C, rho = mpmath.mpf(C), mpmath.mpf(rho)
        a = C / t
        value = a + rho * p + mpmath.sqrt(a * a + 2 * C * rho * p / t)
        return float(value)


def central_difference(f: Callable[[np.ndarray], float], x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        g[i] = (f(x + e) - f(x - e)) / (2 * step)
    return g


def centralized_sgd(model: np.ndarray, grad: Callable, batches: Callable[[], object],
                    steps: int, lr: float) -> list[np.ndarray]:
    """Plain SGD, returning every iterate after the start point."""
    out = []
    w = model
    for _ in range(steps):
        w = w - lr * grad(w, batches())
        out.append(w)
    return out
