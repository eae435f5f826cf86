"""Geometric complexity e^C = integral of sqrt(det F(theta)) over parameter space.

Closed forms, a tensor-product quadrature oracle for small n, the Cauchy-Binet
form of det F, and the analytic bounds. The Monte Carlo estimator lives in
:mod:`lrcomplexity.montecarlo`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import EmpiricalInputDistribution, all_configurations, design_rank, matrix_rank
from .likelihood import sech2

METHODS = ("closed_form", "quadrature", "monte_carlo", "asymptotic")
MAX_SUBSETS = 100_000
EIG_RTOL = 8 * np.finfo(float).eps


class QuadratureError(RuntimeError):
    """Refinement did not reach the requested tolerance."""

    def __init__(self, message, estimates=()):
        super().__init__(message)
        self.estimates = tuple(estimates)


@dataclass(frozen=True)
class ComplexityEstimate:
    value: float
    log_value: float
    std_error: float
    method: str
    batches: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.value < 0 or self.std_error < 0:
            raise ValueError("value and std_error must be non-negative")

    @classmethod
    def exact(cls, value: float, method: str = "closed_form") -> "ComplexityEstimate":
        return cls(float(value), _safe_log(value), 0.0, method)

    @classmethod
    def from_log(cls, log_value: float, method: str = "closed_form") -> "ComplexityEstimate":
        return cls(float(math.exp(log_value)), float(log_value), 0.0, method)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "log_value": self.log_value,
            "std_error": self.std_error,
            "method": self.method,
        }


def _safe_log(v: float) -> float:
    return math.log(v) if v > 0 else -math.inf


def log_sqrt_det_fisher(thetas: np.ndarray, dist: EmpiricalInputDistribution,
                        chunk: int = 20_000) -> np.ndarray:
    """log sqrt(det F(theta)) for each row of ``thetas`` (-inf where F is singular)."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    X = dist.support
    n = X.shape[1]
    pairs = (X[:, :, None] * X[:, None, :]).reshape(X.shape[0], n * n)
    out = np.empty(thetas.shape[0])
    for lo in range(0, thetas.shape[0], chunk):
        th = thetas[lo:lo + chunk]
        a = dist.freqs * sech2(th @ X.T)
        F = (a @ pairs).reshape(-1, n, n)
        if n == 1:
            ev = F[:, :, 0]
        else:
            ev = np.linalg.eigvalsh(F)
        # eigenvalues below rounding level of the largest are numerically zero
        cut = EIG_RTOL * n * np.max(ev, axis=1, keepdims=True)
        ev = np.where(ev > cut, ev, 0.0)
        with np.errstate(divide="ignore"):
            out[lo:lo + chunk] = 0.5 * np.sum(np.log(ev), axis=1)
    return out


def sqrt_det_fisher(thetas, dist: EmpiricalInputDistribution) -> np.ndarray:
    return np.exp(log_sqrt_det_fisher(thetas, dist))


def is_full_rank(dist: EmpiricalInputDistribution) -> bool:
    return design_rank(dist) == dist.n


# -- closed forms ------------------------------------------------------------------

def complexity_closed_form(dist: EmpiricalInputDistribution) -> Optional[ComplexityEstimate]:
    """Exact e^C when one of the solvable cases applies, otherwise ``None``.

    Cases: rank-deficient support (0), one parameter (pi), exactly n independent
    configurations (pi^n prod sqrt(nu)), and two parameters (pi^2 sqrt(nu(1-nu))).
    """
    n = dist.n
    if n == 0:
        return ComplexityEstimate.exact(1.0)
    if design_rank(dist) < n:
        return ComplexityEstimate.exact(0.0)
    if n == 1:
        return ComplexityEstimate.exact(math.pi)
    if len(dist) == n:
        return ComplexityEstimate.from_log(n * math.log(math.pi) + 0.5 * float(np.sum(np.log(dist.freqs))))
    if n == 2:
        same = dist.support[:, 0] == dist.support[:, 1]
        nu = float(dist.freqs[same].sum())
        return ComplexityEstimate.exact(math.sqrt(nu * (1.0 - nu)) * math.pi ** 2)
    return None


# -- quadrature oracle ----------------------------------------------------------------

@dataclass(frozen=True)
class QuadConfig:
    start_nodes: int = 16
    max_points: int = 1 << 24
    rtol: float = 1e-4
    max_n: int = 4


def _tensor_quadrature(dist, m: int, chunk: int = 200_000) -> float:
    n = dist.n
    u, w = np.polynomial.legendre.leggauss(m)
    half = np.pi * u / 2
    nodes = np.tan(half)
    weights = w * (np.pi / 2) / np.cos(half) ** 2
    total = 0.0
    count = m ** n
    for lo in range(0, count, chunk):
        idx = np.arange(lo, min(lo + chunk, count))
        digits = np.stack(np.unravel_index(idx, (m,) * n), axis=1)
        th = nodes[digits]
        wt = np.prod(weights[digits], axis=1)
        total += float(np.sum(np.exp(log_sqrt_det_fisher(th, dist)) * wt))
    return total


def complexity_quadrature(dist: EmpiricalInputDistribution,
                          config: QuadConfig = QuadConfig()) -> ComplexityEstimate:
    """Gauss-Legendre product rule after theta_k = tan(pi u_k / 2), doubling the nodes
    per axis until successive estimates agree to ``config.rtol``."""
    n = dist.n
    if n > config.max_n:
        raise ValueError(f"quadrature is limited to n <= {config.max_n}, got n={n}")
    if n == 0:
        return ComplexityEstimate.exact(1.0, "quadrature")
    if design_rank(dist) < n:
        return ComplexityEstimate.exact(0.0, "quadrature")
    m = config.start_nodes
    history = [_tensor_quadrature(dist, m)]
    while (2 * m) ** n <= config.max_points:
        m *= 2
        history.append(_tensor_quadrature(dist, m))
        prev, cur = history[-2:]
        if abs(cur - prev) <= config.rtol * abs(cur):
            return ComplexityEstimate.exact(cur, "quadrature")
    raise QuadratureError(
        f"quadrature did not reach rtol={config.rtol} within {config.max_points} points",
        estimates=history[-2:],
    )


# -- Cauchy-Binet form and the triangular upper bound -------------------------------

def _subsets(dist: EmpiricalInputDistribution):
    d, n = dist.support.shape
    if math.comb(d, n) > MAX_SUBSETS:
        raise ValueError(f"C({d}, {n}) = {math.comb(d, n)} subsets exceeds the guard of {MAX_SUBSETS}")
    combos = np.array(list(itertools.combinations(range(d), n)), dtype=int).reshape(-1, n)
    if combos.shape[0] == 0:
        return combos, np.zeros(0)
    dets = np.linalg.det(dist.support[combos])
    return combos, np.rint(dets)


def cauchy_binet_det(dist: EmpiricalInputDistribution, theta) -> float:
    """det F(theta) as the sum over n-subsets of configurations of det^2 * prod nu sech^2."""
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.shape[0] != dist.n:
        raise ValueError("theta length does not match the distribution dimension")
    combos, dets = _subsets(dist)
    if combos.shape[0] == 0:
        return 0.0
    a = dist.freqs * sech2(dist.support @ theta)
    return float(np.sum(dets ** 2 * np.prod(a[combos], axis=1)))


def upper_bound_triangular(dist: EmpiricalInputDistribution) -> float:
    """pi^n times the sum over full-rank n-subsets of prod sqrt(nu)."""
    n = dist.n
    combos, dets = _subsets(dist)
    if combos.shape[0] == 0:
        return 0.0
    full = dets != 0
    roots = np.sqrt(dist.freqs)
    return float(math.pi ** n * np.sum(np.prod(roots[combos[full]], axis=1)))


def bound_envelope(n: int, T: int) -> tuple[float, float, float]:
    """(lower, upper_local, upper_global) for an n-parameter model observed T times.

    lower and upper_local bracket e^C when exactly n independent configurations are
    seen; upper_global is the empirical pi^n/n trend for uniform inputs.
    """
    if n < 1 or T < n:
        raise ValueError(f"need T >= n >= 1, got n={n}, T={T}")
    lp = n * math.log(math.pi)
    lower = math.exp(lp + 0.5 * (math.log(T - n + 1) - n * math.log(T)))
    upper_local = math.exp(lp - 0.5 * n * math.log(n))
    upper_global = math.exp(lp - math.log(n))
    return lower, upper_local, upper_global


# -- localisation paths -----------------------------------------------------------------

def random_localisation_path(n: int, rng: np.random.Generator) -> np.ndarray:
    """Ordering of all 2^n configurations: n independent ones first, the rest shuffled."""
    configs = all_configurations(n)
    total = configs.shape[0]
    while True:
        start = rng.choice(total, size=n, replace=False)
        if matrix_rank(configs[start]) == n:
            break
    rest = np.setdiff1d(np.arange(total), start)
    rest = rest[rng.permutation(rest.shape[0])]
    return np.concatenate([start, rest])


def path_distribution(n: int, order: np.ndarray, d: int) -> EmpiricalInputDistribution:
    """Uniform distribution on the first d configurations of a path."""
    configs = all_configurations(n)[order[:d]]
    return EmpiricalInputDistribution(configs, np.full(d, 1.0 / d))
