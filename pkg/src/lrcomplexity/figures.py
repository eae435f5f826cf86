"""Complexity sweeps: random localisation paths, uniform inputs versus n, Ising inputs versus beta."""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from .complexity import (ComplexityEstimate, bound_envelope, complexity_closed_form,
                         path_distribution, random_localisation_path)
from .core import EmpiricalInputDistribution, design_rank, entropy_bits
from .montecarlo import complexity_monte_carlo
from .simulation import IsingInputConfig, ising_distribution


def _mc(dist, samples, batches, seed, threads) -> ComplexityEstimate:
    if design_rank(dist) < dist.n:
        return ComplexityEstimate.exact(0.0, "closed_form")
    return complexity_monte_carlo(dist, samples, batches, seed, threads)


def localisation_sweep(n: int, paths: int = 10, samples: int = 100_000, batches: int = 20,
                       seed: int = 0, threads: Optional[int] = None,
                       d_values: Optional[Sequence[int]] = None) -> list[dict]:
    """Complexity along random paths that add configurations one by one, from d=1 to 2^n.

    Rows carry e^C, its error, the entropy of the d-point distribution and the
    localised-regime bounds (T = d).
    """
    total = 2 ** n
    d_values = range(1, total + 1) if d_values is None else d_values
    rows = []
    for p in range(paths):
        rng = np.random.default_rng(np.random.SeedSequence([seed, p, 0xF1]))
        order = random_localisation_path(n, rng)
        for d in d_values:
            dist = path_distribution(n, order, d)
            est = _mc(dist, samples, batches, int(rng.integers(2 ** 63)), threads)
            lower, upper_local, upper_global = bound_envelope(n, d) if d >= n else (0.0, 0.0, 0.0)
            rows.append({"n": n, "path": p, "d": d, "entropy_bits": entropy_bits(dist),
                         "value": est.value, "std_error": est.std_error,
                         "lower": lower, "upper_local": upper_local, "upper_global": upper_global})
    return rows


def uniform_sweep(n_values: Sequence[int], samples: int = 100_000, batches: int = 20,
                  seed: int = 0, threads: Optional[int] = None) -> list[dict]:
    """e^C / pi^n for uniform inputs next to the 1/n trend."""
    rows = []
    for n in n_values:
        dist = EmpiricalInputDistribution.uniform(n)
        est = complexity_closed_form(dist) if n <= 2 else None
        if est is None:
            est = complexity_monte_carlo(dist, samples, batches, seed, threads)
        scale = math.pi ** n
        rows.append({"n": n, "ratio": est.value / scale, "std_error": est.std_error / scale,
                     "one_over_n": 1.0 / n, "method": est.method})
    return rows


def ising_beta_sweep(n: int, beta_values: Sequence[float], samples: int = 100_000,
                     batches: int = 20, seed: int = 0, threads: Optional[int] = None,
                     convention: str = "printed") -> list[dict]:
    """Complexity of the exact Ising input distribution over all 2^n configurations."""
    rows = []
    for beta in beta_values:
        dist = ising_distribution(IsingInputConfig(n, beta, convention=convention))
        est = _mc(dist, samples, batches, seed, threads)
        rows.append({"n": n, "beta": beta, "entropy_bits": entropy_bits(dist),
                     "value": est.value, "std_error": est.std_error,
                     "ratio": est.value / math.pi ** n})
    return rows
