"""Complexity of box-bounded models (|theta_k| <= Theta) with uniform binary inputs."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .complexity import ComplexityEstimate


def critical_dimension(theta_box: float) -> float:
    """n_c = 8 pi Theta^2 e^2."""
    return 8.0 * math.pi * theta_box ** 2 * math.e ** 2


def log_regularized_asymptotic(n: int, theta_box: float) -> float:
    if n < 1 or theta_box <= 0:
        raise ValueError("need n >= 1 and Theta > 0")
    return math.log(2.0 / math.sqrt(math.pi * n)) + 0.25 * n * math.log(critical_dimension(theta_box) / n)


def complexity_regularized_asymptotic(n: int, theta_box: float) -> float:
    """Large-n approximation 2/sqrt(pi n) * (8 pi Theta^2 e^2 / n)^(n/4)."""
    return math.exp(log_regularized_asymptotic(n, theta_box))


def fisher_diagonal(r: float, epsrel: float = 1e-11) -> float:
    """lambda(r): average of sech^2(z) under z ~ N(0, r^2)."""
    if r < 0:
        raise ValueError("r must be non-negative")
    if r == 0:
        return 1.0
    if r < 1.0:
        # z = r s keeps the Gaussian factor at unit width
        def f(s):
            return math.exp(-0.5 * s * s) / math.cosh(r * s) ** 2
        val, _ = integrate.quad(f, 0.0, 40.0, epsabs=0.0, epsrel=epsrel, limit=200)
        return 2.0 * val / math.sqrt(2.0 * math.pi)

    def g(z):
        return math.exp(-0.5 * (z / r) ** 2) / math.cosh(z) ** 2
    val, _ = integrate.quad(g, 0.0, 40.0, epsabs=0.0, epsrel=epsrel, limit=200)
    return 2.0 * val / math.sqrt(2.0 * math.pi * r * r)


@dataclass(frozen=True)
class SphericalConfig:
    epsrel: float = 1e-9
    limit: int = 200


def complexity_regularized_spherical(n: int, theta_box: float,
                                     config: SphericalConfig = SphericalConfig()) -> ComplexityEstimate:
    """Radial integral 2 pi^(n/2)/Gamma(n/2) * int_0^{sqrt(n) Theta} r^(n-1) lambda(r)^(n/2) dr.

    The integrand is rescaled by its maximum on a coarse grid so large n neither
    overflows nor underflows; the scale is restored in log space.
    """
    if n < 2:
        raise ValueError("the spherical form needs n >= 2")
    if theta_box <= 0:
        raise ValueError("Theta must be positive")
    R = math.sqrt(n) * theta_box

    def log_f(r):
        return (n - 1) * math.log(r) + 0.5 * n * math.log(fisher_diagonal(r))

    grid = np.linspace(R / 64, R, 64)
    shift = max(log_f(r) for r in grid)

    def f(r):
        return math.exp(log_f(r) - shift) if r > 0 else 0.0

    val, err = integrate.quad(f, 0.0, R, epsabs=0.0, epsrel=config.epsrel, limit=config.limit)
    if not (val > 0 and math.isfinite(val)) or err > 1e3 * config.epsrel * val:
        raise ArithmeticError(f"radial quadrature failed for n={n}: value {val}, error {err}")
    log_value = math.log(2.0) + 0.5 * n * math.log(math.pi) - gammaln(0.5 * n) + shift + math.log(val)
    return ComplexityEstimate.from_log(log_value, "quadrature")
