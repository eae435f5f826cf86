"""Normalised log-likelihood, Fisher information and maximum-likelihood fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BinaryDesign, EmpiricalInputDistribution, OutputVector, unique_rows

LOG2 = float(np.log(2.0))


def log2cosh(z):
    """log(2 cosh z), stable for large |z|."""
    a = np.abs(z)
    return a + np.log1p(np.exp(-2.0 * a))


def sech2(z):
    a = np.abs(z)
    e = np.exp(-2.0 * a)
    return 4.0 * e / (1.0 + e) ** 2


def _xy(design, y):
    X = design.data if isinstance(design, BinaryDesign) else np.asarray(design, dtype=float)
    yy = y.y if isinstance(y, OutputVector) else np.asarray(y, dtype=float)
    if X.ndim != 2 or yy.shape != (X.shape[0],):
        raise ValueError(f"design {X.shape} and output {yy.shape} have mismatched lengths")
    return X, yy


def _check_theta(theta, n):
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.shape[0] != n:
        raise ValueError(f"theta has length {theta.shape[0]}, model has {n} parameters")
    return theta


def loglik(theta, design, y) -> float:
    """Mean log-probability of the outputs, in nats per observation."""
    X, yy = _xy(design, y)
    theta = _check_theta(theta, X.shape[1])
    z = X @ theta
    return float(np.mean(yy * z) - np.mean(log2cosh(z)))


def gradient(theta, design, y) -> np.ndarray:
    X, yy = _xy(design, y)
    theta = _check_theta(theta, X.shape[1])
    z = X @ theta
    return X.T @ (yy - np.tanh(z)) / X.shape[0]


def fisher_information(theta, dist: EmpiricalInputDistribution) -> np.ndarray:
    """F_ij = sum_mu nu_mu sech^2(theta . x_mu) x_mu,i x_mu,j. Independent of the outputs."""
    theta = _check_theta(theta, dist.n)
    X = dist.support
    a = dist.freqs * sech2(X @ theta)
    return (X * a[:, None]).T @ X


@dataclass(frozen=True)
class FitConfig:
    tol: float = 1e-8
    step_tol: float = 1e-6
    max_iter: int = 100
    cap: float = 30.0


@dataclass(frozen=True)
class FitResult:
    theta_star: np.ndarray
    loglik: float
    iterations: int
    converged: bool
    separated: bool
    grad_norm: float

    @property
    def n(self) -> int:
        return self.theta_star.shape[0]


class _Suffstats:
    """Compressed data: distinct input rows, their frequencies, and mean(y x)."""

    def __init__(self, X, yy):
        self.T = X.shape[0]
        self.yx = X.T @ yy / self.T
        sup, counts = unique_rows(X)
        self.sup = sup
        self.nu = counts / self.T

    def value(self, theta):
        return float(self.yx @ theta - self.nu @ log2cosh(self.sup @ theta))

    def grad_hess(self, theta):
        z = self.sup @ theta
        g = self.yx - self.sup.T @ (self.nu * np.tanh(z))
        a = self.nu * sech2(z)
        H = (self.sup * a[:, None]).T @ self.sup
        return g, H


def _solve_psd(H, g):
    w, V = np.linalg.eigh(H)
    cut = max(w.max(initial=0.0), 0.0) * 1e-12
    if cut == 0.0:
        return g.copy()
    inv = np.where(w > cut, 1.0 / np.where(w > cut, w, 1.0), 0.0)
    step = V @ (inv * (V.T @ g))
    if not np.any(step):
        step = g.copy()
    return step


def fit_mle(design, y, config: FitConfig = FitConfig()) -> FitResult:
    """Damped Newton ascent on the log-likelihood with |theta_k| capped at config.cap.

    Coordinates that hit the cap while the gradient still pushes outwards are held
    fixed (projected Newton) and the fit is flagged as separated.
    """
    X, yy = _xy(design, y)
    n = X.shape[1]
    if n == 0:
        return FitResult(np.zeros(0), -LOG2, 0, True, False, 0.0)
    stats = _Suffstats(X, yy)
    theta = np.zeros(n)
    cur = stats.value(theta)
    cap = config.cap
    converged = False
    it = 0
    pnorm = np.inf
    for it in range(1, config.max_iter + 1):
        g, H = stats.grad_hess(theta)
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(H))):
            raise FloatingPointError("non-finite gradient or Hessian during fit")
        pinned = (np.abs(theta) >= cap) & (np.sign(g) == np.sign(theta))
        pg = np.where(pinned, 0.0, g)
        pnorm = float(np.max(np.abs(pg)))
        free = ~pinned
        d = np.zeros(n)
        d[free] = _solve_psd(H[np.ix_(free, free)], g[free])
        # a tiny gradient with a large Newton step means the optimum is at infinity
        if pnorm <= config.tol and float(np.max(np.abs(d))) <= config.step_tol:
            converged = True
            it -= 1
            break
        step = 1.0
        improved = False
        for _ in range(60):
            trial = np.clip(theta + step * d, -cap, cap)
            val = stats.value(trial)
            if not np.isfinite(val):
                raise FloatingPointError("non-finite log-likelihood during fit")
            if val >= cur:
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        # keep doubling while it pays, so separated directions reach the cap quickly
        while step < 2.0 ** 20:
            wider = np.clip(theta + 2.0 * step * d, -cap, cap)
            wval = stats.value(wider)
            if not (wval > val) or np.array_equal(wider, trial):
                break
            trial, val, step = wider, wval, 2.0 * step
        moved = np.max(np.abs(trial - theta))
        theta, cur = trial, val
        if moved == 0.0:
            break
    if not converged:
        g, _ = stats.grad_hess(theta)
        pinned = (np.abs(theta) >= cap) & (np.sign(g) == np.sign(theta))
        pnorm = float(np.max(np.abs(np.where(pinned, 0.0, g))))
        converged = pnorm <= config.tol
    # coordinates driven next to the cap only stop there because the gradient underflows
    separated = bool(np.any(np.abs(theta) >= 0.99 * cap))
    return FitResult(theta, min(cur, 0.0), it, converged, separated, pnorm)
