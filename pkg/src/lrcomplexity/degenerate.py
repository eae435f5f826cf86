"""One-parameter models with tied weights.

Tying the weights of a subset S of inputs to a common theta, with a fixed
threshold b, gives p(y|x) proportional to exp(y theta (X - b)) where X is the sum
of the tied inputs. Everything then depends on the data only through the
categorical variable X.
"""

from __future__ import annotations

import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .complexity import ComplexityEstimate
from .core import _to_spin_column, read_table
from .likelihood import FitConfig, fit_mle, log2cosh, sech2

MAX_KEYS = 20
EXACT_FIT_TOL = 1e-6


@dataclass(frozen=True)
class DegenerateModel:
    subset: tuple
    b: float
    theta: float = 0.0

    @property
    def n(self) -> int:
        return len(self.subset)


@dataclass(frozen=True)
class CategoricalDistribution:
    values: np.ndarray
    freqs: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        f = np.asarray(self.freqs, dtype=float).ravel()
        if v.shape != f.shape or v.size == 0:
            raise ValueError("values and freqs must be non-empty and of equal length")
        if np.any(f <= 0) or abs(f.sum() - 1.0) > 1e-12:
            raise ValueError("frequencies must be positive and sum to 1")
        if np.unique(v).size != v.size:
            raise ValueError("values must be distinct")
        order = np.argsort(v)
        object.__setattr__(self, "values", v[order])
        object.__setattr__(self, "freqs", f[order])

    @classmethod
    def from_sums(cls, sums) -> "CategoricalDistribution":
        vals, counts = np.unique(np.asarray(sums, dtype=float), return_counts=True)
        return cls(vals, counts / counts.sum())

    @classmethod
    def binomial(cls, n: int) -> "CategoricalDistribution":
        """Sum of n independent fair spins (all 2^n configurations equally likely)."""
        k = np.arange(n + 1)
        lognu = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1) - n * math.log(2.0)
        return cls(2.0 * k - n, np.exp(lognu) / np.exp(lognu).sum())

    @classmethod
    def uniform_sum(cls, n: int) -> "CategoricalDistribution":
        """Every attainable value of the sum equally likely."""
        return cls(2.0 * np.arange(n + 1) - n, np.full(n + 1, 1.0 / (n + 1)))


def tied_sum(design, subset: Sequence[int]) -> np.ndarray:
    X = np.asarray(design.data if hasattr(design, "data") else design, dtype=float)
    subset = list(subset)
    if X.ndim != 2:
        raise ValueError("design must be two-dimensional")
    for i in subset:
        if not 0 <= i < X.shape[1]:
            raise IndexError(f"input index {i} out of range for {X.shape[1]} columns")
    if not subset:
        return np.zeros(X.shape[0])
    return X[:, subset].sum(axis=1)


def degenerate_loglik(theta: float, b: float, design_subset, y) -> float:
    """theta mean(y (X - b)) - mean log 2cosh(theta (X - b)).

    ``design_subset`` holds only the tied columns.
    """
    X = np.asarray(design_subset.data if hasattr(design_subset, "data") else design_subset, dtype=float)
    yy = np.asarray(y.y if hasattr(y, "y") else y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if yy.shape != (X.shape[0],):
        raise ValueError(f"design has {X.shape[0]} rows but output has {yy.shape}")
    z = float(theta) * (X.sum(axis=1) - b)
    return float(np.mean(yy * z) - np.mean(log2cosh(z)))


def degenerate_fisher(theta: float, dist: CategoricalDistribution, b: float) -> float:
    a = dist.values - b
    return float(np.sum(dist.freqs * a * a * sech2(theta * a)))


def degenerate_complexity(dist: CategoricalDistribution, b: float = 0.0,
                          rtol: float = 1e-6) -> ComplexityEstimate:
    """Integral of sqrt(F(theta)) over the real line."""
    a = dist.values - b
    live = a != 0
    if not np.any(live):
        return ComplexityEstimate.exact(0.0, "quadrature")
    a, nu = np.abs(a[live]), dist.freqs[live]
    if np.allclose(a, a[0], rtol=0, atol=1e-12):
        # sqrt(F) is sqrt(sum nu) |a| sech(theta a), which integrates to pi sqrt(sum nu)
        return ComplexityEstimate.exact(math.pi * math.sqrt(float(nu.sum())), "closed_form")
    # the integrand is even; integrate over u in (0, 1) with theta = tan(pi u / 2)
    w = nu * a * a

    def f(u):
        c = math.cos(0.5 * math.pi * u)
        if c <= 0.0:
            return 0.0
        th = math.tan(0.5 * math.pi * u)
        return math.sqrt(float(np.sum(w * sech2(th * a)))) * 0.5 * math.pi / (c * c)

    breaks = sorted({2.0 / math.pi * math.atan(1.0 / x) for x in a})
    val, err = integrate.quad(f, 0.0, 1.0, epsabs=0.0, epsrel=rtol * 1e-2, limit=500, points=breaks)
    if not math.isfinite(val) or err > rtol * abs(val):
        raise ArithmeticError(f"degenerate complexity quadrature failed: {val} +/- {err}")
    return ComplexityEstimate.exact(2.0 * val, "quadrature")


# -- bounds ------------------------------------------------------------------------------

def degenerate_upper_bound(dist: CategoricalDistribution) -> float:
    """pi times the sum of sqrt(nu) over observed values."""
    return math.pi * float(np.sum(np.sqrt(dist.freqs)))


def uniform_sum_bound(n: int) -> float:
    return math.pi * math.sqrt(n + 1)


def binomial_bound(n: int) -> float:
    """pi 2^(-n/2) sum_k sqrt(C(n, k))."""
    k = np.arange(n + 1)
    half_log = 0.5 * (gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1) - n * math.log(2.0))
    return math.pi * float(np.sum(np.exp(half_log)))


def quartic_fit(n: int) -> float:
    """Smooth approximation pi (2 pi n + pi/sqrt 2)^(1/4) of the binomial bound."""
    return math.pi * (2.0 * math.pi * n + math.pi / math.sqrt(2.0)) ** 0.25


def complexity_curves(n_values: Sequence[int], b: float = 0.0) -> list[dict]:
    """Rows of complexity and bounds versus n for the two reference input laws."""
    rows = []
    for n in n_values:
        rows.append({
            "n": int(n),
            "uniform_configurations": degenerate_complexity(CategoricalDistribution.binomial(n), b).value,
            "uniform_sum": degenerate_complexity(CategoricalDistribution.uniform_sum(n), b).value,
            "binomial_bound": binomial_bound(n),
            "quartic_fit": quartic_fit(n),
            "uniform_sum_bound": uniform_sum_bound(n),
        })
    return rows


# -- keys analysis -------------------------------------------------------------------------

@dataclass(frozen=True)
class KeysDataset:
    keys: np.ndarray      # T x K, entries +-1
    outcome: np.ndarray   # length T, entries +-1
    names: tuple

    @property
    def T(self) -> int:
        return self.keys.shape[0]

    @property
    def K(self) -> int:
        return self.keys.shape[1]


def read_keys_csv(path) -> KeysDataset:
    header, data = read_table(path)
    if "outcome" not in header:
        raise ValueError(f"{path}: missing 'outcome' column")
    j = header.index("outcome")
    key_cols = [i for i in range(len(header)) if i != j]
    if not key_cols:
        raise ValueError(f"{path}: no key columns")
    if len(key_cols) > MAX_KEYS:
        raise ValueError(f"{path}: {len(key_cols)} keys exceeds the limit of {MAX_KEYS}")
    keys = np.column_stack([_to_spin_column(data[:, i], header[i]) for i in key_cols])
    out = _to_spin_column(data[:, j], "outcome")
    return KeysDataset(keys, out, tuple(header[i] for i in key_cols))


def default_threshold(K: int, false_keys: int = 6) -> float:
    """Midpoint of the sum decision boundary for the rule 'lose when at least
    ``false_keys`` keys are false' with true keys coded +1."""
    return float(K - 2 * false_keys + 1)


@dataclass(frozen=True)
class KeyModelRow:
    subset: tuple
    loglik: float          # normalised, nats per observation
    theta: float
    complexity: float      # e^C
    log_complexity: float  # C
    score: float
    exact_fit: bool


@lru_cache(maxsize=65536)
def _cached_complexity(values: tuple, counts: tuple, b: float) -> float:
    c = np.asarray(counts, dtype=float)
    return degenerate_complexity(CategoricalDistribution(np.asarray(values), c / c.sum()), b).value


def _score_subset(data: KeysDataset, subset: tuple, b: float, fit_cfg: FitConfig) -> KeyModelRow:
    T = data.T
    if not subset:
        return KeyModelRow((), -math.log(2.0), 0.0, 1.0, 0.0, -T * math.log(2.0), False)
    z = tied_sum(data.keys, subset) - b
    fit = fit_mle(z[:, None], data.outcome, fit_cfg)
    vals, counts = np.unique(z + b, return_counts=True)
    ec = _cached_complexity(tuple(vals.tolist()), tuple(counts.tolist()), float(b))
    logc = math.log(ec) if ec > 0 else -math.inf
    score = T * fit.loglik - 0.5 * math.log(T / (2.0 * math.pi)) - logc
    return KeyModelRow(tuple(subset), fit.loglik, float(fit.theta_star[0]), ec, logc, score,
                       fit.loglik >= -EXACT_FIT_TOL)


def enumerate_key_models(data: KeysDataset, b: Optional[float] = None, threads: int = 1,
                         fit_config: FitConfig = FitConfig()) -> list[KeyModelRow]:
    """Scores the null model and every non-empty subset of keys, best first.

    Ties in score are ordered by subset, lexicographically.
    """
    if data.K > MAX_KEYS:
        raise ValueError(f"{data.K} keys exceeds the limit of {MAX_KEYS}")
    if b is None:
        b = default_threshold(data.K)
    subsets = [()] + [c for r in range(1, data.K + 1) for c in itertools.combinations(range(data.K), r)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda s: _score_subset(data, s, b, fit_config), subsets))
    else:
        rows = [_score_subset(data, s, b, fit_config) for s in subsets]
    rows.sort(key=lambda r: (-r.score, r.subset))
    return rows


def delta_rank(loglik_terms, log_complexities) -> np.ndarray:
    """Per-model window half-width at which likelihood variation catches up with
    complexity variation.

    Inputs are aligned arrays sorted by non-decreasing likelihood term T*l. For
    model i the window [i-k, i+k] is clipped to the table; the result is the
    smallest k >= 1 whose likelihood spread is at least the spread (max - min) of
    the log-complexity inside the window. A table with no variation at all gives
    zeros; a model whose condition never holds gets the widest window.
    """
    L = np.asarray(loglik_terms, dtype=float)
    C = np.asarray(log_complexities, dtype=float)
    m = L.shape[0]
    if m < 3 or C.shape != L.shape:
        raise ValueError("need at least three aligned models")
    if np.any(np.diff(L) < 0):
        raise ValueError("models must be sorted by non-decreasing likelihood")
    if not (np.all(np.isfinite(L)) and np.all(np.isfinite(C))):
        raise ValueError("likelihood and complexity terms must be finite")
    if np.ptp(L) == 0 and np.ptp(C) == 0:
        return np.zeros(m, dtype=int)
    out = np.empty(m, dtype=int)
    for i in range(m):
        widest = max(i, m - 1 - i)
        k = np.arange(1, widest + 1)
        lo, hi = np.maximum(0, i - k), np.minimum(m - 1, i + k)
        # running extremes of C over the left and right halves of the window
        left_max, left_min = np.maximum.accumulate(C[i::-1]), np.minimum.accumulate(C[i::-1])
        right_max, right_min = np.maximum.accumulate(C[i:]), np.minimum.accumulate(C[i:])
        spread_c = (np.maximum(left_max[i - lo], right_max[hi - i])
                    - np.minimum(left_min[i - lo], right_min[hi - i]))
        ok = np.nonzero(L[hi] - L[lo] >= spread_c)[0]
        out[i] = k[ok[0]] if ok.size else widest
    return out


def delta_rank_table(rows: Sequence[KeyModelRow], T: int):
    """Sorts non-null, finite-complexity models by likelihood and returns
    (sorted rows, delta ranks)."""
    usable = [r for r in rows if r.subset and math.isfinite(r.log_complexity)]
    if len(usable) < 3:
        warnings.warn("fewer than three usable models for delta rank")
        return usable, np.zeros(len(usable), dtype=int)
    usable.sort(key=lambda r: (r.loglik, r.subset))
    dr = delta_rank([T * r.loglik for r in usable], [r.log_complexity for r in usable])
    return usable, dr
