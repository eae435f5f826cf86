"""Penalised scores for input subsets and the searches that produce candidate subsets.

Every score has the form total = T * l(theta*) + penalty, in nats.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .complexity import (ComplexityEstimate, QuadConfig, complexity_closed_form,
                         complexity_quadrature)
from .core import (BinaryDesign, ModelSpec, OutputVector, empirical_distribution,
                   entropy_bits, project_design)
from .likelihood import FitConfig, FitResult, fit_mle, log2cosh
from .montecarlo import complexity_monte_carlo

CRITERIA = ("heuristic", "bic", "aic", "exact_posterior", "l1")
DEFAULT_ALL = ("heuristic", "bic", "aic", "l1")
SEARCHES = ("decimation", "forward", "exhaustive")
MAX_EXHAUSTIVE = 15


# -- penalties ---------------------------------------------------------------------------

def penalty_heuristic(n: int, T: int, H_n: float, H_N: float) -> float:
    """-n/2 - (n/2) ln(T H_n / (n H_N)) + ln n, entropies in bits."""
    if n == 0:
        return 0.0
    if n < 0 or T < 1:
        raise ValueError(f"need n >= 0 and T >= 1, got n={n}, T={T}")
    if H_N <= 0:
        raise ValueError("the full design has zero entropy; the entropy heuristic is undefined, "
                         "use exhaustive search with the exact_posterior criterion instead")
    if H_n <= 0:
        raise ValueError("the candidate's inputs have zero entropy")
    return -0.5 * n - 0.5 * n * math.log(T * H_n / (n * H_N)) + math.log(n)


def penalty_bic(n: int, T: int) -> float:
    if n < 0 or T < 1:
        raise ValueError(f"need n >= 0 and T >= 1, got n={n}, T={T}")
    return -0.5 * n * math.log(T / (2.0 * math.pi))


def penalty_aic(n: int) -> float:
    if n < 0:
        raise ValueError("n must be non-negative")
    return -float(n)


# -- scores and reports ------------------------------------------------------------------

@dataclass(frozen=True)
class CriterionScore:
    model: ModelSpec
    loglik_term: float
    penalty: float
    total: float
    criterion: str
    flagged: bool = False
    note: str = ""

    @classmethod
    def make(cls, model, loglik_term, penalty, criterion, note=""):
        return cls(model, float(loglik_term), float(penalty), float(loglik_term) + float(penalty),
                   criterion, False, note)

    @classmethod
    def failed(cls, model, criterion, note):
        return cls(model, math.nan, math.nan, math.nan, criterion, True, note)

    def to_dict(self) -> dict:
        return {
            "active": list(self.model.active),
            "has_bias": self.model.has_bias,
            "n": self.model.n,
            "loglik_term": self.loglik_term,
            "penalty": self.penalty,
            "total": self.total,
            "flagged": self.flagged,
            "note": self.note,
        }


def reconstruction_error(chosen: ModelSpec, truth: ModelSpec, N: int) -> float:
    """Fraction of the N inputs whose zero/non-zero status is wrong."""
    a, b = chosen.active_set(), truth.active_set()
    for i in a | b:
        if not 0 <= i < N:
            raise IndexError(f"input index {i} out of range for N={N}")
    return len(a ^ b) / N


@dataclass(frozen=True)
class SelectionReport:
    criterion: str
    search: str
    scores: tuple
    chosen: Optional[ModelSpec]
    truth: Optional[ModelSpec] = None
    error: Optional[float] = None
    extra: dict = field(default_factory=dict, compare=False)

    def with_truth(self, truth: ModelSpec, N: int) -> "SelectionReport":
        err = None if self.chosen is None else reconstruction_error(self.chosen, truth, N)
        return replace(self, truth=truth, error=err)

    def best(self) -> Optional[CriterionScore]:
        """Highest-scoring entry for the chosen model (an l1 path can repeat a support)."""
        hits = [s for s in self.scores if s.model == self.chosen and not s.flagged]
        return max(hits, key=lambda s: s.total) if hits else None

    def to_dict(self) -> dict:
        best = self.best()
        out = {
            "criterion": self.criterion,
            "search": self.search,
            "chosen": None if self.chosen is None else sorted(self.chosen.active),
            "chosen_total": None if best is None else best.total,
            "candidates": [s.to_dict() for s in self.scores],
        }
        if self.truth is not None:
            out["truth"] = sorted(self.truth.active)
            out["error"] = self.error
        out.update(self.extra)
        return out


def choose(scores: Sequence[CriterionScore]) -> Optional[ModelSpec]:
    """Highest total among unflagged candidates; ties go to the smaller model,
    then to the earlier candidate."""
    best = None
    for s in scores:
        if s.flagged or not math.isfinite(s.total):
            continue
        if best is None or s.total > best.total or (s.total == best.total and s.model.n < best.model.n):
            best = s
    return None if best is None else best.model


# -- candidate fitting ---------------------------------------------------------------------

@dataclass(frozen=True)
class Candidate:
    spec: ModelSpec
    fit: Optional[FitResult]
    note: str = ""


def _as_design(design) -> BinaryDesign:
    return design if isinstance(design, BinaryDesign) else BinaryDesign(np.asarray(design, dtype=float))


def _as_output(y) -> OutputVector:
    return y if isinstance(y, OutputVector) else OutputVector(np.asarray(y, dtype=float))


def _fit(design, y, spec, fit_config) -> Candidate:
    try:
        fit = fit_mle(project_design(design, spec), y, fit_config)
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        return Candidate(spec, None, f"fit failed: {exc}")
    return Candidate(spec, fit)


def decimation_path(design, y, has_bias=False, fit_config: FitConfig = FitConfig()) -> list[Candidate]:
    """Nested candidates from all N inputs down to none, dropping the smallest |theta*|.

    Ties drop the lowest index. If a fit fails, the next drop uses the last good fit.
    """
    design, y = _as_design(design), _as_output(y)
    active = list(range(design.N))
    magnitude = {i: 0.0 for i in active}
    path = []
    while True:
        cand = _fit(design, y, ModelSpec(tuple(active), has_bias), fit_config)
        path.append(cand)
        if not active:
            return path
        if cand.fit is not None:
            magnitude = {i: abs(float(t)) for i, t in zip(active, cand.fit.theta_star)}
        drop = min(active, key=lambda i: (magnitude[i], i))
        active.remove(drop)


def forward_path(design, y, has_bias=False, fit_config: FitConfig = FitConfig()) -> list[Candidate]:
    """Nested candidates from no inputs up to all N, adding the input with the
    largest likelihood gain at each step (ties to the lowest index)."""
    design, y = _as_design(design), _as_output(y)
    active: list[int] = []
    path = [_fit(design, y, ModelSpec((), has_bias), fit_config)]
    remaining = list(range(design.N))
    while remaining:
        trials = [_fit(design, y, ModelSpec(tuple(active + [i]), has_bias), fit_config) for i in remaining]
        gains = [c.fit.loglik if c.fit is not None else -math.inf for c in trials]
        k = int(np.argmax(gains))
        active.append(remaining.pop(k))
        path.append(trials[k])
    return path


def exhaustive_candidates(design, y, has_bias=False, max_N: int = MAX_EXHAUSTIVE,
                          fit_config: FitConfig = FitConfig()) -> list[Candidate]:
    design, y = _as_design(design), _as_output(y)
    if design.N > max_N:
        raise ValueError(f"exhaustive search over N={design.N} inputs exceeds the limit of {max_N}")
    return [_fit(design, y, ModelSpec(c, has_bias), fit_config)
            for r in range(design.N + 1) for c in itertools.combinations(range(design.N), r)]


# -- scoring ----------------------------------------------------------------------------------

def estimate_complexity(dist, method: str = "auto", seed: int = 0, mc_samples: int = 100_000,
                        mc_batches: int = 20, threads: Optional[int] = None) -> ComplexityEstimate:
    """e^C by closed form when available, else quadrature (n <= 3), else Monte Carlo."""
    if method in ("auto", "closed_form"):
        est = complexity_closed_form(dist)
        if est is not None:
            return est
        if method == "closed_form":
            raise ValueError("no closed form applies to this distribution")
    if method == "quadrature" or (method == "auto" and dist.n <= 3):
        return complexity_quadrature(dist, QuadConfig())
    if method in ("auto", "monte_carlo"):
        return complexity_monte_carlo(dist, mc_samples, mc_batches, seed, threads)
    raise ValueError(f"unknown complexity method {method!r}")


def score_exact_posterior(design, y, spec: ModelSpec, complexity_method: str = "auto",
                          seed: int = 0, fit: Optional[FitResult] = None,
                          **mc_options) -> CriterionScore:
    """T l(theta*) - (n/2) ln(T / 2 pi) - C."""
    design, y = _as_design(design), _as_output(y)
    proj = project_design(design, spec)
    if fit is None:
        fit = fit_mle(proj, y)
    T = design.T
    if spec.n == 0:
        return CriterionScore.make(spec, T * fit.loglik, 0.0, "exact_posterior")
    est = estimate_complexity(empirical_distribution(proj), complexity_method, seed, **mc_options)
    if est.value == 0.0:
        return CriterionScore.failed(spec, "exact_posterior", "redundant inputs: zero complexity")
    return CriterionScore.make(spec, T * fit.loglik, penalty_bic(spec.n, T) - est.log_value,
                               "exact_posterior", note=f"C={est.log_value:.6g} ({est.method})")


def score_candidates(design, y, candidates: Sequence[Candidate], criterion: str,
                     seed: int = 0, complexity_method: str = "auto", **mc_options) -> list[CriterionScore]:
    design, y = _as_design(design), _as_output(y)
    T = design.T
    H_N = entropy_bits(empirical_distribution(design)) if criterion == "heuristic" else None
    if criterion == "heuristic" and H_N <= 0:
        penalty_heuristic(1, T, 1.0, H_N)  # raises with the fallback advice
    out = []
    for cand in candidates:
        spec = cand.spec
        if cand.fit is None:
            out.append(CriterionScore.failed(spec, criterion, cand.note))
            continue
        ll = T * cand.fit.loglik
        if criterion == "bic":
            out.append(CriterionScore.make(spec, ll, penalty_bic(spec.n, T), criterion))
        elif criterion == "aic":
            out.append(CriterionScore.make(spec, ll, penalty_aic(spec.n), criterion))
        elif criterion == "heuristic":
            if spec.n == 0:
                out.append(CriterionScore.make(spec, ll, 0.0, criterion))
                continue
            H_n = entropy_bits(empirical_distribution(project_design(design, spec)))
            if H_n <= 0:
                out.append(CriterionScore.failed(spec, criterion, "zero-entropy inputs"))
                continue
            out.append(CriterionScore.make(spec, ll, penalty_heuristic(spec.n, T, H_n, H_N), criterion))
        elif criterion == "exact_posterior":
            out.append(score_exact_posterior(design, y, spec, complexity_method, seed,
                                             fit=cand.fit, **mc_options))
        else:
            raise ValueError(f"criterion {criterion!r} does not score fixed candidates")
    return out


def _candidates(design, y, search, has_bias, max_N):
    if search == "decimation":
        return decimation_path(design, y, has_bias)
    if search == "forward":
        return forward_path(design, y, has_bias)
    if search == "exhaustive":
        return exhaustive_candidates(design, y, has_bias, max_N)
    raise ValueError(f"unknown search {search!r}; expected one of {SEARCHES}")


def _search(design, y, criterion, search, has_bias=False, max_N=MAX_EXHAUSTIVE, **opts) -> SelectionReport:
    cands = _candidates(design, y, search, has_bias, max_N)
    scores = score_candidates(design, y, cands, criterion, **opts)
    return SelectionReport(criterion, search, tuple(scores), choose(scores))


def search_decimation(design, y, criterion: str = "heuristic", **opts) -> SelectionReport:
    return _search(design, y, criterion, "decimation", **opts)


def search_forward(design, y, criterion: str = "heuristic", **opts) -> SelectionReport:
    return _search(design, y, criterion, "forward", **opts)


def search_exhaustive(design, y, criterion: str = "heuristic", max_N: int = MAX_EXHAUSTIVE,
                      **opts) -> SelectionReport:
    return _search(design, y, criterion, "exhaustive", max_N=max_N, **opts)


# -- l1-regularised baseline ---------------------------------------------------------------

@dataclass(frozen=True)
class L1Config:
    n_lambda: int = 30
    lo: float = 1e-4
    hi: float = 10.0
    folds: int = 5
    tol: float = 1e-8
    max_iter: int = 5000
    threshold: float = 1e-6


def lambda_grid(design, y, config: L1Config = L1Config()) -> np.ndarray:
    """Log-spaced grid, largest first, scaled by the smallest lambda giving an empty support."""
    X, yy = _as_design(design).data, _as_output(y).y
    lam_max = float(np.max(np.abs(X.T @ yy / X.shape[0])))
    if lam_max == 0.0:
        lam_max = 1.0
    return np.geomspace(config.hi, config.lo, config.n_lambda) * lam_max


def _l1_path(X, yy, lambdas, config: L1Config) -> np.ndarray:
    """FISTA solutions of -l(theta) + lam |theta|_1 along a decreasing grid, warm-started."""
    T, n = X.shape
    L = float(np.linalg.eigvalsh(X.T @ X / T)[-1]) if n else 1.0
    step = 1.0 / L
    yx = X.T @ yy / T
    theta = np.zeros(n)
    out = np.empty((len(lambdas), n))
    for j, lam in enumerate(lambdas):
        z, t = theta.copy(), 1.0
        for _ in range(config.max_iter):
            grad = X.T @ np.tanh(X @ z) / T - yx
            w = z - step * grad
            new = np.sign(w) * np.maximum(np.abs(w) - step * lam, 0.0)
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            z = new + ((t - 1.0) / t_new) * (new - theta)
            done = np.max(np.abs(new - theta), initial=0.0) <= config.tol
            theta, t = new, t_new
            if done:
                break
        out[j] = theta
    return out


def _mean_loglik(X, yy, theta) -> float:
    z = X @ theta
    return float(np.mean(yy * z - log2cosh(z)))


def fit_l1_cv(design, y, lambdas: Optional[Sequence[float]] = None, K: int = 5, seed: int = 0,
              config: L1Config = L1Config()) -> SelectionReport:
    """l1-penalised logistic regression with lambda picked by K-fold held-out likelihood.

    Each candidate's loglik_term is T l on the full data at that lambda and its total is
    T times the mean held-out log-likelihood, so the chosen model maximises total.
    """
    design, y = _as_design(design), _as_output(y)
    X, yy = design.data, y.y
    T = X.shape[0]
    if not 2 <= K <= T:
        raise ValueError(f"need 2 <= K <= T, got K={K}, T={T}")
    lam = lambda_grid(design, y, config) if lambdas is None else np.sort(np.asarray(lambdas, float))[::-1]
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x11]))
    fold = np.empty(T, dtype=int)
    fold[rng.permutation(T)] = np.arange(T) % K
    held = np.zeros(len(lam))
    used = 0
    for k in range(K):
        train, test = fold != k, fold == k
        if np.unique(yy[train]).size < 2:
            warnings.warn(f"fold {k} skipped: training outputs are all equal")
            continue
        path = _l1_path(X[train], yy[train], lam, config)
        held += np.array([_mean_loglik(X[test], yy[test], th) for th in path]) * test.sum()
        used += int(test.sum())
    if used == 0:
        raise ValueError("every cross-validation fold was degenerate")
    held /= used
    full = _l1_path(X, yy, lam, config)
    scores = []
    for j, th in enumerate(full):
        spec = ModelSpec(tuple(int(i) for i in np.nonzero(np.abs(th) > config.threshold)[0]))
        ll = T * _mean_loglik(X, yy, th)
        scores.append(CriterionScore.make(spec, ll, T * held[j] - ll, "l1", note=f"lambda={lam[j]:.6g}"))
    best = max(range(len(scores)), key=lambda j: (scores[j].total, -scores[j].model.n, -j))
    return SelectionReport("l1", "l1_path", tuple(scores), scores[best].model,
                           extra={"lambda": float(lam[best])})


# -- convenience -----------------------------------------------------------------------------

def resolve_criteria(names) -> tuple:
    if isinstance(names, str):
        names = [names]
    out = []
    for name in names:
        name = "exact_posterior" if name == "exact" else name
        if name == "all":
            out.extend(DEFAULT_ALL)
        elif name in CRITERIA:
            out.append(name)
        else:
            raise ValueError(f"unknown criterion {name!r}")
    return tuple(dict.fromkeys(out))


def select(design, y, criteria=DEFAULT_ALL, search: str = "decimation", has_bias: bool = False,
           seed: int = 0, max_N: int = MAX_EXHAUSTIVE, **opts) -> dict:
    """Runs one candidate search and scores it under each criterion; l1 runs its own path."""
    design, y = _as_design(design), _as_output(y)
    criteria = resolve_criteria(criteria)
    reports = {}
    cands = None
    for c in criteria:
        if c == "l1":
            reports[c] = fit_l1_cv(design, y, seed=seed)
            continue
        if cands is None:
            cands = _candidates(design, y, search, has_bias, max_N)
        scores = score_candidates(design, y, cands, c, seed=seed, **opts)
        reports[c] = SelectionReport(c, search, tuple(scores), choose(scores))
    return reports
