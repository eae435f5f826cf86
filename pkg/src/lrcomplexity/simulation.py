"""Synthetic data: Ising-distributed inputs, planted sparse truths, and
reconstruction-error sweeps over (beta, k, sparsity, criterion)."""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import BinaryDesign, EmpiricalInputDistribution, ModelSpec, OutputVector, all_configurations
from .selection import resolve_criteria, select

CONVENTIONS = ("printed", "ferromagnetic")
EXACT_MAX_N = 10


@dataclass(frozen=True)
class IsingInputConfig:
    """Inputs drawn from p(x) proportional to exp(s (beta J sum_{i<j} x_i x_j + beta h sum_i x_i)).

    s = -1 for the ``printed`` convention and s = +1 for ``ferromagnetic``.
    J defaults to 1/N.
    """

    N: int
    beta: float
    J: Optional[float] = None
    h: float = 0.1
    burn_in: int = 1000
    thinning: int = 10
    chains: int = 64
    convention: str = "printed"

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be positive")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.burn_in < 1 or self.thinning < 1 or self.chains < 1:
            raise ValueError("burn_in, thinning and chains must be at least 1")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"convention must be one of {CONVENTIONS}")

    @property
    def coupling(self) -> float:
        return 1.0 / self.N if self.J is None else float(self.J)

    @property
    def sign(self) -> float:
        return -1.0 if self.convention == "printed" else 1.0


def ising_log_weights(config: IsingInputConfig, X: np.ndarray) -> np.ndarray:
    """Unnormalised log-probabilities of the rows of X."""
    M = X.sum(axis=1)
    pair = 0.5 * (M * M - X.shape[1])  # sum over i<j of x_i x_j
    return config.sign * config.beta * (config.coupling * pair + config.h * M)


def ising_distribution(config: IsingInputConfig) -> EmpiricalInputDistribution:
    """Exact distribution over all 2^N configurations (N <= 20)."""
    if config.N > 20:
        raise ValueError("exact enumeration is limited to N <= 20")
    X = all_configurations(config.N)
    logw = ising_log_weights(config, X)
    p = np.exp(logw - logw.max())
    p /= p.sum()
    keep = p > 0
    p = p[keep] / p[keep].sum()
    return EmpiricalInputDistribution(X[keep], p)


def _gibbs(config: IsingInputConfig, T: int, rng: np.random.Generator) -> np.ndarray:
    N, C = config.N, min(config.chains, T)
    per_chain = -(-T // C)
    a = config.sign * config.beta
    J, h = config.coupling, config.h
    x = rng.choice([-1.0, 1.0], size=(C, N))
    M = x.sum(axis=1)
    out = np.empty((per_chain, C, N))

    def sweep():
        nonlocal M
        u = rng.random((N, C))
        for i in range(N):
            field_i = a * (J * (M - x[:, i]) + h)
            new = np.where(u[i] < 0.5 * (1.0 + np.tanh(field_i)), 1.0, -1.0)
            M = M + new - x[:, i]
            x[:, i] = new

    for _ in range(config.burn_in):
        sweep()
    for s in range(per_chain):
        for _ in range(config.thinning):
            sweep()
        out[s] = x
    # interleave chains so any prefix mixes all of them
    return out.reshape(per_chain * C, N)[:T]


def sample_ising(config: IsingInputConfig, T: int, rng) -> BinaryDesign:
    """T input rows. Exact sampling for N <= 10, single-site Gibbs otherwise."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    if T < 1:
        raise ValueError("T must be positive")
    if config.N <= EXACT_MAX_N:
        dist = ising_distribution(config)
        idx = rng.choice(len(dist), size=T, p=dist.freqs)
        return BinaryDesign(dist.support[idx])
    return BinaryDesign(_gibbs(config, T, rng))


@dataclass(frozen=True)
class GroundTruth:
    active: tuple
    weights: np.ndarray   # length N, zero off the active set
    sparsity: float

    @property
    def spec(self) -> ModelSpec:
        return ModelSpec(tuple(sorted(self.active)))


def active_count(N: int, sparsity: float) -> int:
    """round((1 - s) N), halves rounded up, at least 1."""
    if not 0.0 <= sparsity < 1.0:
        raise ValueError("sparsity must lie in [0, 1)")
    return max(1, int(math.floor((1.0 - sparsity) * N + 0.5)))


def sample_ground_truth(N: int, sparsity: float, rng) -> GroundTruth:
    """Random active set of size round((1-s)N); weights uniform on +-[1/2, 3/2],
    divided by sqrt(n)."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    n = active_count(N, sparsity)
    active = np.sort(rng.choice(N, size=n, replace=False))
    mag = rng.uniform(0.5, 1.5, size=n)
    sign = rng.choice([-1.0, 1.0], size=n)
    w = np.zeros(N)
    w[active] = sign * mag / math.sqrt(n)
    return GroundTruth(tuple(int(i) for i in active), w, float(sparsity))


def generate_output(design: BinaryDesign, truth: GroundTruth, rng) -> OutputVector:
    """y = +1 with probability e^z / (2 cosh z), z = w . x."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    if truth.weights.shape[0] != design.N:
        raise ValueError(f"truth has {truth.weights.shape[0]} weights, design has {design.N} inputs")
    z = design.data @ truth.weights
    p_up = 0.5 * (1.0 + np.tanh(z))
    return OutputVector(np.where(rng.random(design.T) < p_up, 1.0, -1.0))


# -- experiment sweep --------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    N: int = 20
    k_values: tuple = (5, 50, 200)
    beta_values: tuple = (0.01, 0.75, 1.5)
    sparsity_values: tuple = (0.0, 0.2, 0.4, 0.6, 0.8)
    realizations: int = 20
    criteria: tuple = ("heuristic", "bic", "aic", "l1")
    search: str = "decimation"
    seed: int = 0
    convention: str = "printed"
    burn_in: int = 1000
    thinning: int = 10

    def __post_init__(self):
        if self.N < 1 or self.realizations < 1:
            raise ValueError("N and realizations must be positive")
        if not (self.k_values and self.beta_values and self.sparsity_values and self.criteria):
            raise ValueError("every sweep axis needs at least one value")
        if any(k < 1 for k in self.k_values):
            raise ValueError("k values must be positive")
        if any(b < 0 for b in self.beta_values):
            raise ValueError("beta values must be non-negative")
        if any(not 0.0 <= s < 1.0 for s in self.sparsity_values):
            raise ValueError("sparsity values must lie in [0, 1)")
        object.__setattr__(self, "criteria", resolve_criteria(self.criteria))
        for name in ("k_values", "beta_values", "sparsity_values"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    def to_dict(self) -> dict:
        return {
            "N": self.N, "k_values": list(self.k_values), "beta_values": list(self.beta_values),
            "sparsity_values": list(self.sparsity_values), "realizations": self.realizations,
            "criteria": list(self.criteria), "search": self.search, "seed": self.seed,
            "convention": self.convention, "burn_in": self.burn_in, "thinning": self.thinning,
        }


@dataclass(frozen=True)
class Task:
    ib: int
    ik: int
    js: int
    r: int


def realization_data(config: ExperimentConfig, task: Task):
    """(design, outputs, truth, selection seed) for one cell and realization."""
    beta = config.beta_values[task.ib]
    k = config.k_values[task.ik]
    s = config.sparsity_values[task.js]
    ss = np.random.SeedSequence([config.seed, task.ib, task.ik, task.js, task.r])
    r_in, r_truth, r_out, r_sel = (np.random.default_rng(c) for c in ss.spawn(4))
    ising = IsingInputConfig(config.N, beta, burn_in=config.burn_in, thinning=config.thinning,
                             convention=config.convention)
    X = sample_ising(ising, k * config.N, r_in)
    truth = sample_ground_truth(config.N, s, r_truth)
    y = generate_output(X, truth, r_out)
    return X, y, truth, int(r_sel.integers(2 ** 63))


def run_realization(config: ExperimentConfig, task: Task) -> dict:
    """Reconstruction error per criterion for one cell and realization (NaN on failure)."""
    try:
        X, y, truth, seed = realization_data(config, task)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            reports = select(X, y, config.criteria, config.search, seed=seed)
        return {c: reports[c].with_truth(truth.spec, config.N).error for c in config.criteria}
    except (ValueError, ArithmeticError, np.linalg.LinAlgError):
        return {c: math.nan for c in config.criteria}


def _run_one(args):
    return run_realization(*args)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list = field(default_factory=list)   # (beta, k, sparsity, criterion, realization, error)

    def summary(self) -> list:
        cells: dict = {}
        for beta, k, s, c, _, err in self.rows:
            cells.setdefault((beta, k, s, c), []).append(err)
        out = []
        for key, errs in cells.items():
            e = np.array([v for v in errs if not math.isnan(v)])
            cnt = e.size
            mean = float(e.mean()) if cnt else math.nan
            std = float(e.std(ddof=1)) if cnt > 1 else math.nan
            sem = std / math.sqrt(cnt) if cnt > 1 else math.nan
            out.append((*key, mean, std, sem, cnt))
        return out

    def cell(self, beta, k, s, criterion) -> np.ndarray:
        return np.array([r[5] for r in self.rows if r[:4] == (beta, k, s, criterion)])


def fmt(x) -> str:
    """17 significant digits for floats, empty cell for missing values."""
    if isinstance(x, (float, np.floating)):
        return "" if math.isnan(x) else format(float(x), ".17g")
    return str(x)


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    tasks = [Task(ib, ik, js, r)
             for ib in range(len(config.beta_values))
             for ik in range(len(config.k_values))
             for js in range(len(config.sparsity_values))
             for r in range(config.realizations)]
    args = [(config, t) for t in tasks]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, args, chunksize=max(1, len(args) // (8 * workers))))
    else:
        results = [_run_one(a) for a in args]
    res = ExperimentResult(config)
    for t, errs in zip(tasks, results):
        for c in config.criteria:
            res.rows.append((config.beta_values[t.ib], config.k_values[t.ik],
                             config.sparsity_values[t.js], c, t.r, errs[c]))
    return res


def write_results(result: ExperimentResult, outdir) -> tuple[Path, Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    long_path, summary_path = outdir / "results.csv", outdir / "summary.csv"
    with long_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["beta", "k", "sparsity", "criterion", "realization", "error"])
        for row in result.rows:
            w.writerow([fmt(v) for v in row])
    with summary_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["beta", "k", "sparsity", "criterion", "mean", "std", "sem", "count"])
        for row in result.summary():
            w.writerow([fmt(v) for v in row])
    return long_path, summary_path
