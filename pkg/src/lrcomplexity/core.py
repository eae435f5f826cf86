"""Shared data model: binary designs, empirical input distributions, model specs."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


def _as_spins(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.size and not np.all((arr == 1.0) | (arr == -1.0)):
        raise ValueError(f"{name} entries must be exactly -1 or +1")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class BinaryDesign:
    """T x N matrix of +-1 input observations (rows are observations)."""

    data: np.ndarray
    names: Optional[tuple] = None

    def __post_init__(self):
        arr = _as_spins(self.data, "design")
        if arr.ndim != 2:
            raise ValueError("design must be a 2-D matrix")
        if arr.shape[0] < 1:
            raise ValueError("design needs at least one observation")
        object.__setattr__(self, "data", arr)
        if self.names is not None:
            names = tuple(str(s) for s in self.names)
            if len(names) != arr.shape[1]:
                raise ValueError("names must match the number of columns")
            object.__setattr__(self, "names", names)

    @property
    def T(self) -> int:
        return self.data.shape[0]

    @property
    def N(self) -> int:
        return self.data.shape[1]

    def column(self, i: int) -> np.ndarray:
        return self.data[:, i]


@dataclass(frozen=True)
class OutputVector:
    y: np.ndarray

    def __post_init__(self):
        arr = _as_spins(self.y, "output")
        if arr.ndim != 1:
            raise ValueError("output must be a vector")
        object.__setattr__(self, "y", arr)

    def __len__(self) -> int:
        return self.y.shape[0]


@dataclass(frozen=True)
class EmpiricalInputDistribution:
    """Distinct configurations and their observed frequencies."""

    support: np.ndarray
    freqs: np.ndarray

    def __post_init__(self):
        sup = np.asarray(self.support, dtype=float)
        if sup.ndim == 1:
            sup = sup.reshape(1, -1)
        fr = np.asarray(self.freqs, dtype=float).ravel()
        if sup.shape[0] != fr.shape[0]:
            raise ValueError("one frequency per support configuration is required")
        if np.any(fr <= 0):
            raise ValueError("frequencies must be strictly positive")
        if abs(fr.sum() - 1.0) > 1e-12:
            raise ValueError(f"frequencies sum to {fr.sum()!r}, not 1")
        if sup.size and not np.all((sup == 1.0) | (sup == -1.0)):
            raise ValueError("support entries must be exactly -1 or +1")
        if len({row.tobytes() for row in sup}) != sup.shape[0]:
            raise ValueError("support configurations must be distinct")
        sup = sup.copy()
        fr = fr.copy()
        sup.setflags(write=False)
        fr.setflags(write=False)
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "freqs", fr)

    @property
    def n(self) -> int:
        return self.support.shape[1]

    def __len__(self) -> int:
        return self.support.shape[0]

    @classmethod
    def uniform(cls, n: int) -> "EmpiricalInputDistribution":
        """Uniform distribution over all 2^n configurations."""
        sup = all_configurations(n)
        return cls(sup, np.full(len(sup), 1.0 / len(sup)))

    @classmethod
    def from_weights(cls, support, weights) -> "EmpiricalInputDistribution":
        """Normalise non-negative weights, dropping zero-weight configurations."""
        w = np.asarray(weights, dtype=float)
        sup = np.asarray(support, dtype=float)
        keep = w > 0
        w = w[keep] / w[keep].sum()
        return cls(sup[keep], w)


@dataclass(frozen=True)
class ModelSpec:
    """A candidate model: active input columns, optional bias, optional box bound."""

    active: tuple = ()
    has_bias: bool = False
    box: Optional[float] = None

    def __post_init__(self):
        act = tuple(int(i) for i in self.active)
        if len(set(act)) != len(act):
            raise ValueError(f"active indices must be distinct, got {act}")
        if any(i < 0 for i in act):
            raise ValueError(f"active indices must be non-negative, got {act}")
        object.__setattr__(self, "active", act)
        if self.box is not None and not (math.isfinite(self.box) and self.box > 0):
            raise ValueError("box bound must be finite and positive")

    @property
    def n(self) -> int:
        return len(self.active) + (1 if self.has_bias else 0)

    def active_set(self) -> frozenset:
        return frozenset(self.active)


def all_configurations(n: int) -> np.ndarray:
    """All 2^n +-1 configurations, first column varying slowest."""
    if n == 0:
        return np.zeros((1, 0))
    grids = np.indices((2,) * n).reshape(n, -1).T
    return 1.0 - 2.0 * grids


def project_design(design: BinaryDesign, spec: ModelSpec) -> BinaryDesign:
    """Keep the active columns (in spec order) and append a +1 column for the bias."""
    for i in spec.active:
        if i >= design.N:
            raise IndexError(f"active index {i} out of range for design with {design.N} columns")
    cols = [design.data[:, list(spec.active)]]
    names = None
    if design.names is not None:
        names = [design.names[i] for i in spec.active]
    if spec.has_bias:
        cols.append(np.ones((design.T, 1)))
        if names is not None:
            names.append("bias")
    data = np.hstack(cols) if cols else np.zeros((design.T, 0))
    return BinaryDesign(data, tuple(names) if names is not None else None)


def empirical_distribution(design: BinaryDesign) -> EmpiricalInputDistribution:
    """Frequencies of the distinct rows of the design."""
    sup, counts = unique_rows(design.data)
    return EmpiricalInputDistribution(sup, counts / design.T)


def unique_rows(data: np.ndarray):
    """Distinct rows and their counts, compared as exact bit patterns."""
    data = np.ascontiguousarray(data)
    if data.shape[1] == 0:
        return np.zeros((1, 0)), np.array([data.shape[0]], dtype=float)
    sup, counts = np.unique(data, axis=0, return_counts=True)
    return sup, counts.astype(float)


def entropy_bits(dist: EmpiricalInputDistribution) -> float:
    p = dist.freqs
    h = -float(np.sum(p * np.log2(p)))
    return max(h, 0.0)


def design_rank(design) -> int:
    """Numerical rank of the matrix of distinct observed configurations.

    Accepts a BinaryDesign, an EmpiricalInputDistribution or a raw matrix.
    """
    if isinstance(design, EmpiricalInputDistribution):
        rows = design.support
    else:
        data = design.data if isinstance(design, BinaryDesign) else np.asarray(design, float)
        rows = unique_rows(data)[0]
    return matrix_rank(rows)


def matrix_rank(rows: np.ndarray) -> int:
    if rows.size == 0:
        return 0
    s = np.linalg.svd(rows, compute_uv=False)
    tol = max(rows.shape) * np.finfo(float).eps * s.max()
    return int(np.sum(s > tol))


# -- CSV ingestion ---------------------------------------------------------------

def _to_spin_column(values: Sequence[float], name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    uniq = set(np.unique(arr).tolist())
    if uniq <= {0.0, 1.0}:
        return 2.0 * arr - 1.0
    if uniq <= {-1.0, 1.0}:
        return arr
    raise ValueError(f"column {name!r} must be binary (0/1 or -1/+1), found {sorted(uniq)}")


def read_table(path) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric value") from None
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return header, np.array(rows)


def read_design_csv(path, output_column: str = "y") -> tuple[BinaryDesign, Optional[OutputVector]]:
    """Read a design (and the output column if present) from a CSV with a header row.

    Binary columns coded 0/1 are mapped to -1/+1 (0 -> -1).
    """
    header, table = read_table(path)
    cols = {name: _to_spin_column(table[:, j], name) for j, name in enumerate(header)}
    names = [h for h in header if h != output_column]
    if not names:
        raise ValueError(f"{path}: no input columns")
    design = BinaryDesign(np.column_stack([cols[h] for h in names]), tuple(names))
    y = OutputVector(cols[output_column]) if output_column in cols else None
    return design, y


def write_design_csv(path, design: BinaryDesign, y: Optional[OutputVector] = None) -> None:
    names = design.names or tuple(f"x{i + 1}" for i in range(design.N))
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(names) + (["y"] if y is not None else []))
        for t in range(design.T):
            row = [int(v) for v in design.data[t]]
            if y is not None:
                row.append(int(y.y[t]))
            w.writerow(row)
