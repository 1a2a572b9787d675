"""Hyperparameter tuning and sample-inflation curves.

Risk tables are computed once per (instance, algorithm) over every sample
size and hyperparameter of interest:

* one-hot instances use the exact oracles (no noise, ``stderr = 0``);
* Gaussian instances use Monte Carlo with common random numbers. Replication
  ``r`` draws one stream, smaller sample sizes use a prefix of it, and every
  grid point sees the same data. SGD evaluates all stepsizes and all tail
  lengths in a single pass; ridge evaluates all ``lambda`` from one SVD.

Tuning picks the smallest hyperparameter whose mean risk is within one
standard error of the minimum.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .estimators import (
    RiskEstimate,
    _decode,
    _dense,
    _row_width,
    _sgd_tail_risks,
    chunk_reps,
    excess_risk,
    map_chunks,
    rep_rng,
    ridge_path,
    summarize,
)
from .instances import ProblemInstance
from .oracles import onehot_ridge_risk_grid, onehot_sgd_risk_exact

CURVE_HEADER = (
    "n_ridge", "lambda_best", "ridge_risk", "ridge_stderr",
    "n_sgd", "gamma_best", "sgd_risk", "sgd_stderr",
)
DEFAULT_SLACK = 0.05


class Algo(str, enum.Enum):
    SGD = "sgd"
    RIDGE = "ridge"


def default_lambda_grid(p: ProblemInstance, steps: int = 25) -> np.ndarray:
    tr = p.spectrum.trace
    return np.concatenate([[0.0], np.geomspace(1e-4 * tr, 1e4 * tr, steps)])


def default_gamma_grid(p: ProblemInstance, steps: int = 15) -> np.ndarray:
    tr = p.spectrum.trace
    return np.geomspace(1e-3 / tr, 1.0 / tr, steps)


def even_grid(lo: int, hi: int, steps: int, include: Sequence[int] = ()) -> list[int]:
    """Sorted even integers, roughly log-spaced over ``[lo, hi]``, plus ``include`` rounded up to even."""
    vals = {2 * max(1, math.ceil(v / 2)) for v in np.geomspace(max(lo, 2), hi, steps)}
    vals |= {2 * max(1, math.ceil(v / 2)) for v in include}
    return sorted(vals)


# --- risk tables -------------------------------------------------------------


@dataclass(frozen=True)
class _SgdChunk:
    p: ProblemInstance
    n_values: tuple
    gammas: np.ndarray
    seed: int

    def __call__(self, reps: range) -> np.ndarray:
        streams = [rep_rng(self.seed, r) for r in reps]
        return _sgd_tail_risks(self.p, streams, self.n_values, self.gammas)


@dataclass(frozen=True)
class _RidgeChunk:
    p: ProblemInstance
    n_values: tuple
    lams: np.ndarray
    seed: int

    def __call__(self, reps: range) -> np.ndarray:
        out = np.empty((len(reps), len(self.n_values), self.lams.size))
        width = _row_width(self.p)
        for j, r in enumerate(reps):
            z = rep_rng(self.seed, r).standard_normal((max(self.n_values), width))
            feats, y = _decode(self.p, z)
            X = _dense(self.p, feats)
            for k, n in enumerate(self.n_values):
                out[j, k] = excess_risk(ridge_path(X[:n], y[:n], self.lams), self.p)
        return out


def _estimates(table: np.ndarray, seed: int) -> list[list[RiskEstimate]]:
    """``table[rep, n, param]`` -> ``[n][param]`` estimates."""
    return [
        [summarize(table[:, k, j], seed) for j in range(table.shape[2])]
        for k in range(table.shape[1])
    ]


def sgd_risk_table(
    p: ProblemInstance, n_values: Sequence[int], gammas: Sequence[float],
    reps: int, seed: int, workers: int = 1,
) -> list[list[RiskEstimate]]:
    """Tail-averaged SGD risk for every (N, gamma); indexed ``[n][gamma]``."""
    n_values = tuple(int(n) for n in n_values)
    gammas = np.asarray(gammas, dtype=float)
    if p.is_onehot:
        return [[RiskEstimate.exact(onehot_sgd_risk_exact(p, n, g)) for g in gammas] for n in n_values]
    if reps < 2:
        raise ValueError(f"reps must be >= 2, got {reps}")
    chunks = chunk_reps(reps, gammas.size * p.d * 24)
    table = np.concatenate(map_chunks(_SgdChunk(p, n_values, gammas, seed), chunks, workers))
    # table is (rep, gamma, n)
    return _estimates(np.swapaxes(table, 1, 2), seed)


def ridge_risk_table(
    p: ProblemInstance, n_values: Sequence[int], lams: Sequence[float],
    reps: int, seed: int, workers: int = 1,
) -> list[list[RiskEstimate]]:
    """Ridge risk for every (N, lambda); indexed ``[n][lambda]``."""
    n_values = tuple(int(n) for n in n_values)
    lams = np.asarray(lams, dtype=float)
    if p.is_onehot:
        out = []
        for n in n_values:
            bias, var = onehot_ridge_risk_grid(p, n, lams)
            out.append([RiskEstimate.exact(v) for v in bias + var])
        return out
    if reps < 2:
        raise ValueError(f"reps must be >= 2, got {reps}")
    chunks = chunk_reps(reps, 1)
    table = np.concatenate(map_chunks(_RidgeChunk(p, n_values, lams, seed), chunks, workers))
    return _estimates(table, seed)


# --- tuning --------------------------------------------------------------------


@dataclass(frozen=True)
class TuneResult:
    best_param: float
    risk: RiskEstimate
    grid: tuple
    per_point: tuple


def pick(grid: Sequence[float], per_point: Sequence[RiskEstimate]) -> TuneResult:
    """Smallest parameter whose mean is within one stderr of the minimum mean."""
    if len(grid) == 0:
        raise ValueError("tuning grid is empty")
    means = np.array([e.mean for e in per_point])
    best = int(np.argmin(means))
    cutoff = means[best] + per_point[best].stderr
    order = np.argsort(np.asarray(grid, dtype=float), kind="stable")
    chosen = next(int(i) for i in order if means[i] <= cutoff)
    return TuneResult(float(grid[chosen]), per_point[chosen], tuple(float(g) for g in grid), tuple(per_point))


def _warn_large_steps(p: ProblemInstance, grid: Sequence[float], margin: float = 1.0) -> None:
    limit = margin / p.spectrum.trace
    if max(grid) > limit:
        warnings.warn(
            f"stepsize grid reaches {max(grid)!r} > {limit!r}; SGD may diverge there",
            RuntimeWarning,
            stacklevel=3,
        )


def tune(
    p: ProblemInstance, algo: Algo | str, n: int, grid: Sequence[float],
    reps: int, seed: int, workers: int = 1,
) -> TuneResult:
    """Tune the stepsize (SGD) or the regularization (ridge) at sample size ``n``."""
    grid = list(grid)
    if not grid:
        raise ValueError("tuning grid is empty")
    if Algo(algo) is Algo.SGD:
        _warn_large_steps(p, grid)
        table = sgd_risk_table(p, [n], grid, reps, seed, workers)
    else:
        table = ridge_risk_table(p, [n], grid, reps, seed, workers)
    return pick(grid, table[0])


# --- sample-inflation curves ----------------------------------------------------


@dataclass(frozen=True)
class CurveRow:
    n_ridge: int
    lambda_best: float
    ridge_risk: float
    ridge_stderr: float
    n_sgd: Optional[int] = None
    gamma_best: Optional[float] = None
    sgd_risk: Optional[float] = None
    sgd_stderr: Optional[float] = None


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


@dataclass(frozen=True)
class ComparisonCurve:
    rows: tuple
    label: str = ""
    reps: int = 0
    seed: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for r in self.rows:
            w.writerow([_fmt(getattr(r, k)) for k in CURVE_HEADER])
        return buf.getvalue()


def first_qualifying(
    n_sgd_grid: Sequence[int], tuned: Sequence[TuneResult], target: float
) -> Optional[int]:
    """Index of the smallest ``n_sgd`` whose tuned risk is at most ``target``."""
    for i in np.argsort(n_sgd_grid, kind="stable"):
        if tuned[i].risk.mean <= target:
            return int(i)
    return None


def sample_inflation_curve(
    p: ProblemInstance,
    n_ridge_grid: Sequence[int],
    n_sgd_grid: Sequence[int],
    lam_grid: Sequence[float],
    gamma_grid: Sequence[float],
    reps: int,
    slack: float = DEFAULT_SLACK,
    seed: int = 0,
    workers: int = 1,
) -> ComparisonCurve:
    """For each ``n_ridge`` the smallest ``n_sgd`` whose tuned SGD matches tuned ridge.

    Replication ``r`` of both algorithms reads the same data stream, so the
    comparison is made on common random numbers. A row whose target is not
    met anywhere on ``n_sgd_grid`` keeps the SGD fields empty.
    """
    if slack < 0:
        raise ValueError(f"slack must be >= 0, got {slack}")
    n_ridge_grid = [int(n) for n in n_ridge_grid]
    n_sgd_grid = [int(n) for n in n_sgd_grid]
    for name, g in (("n_ridge", n_ridge_grid), ("n_sgd", n_sgd_grid)):
        if not g or g != sorted(g):
            raise ValueError(f"{name} grid must be nonempty and sorted ascending")
    if any(n % 2 for n in n_sgd_grid):
        raise ValueError("n_sgd grid must contain even sample sizes only")
    if not p.is_onehot:
        _warn_large_steps(p, gamma_grid)

    # both algorithms see the same data streams (common random numbers)
    ridge_tab = ridge_risk_table(p, n_ridge_grid, lam_grid, reps, seed, workers)
    sgd_tab = sgd_risk_table(p, n_sgd_grid, gamma_grid, reps, seed, workers)
    sgd_tuned = [pick(list(gamma_grid), row) for row in sgd_tab]

    rows = []
    for n, row in zip(n_ridge_grid, ridge_tab):
        rt = pick(list(lam_grid), row)
        i = first_qualifying(n_sgd_grid, sgd_tuned, rt.risk.mean * (1.0 + slack))
        base = dict(n_ridge=n, lambda_best=rt.best_param, ridge_risk=rt.risk.mean, ridge_stderr=rt.risk.stderr)
        if i is None:
            rows.append(CurveRow(**base))
        else:
            st = sgd_tuned[i]
            rows.append(CurveRow(**base, n_sgd=n_sgd_grid[i], gamma_best=st.best_param,
                                 sgd_risk=st.risk.mean, sgd_stderr=st.risk.stderr))
    return ComparisonCurve(tuple(rows), p.label, 0 if p.is_onehot else reps, seed)


def read_curve_csv(text: str) -> ComparisonCurve:
    rd = csv.DictReader(io.StringIO(text))
    if tuple(rd.fieldnames or ()) != CURVE_HEADER:
        raise ValueError(f"not a curve CSV: header {rd.fieldnames}")
    rows = []
    for rec in rd:
        vals = {}
        for k in CURVE_HEADER:
            s = rec[k]
            vals[k] = None if s == "" else (int(s) if k in ("n_ridge", "n_sgd") else float(s))
        rows.append(CurveRow(**vals))
    return ComparisonCurve(tuple(rows))
