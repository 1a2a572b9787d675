"""Eigenvalue spectra of the population covariance and the indices derived from them.

All logarithms are natural. Indices follow the 1-based convention used for
eigenvalues: ``lambda_1`` is ``eigenvalues[0]``. The ``k_star_*`` helpers
return ``d + 1`` when no index satisfies the defining inequality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def _tail_sums(lam: np.ndarray) -> np.ndarray:
    """``out[k] = sum_{i > k} lambda_i``, compensated summation from the small end."""
    out = np.zeros(lam.size + 1)
    total = comp = 0.0
    for k in range(lam.size - 1, -1, -1):
        v = float(lam[k])
        t = total + v
        comp += (total - t) + v if abs(total) >= abs(v) else (v - t) + total
        total = t
        out[k] = total + comp
    return out


@dataclass(frozen=True)
class Spectrum:
    """Sorted, strictly positive eigenvalues of a diagonal covariance ``H``."""

    eigenvalues: np.ndarray
    _tails: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        lam = np.array(self.eigenvalues, dtype=float).reshape(-1)
        if lam.size == 0:
            raise ValueError("spectrum must have dimension d >= 1")
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
            raise ValueError("eigenvalues must be finite and strictly positive")
        if np.any(np.diff(lam) > 0):
            raise ValueError("eigenvalues must be sorted non-increasing")
        lam.setflags(write=False)
        tails = _tail_sums(lam)
        tails.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "_tails", tails)

    @property
    def d(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def trace(self) -> float:
        return float(self._tails[0])

    @property
    def tail_sums(self) -> np.ndarray:
        """``tail_sums[k] = sum_{i>k} lambda_i`` for ``k = 0..d``."""
        return self._tails

    def __len__(self) -> int:
        return self.d

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Spectrum):
            return NotImplemented
        return np.array_equal(self.eigenvalues, other.eigenvalues)

    def __hash__(self) -> int:
        return hash(self.eigenvalues.tobytes())


def power_law_spectrum(d: int, alpha: float, normalize: bool = False) -> Spectrum:
    """``lambda_i = i^-alpha``; optionally rescaled to unit trace."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    lam = np.arange(1, d + 1, dtype=float) ** (-float(alpha))
    if normalize:
        lam = lam / math.fsum(lam)
    return Spectrum(lam)


def theorem2_spectrum(n: int) -> Spectrum:
    """One-hot best-case spectrum: a heavy head coordinate and a flat tail.

    ``lambda_1 = log(n)/sqrt(n)`` and the remaining ``n - 1`` coordinates share
    the leftover mass ``1 - lambda_1`` equally, so the trace is one and the
    output is a valid one-hot law of dimension ``n``.
    """
    if n < 3:
        # n = 2 puts more mass on the tail coordinate than on the head
        raise ValueError(f"n must be >= 3, got {n}")
    head = math.log(n) / math.sqrt(n)
    if head >= 1:
        raise ValueError(f"log(n)/sqrt(n) = {head:.6g} >= 1 for n = {n}")
    lam = np.full(n, (1.0 - head) / (n - 1))
    lam[0] = head
    return Spectrum(lam)


def theorem4_spectrum(n: int, d: int) -> Spectrum:
    """Gaussian best-case spectrum: ``lambda_1 = 1`` and ``n^2 - 1`` copies of ``1/(n log n)``."""
    if n < 3:
        raise ValueError(f"n must be >= 3, got {n}")
    if d < n * n:
        raise ValueError(f"d = {d} must be at least n^2 = {n * n}")
    lam = np.full(n * n, 1.0 / (n * math.log(n)))
    lam[0] = 1.0
    return Spectrum(lam)


def tail_sum(s: Spectrum, k: int) -> float:
    """``sum_{i>k} lambda_i``; ``tail_sum(s, 0)`` is the trace."""
    if k < 0 or k > s.d:
        raise ValueError(f"k must lie in [0, {s.d}], got {k}")
    return float(s.tail_sums[k])


def tail_sum_squares(s: Spectrum, k: int) -> float:
    if k < 0 or k > s.d:
        raise ValueError(f"k must lie in [0, {s.d}], got {k}")
    return float(np.sum(s.eigenvalues[k:][::-1] ** 2))


def kappa(s: Spectrum, n: int) -> float:
    """Flatness of the top-``n`` spectrum: ``tr(H) / (n * lambda_{min(n, d)})``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return s.trace / (n * float(s.eigenvalues[min(n, s.d) - 1]))


def _first_true(mask: np.ndarray, offset: int, sentinel: int) -> int:
    hits = np.flatnonzero(mask)
    return int(hits[0]) + offset if hits.size else sentinel


def k_star_ridge(s: Spectrum, lam: float, n: int, b: float = 1.0) -> int:
    """``min{k >= 0 : b * lambda_{k+1} <= (lam + sum_{i>k} lambda_i) / n}`` with ``lambda_{d+1} = 0``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    nxt = np.append(s.eigenvalues, 0.0)
    mask = b * nxt <= (lam + s.tail_sums) / n
    return _first_true(mask, 0, s.d)


def k_star_onehot(s: Spectrum, n: int) -> int:
    """``min{k >= 1 : n * lambda_k <= 1}``, or ``d + 1`` if none."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return _first_true(n * s.eigenvalues <= 1.0, 1, s.d + 1)


def k_star_thm5(s: Spectrum, n_ridge: int) -> int:
    """``min{k >= 1 : lambda_k <= tr(H) / (n log n)}``, or ``d + 1`` if none."""
    if n_ridge < 3:
        raise ValueError(f"n_ridge must be >= 3 so that log(n) > 1, got {n_ridge}")
    threshold = s.trace / (n_ridge * math.log(n_ridge))
    return _first_true(s.eigenvalues <= threshold, 1, s.d + 1)


def to_record(s: Spectrum) -> dict:
    return {"eigenvalues": [float(v) for v in s.eigenvalues]}
