"""Exact expected excess risks, used as ground truth for the simulator and the bounds.

With one-hot data every second-moment recursion is diagonal, so the risk of
tail-averaged SGD and of ridge regression can be written down coordinate by
coordinate. For SGD with error ``beta_t = w_t - w*``:

* ``m_t = E[beta_t[i]^2]`` obeys ``m_t = rho * m_{t-1} + gamma^2 sigma^2 lambda``
  with ``rho = 1 - 2 gamma lambda + gamma^2 lambda``,
* for ``t > s``, ``E[beta_t | beta_s] = (1 - gamma lambda)^(t-s) beta_s``, so the
  cross moments of the tail average are geometric in ``r = 1 - gamma lambda``.

The noise cross terms vanish because the noise has mean zero and is independent
of the features. Gaussian data keeps the second moment diagonal as well, but
couples the coordinates through ``tr(H B)``; :func:`gaussian_sgd_risk_exact`
iterates that recursion.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

from .instances import ProblemInstance


def _geom_tail(r: np.ndarray, one_minus_r: np.ndarray, k: np.ndarray) -> np.ndarray:
    """``sum_{j=1}^{k} r^j`` for ``0 <= r <= 1``, accurate when ``r`` is close to 1."""
    with np.errstate(divide="ignore", invalid="ignore"):
        log_r = np.log(r)
        out = r * -np.expm1(k * log_r) / one_minus_r
    return np.where(one_minus_r == 0, k.astype(float), np.where(r == 0, 0.0, out))


def _tail_average_second_moment(m: np.ndarray, gl: np.ndarray, n: int) -> np.ndarray:
    """``E[bar beta[i]^2]`` from ``m[s - n/2, i] = E[beta_s[i]^2]``, ``s = n/2 .. n-1``."""
    s = np.arange(n // 2, n)
    r = 1.0 - gl
    weights = 1.0 + 2.0 * _geom_tail(r[None, :], gl[None, :], (n - 1 - s)[:, None])
    return (4.0 / n**2) * np.sum(m * weights, axis=0)


def _check_sgd_args(n: int, gamma: float) -> None:
    if n < 2 or n % 2:
        raise ValueError(f"N must be even and >= 2, got {n}")
    if not 0 <= gamma <= 1:
        raise ValueError(f"one-hot SGD needs 0 <= gamma <= 1, got {gamma}")


def onehot_sgd_risk_exact(p: ProblemInstance, n: int, gamma: float) -> float:
    """Expected excess risk of tail-averaged SGD on a one-hot instance."""
    if not p.is_onehot:
        raise ValueError("onehot_sgd_risk_exact needs a one-hot instance")
    _check_sgd_args(n, gamma)
    lam = p.eigenvalues
    gl = gamma * lam
    rho = 1.0 - 2.0 * gl + gamma * gl
    one_minus_rho = gl * (2.0 - gamma)
    s = np.arange(n // 2, n)[:, None]
    with np.errstate(divide="ignore"):
        rho_s = np.where(rho[None, :] == 0, (s == 0).astype(float), np.exp(s * np.log(rho)))
        grow = np.where(
            one_minus_rho == 0,
            s.astype(float),
            -np.expm1(s * np.log(rho)) / np.where(one_minus_rho == 0, 1.0, one_minus_rho),
        )
    grow = np.where(rho[None, :] == 0, (s > 0).astype(float), grow)
    m = rho_s * p.w_star**2 + gamma * gl * p.sigma2 * grow
    return float(np.dot(lam, _tail_average_second_moment(m, gl, n)))


def gaussian_sgd_risk_exact(p: ProblemInstance, n: int, gamma: float) -> float:
    """Expected excess risk of tail-averaged SGD on a Gaussian instance.

    Uses ``E[x x^T B x x^T] = 2 H B H + tr(H B) H`` for Gaussian ``x``; costs
    ``O(N d)``.
    """
    if p.is_onehot:
        raise ValueError("gaussian_sgd_risk_exact needs a Gaussian instance")
    if n < 2 or n % 2:
        raise ValueError(f"N must be even and >= 2, got {n}")
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    lam = p.eigenvalues
    gl = gamma * lam
    keep = 1.0 - 2.0 * gl + 2.0 * gl * gl
    m = p.w_star**2
    tail = np.empty((n // 2, p.d))
    for t in range(n):
        if t >= n // 2:
            tail[t - n // 2] = m
        m = keep * m + gamma * gl * (np.dot(lam, m) + p.sigma2)
    return float(np.dot(lam, _tail_average_second_moment(tail, gl, n)))


# --- ridge -----------------------------------------------------------------


def binomial_pmf(n: int, q: float) -> np.ndarray:
    """``P(Binom(n, q) = k)`` for ``k = 0..n``.

    Ratios ``P(k+1)/P(k) = (n-k)/(k+1) * q/(1-q)`` are multiplied outward from
    the mode, so no term underflows before it is negligible; the anchor is
    fixed by normalization.
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if not 0 <= q <= 1:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    pmf = np.zeros(n + 1)
    if q == 0 or q == 1:
        pmf[n if q == 1 else 0] = 1.0
        return pmf
    mode = min(n, int(math.floor((n + 1) * q)))
    odds = q / (1.0 - q)
    k_up = np.arange(mode, n)
    pmf[mode] = 1.0
    pmf[mode + 1 :] = np.cumprod((n - k_up) / (k_up + 1.0) * odds)
    k_down = np.arange(mode, 0, -1)
    pmf[:mode] = np.cumprod(k_down / (n - k_down + 1.0) / odds)[::-1]
    return pmf / math.fsum(pmf)


class RidgeRisk(NamedTuple):
    bias: float
    variance: float

    @property
    def total(self) -> float:
        return self.bias + self.variance


def onehot_ridge_risk_grid(
    p: ProblemInstance, n: int, lams: Sequence[float]
) -> tuple[np.ndarray, np.ndarray]:
    """Exact (bias, variance) of ridge for every ``lam`` in ``lams``.

    The count ``mu_i`` of coordinate ``i`` in ``n`` samples is ``Binom(n, lambda_i)``
    and the empirical Gram matrix is ``diag(mu)``.
    """
    if not p.is_onehot:
        raise ValueError("onehot ridge oracle needs a one-hot instance")
    if n < 1:
        raise ValueError(f"N must be >= 1, got {n}")
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    if np.any(lams < 0) or not np.all(np.isfinite(lams)):
        raise ValueError("lambda must be finite and >= 0 for the one-hot ridge oracle")
    mu = np.arange(n + 1, dtype=float)[:, None]
    den = mu + lams[None, :]
    pos = den > 0
    safe = np.where(pos, den, 1.0)
    # at mu = lam = 0 the min-norm solution leaves the coordinate at 0 (full bias, no variance)
    f_bias = np.where(pos, (lams[None, :] / safe) ** 2, 1.0)
    f_var = np.where(pos, mu / safe**2, 0.0)

    uniq, inverse = np.unique(p.eigenvalues, return_inverse=True)
    signal = np.bincount(inverse, weights=p.eigenvalues * p.w_star**2, minlength=uniq.size)
    mass = np.bincount(inverse, weights=p.eigenvalues, minlength=uniq.size)
    bias = np.zeros(lams.size)
    var = np.zeros(lams.size)
    for q, sig, ms in zip(uniq, signal, mass):
        pmf = binomial_pmf(n, float(q))
        bias += sig * (pmf @ f_bias)
        var += ms * (pmf @ f_var)
    return bias, p.sigma2 * var


def onehot_ridge_risk_exact(p: ProblemInstance, n: int, lam: float) -> RidgeRisk:
    bias, var = onehot_ridge_risk_grid(p, n, [lam])
    return RidgeRisk(float(bias[0]), float(var[0]))


def ols_reference_risk(d: int, n: int, sigma2: float) -> float:
    """``sigma^2 d / (N - d - 1)``, the expected excess risk of OLS under Gaussian design."""
    if n <= d + 1:
        raise ValueError(f"need N > d + 1, got N = {n}, d = {d}")
    return sigma2 * d / (n - d - 1)
