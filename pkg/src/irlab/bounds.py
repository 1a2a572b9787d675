"""Instance-dependent risk bounds and stepsize / sample-size rules.

Every hidden absolute constant is set to 1 by default and exposed as a keyword
(``c`` multiplies a bound, ``b`` enters the ridge effective dimension).

The SGD upper bounds contract ``w*`` by ``(1 - gamma lambda_i)^N`` coordinate
wise, evaluated in log space. ``contraction="exp"`` swaps in ``exp(-N gamma
lambda_i)``, the form under which the (N, gamma) -> (alpha N, gamma / alpha)
rescaling leaves the bias bound exactly unchanged.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass
from typing import NamedTuple, Optional

import numpy as np

from .instances import ProblemInstance, r_squared
from .spectra import k_star_onehot, k_star_ridge, k_star_thm5, kappa


@dataclass(frozen=True)
class BoundReport:
    bound: str
    bias_bound: float
    variance_bound: float
    total: float
    k1: Optional[int] = None
    k2: Optional[int] = None
    k_star: Optional[int] = None
    lambda_tilde: Optional[float] = None
    kappa: Optional[float] = None
    r_squared: Optional[float] = None
    b: float = 1.0
    c: float = 1.0
    in_regime: bool = True

    def to_record(self) -> dict:
        """Flat record; infinities become the string ``"inf"``."""

        def enc(v):
            if isinstance(v, float) and math.isinf(v):
                return "inf" if v > 0 else "-inf"
            return v

        return {k: enc(v) for k, v in asdict(self).items()}

    def to_json(self) -> str:
        return json.dumps(self.to_record(), indent=2, sort_keys=True) + "\n"


def _report(name, bias, var, c, **kw) -> BoundReport:
    bias, var = c * float(bias), c * float(var)
    return BoundReport(name, bias, var, bias + var, c=c, **kw)


def _contraction(gl: np.ndarray, power: float, form: str) -> np.ndarray:
    """``(1 - gl)^power`` (``form="power"``) or ``exp(-gl * power)`` (``form="exp"``)."""
    if form == "exp":
        return np.exp(-gl * power)
    if form != "power":
        raise ValueError(f"contraction must be 'power' or 'exp', got {form!r}")
    base = np.abs(1.0 - gl)
    with np.errstate(divide="ignore"):
        return np.where(base == 0, 0.0, np.exp(power * np.log(base)))


def _scan_bias(lam, w2, f, gn) -> tuple[float, int]:
    """min over k of ``sum_{i<=k} f w^2 / lambda / gn^2 + sum_{i>k} f lambda w^2``."""
    head = np.concatenate([[0.0], np.cumsum(f * w2 / lam)])
    tail = np.concatenate([np.cumsum((f * lam * w2)[::-1])[::-1], [0.0]])
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(head == 0, 0.0, head / (gn * gn))
    vals = scaled + tail
    k = int(np.argmin(vals))
    return float(vals[k]), k


def _tail_squares(lam: np.ndarray) -> np.ndarray:
    """``out[k] = sum_{i>k} lambda_i^2`` for ``k = 0..d``."""
    return np.concatenate([np.cumsum((lam * lam)[::-1])[::-1], [0.0]])


def _check_stepsize(p: ProblemInstance, gamma: float) -> bool:
    ok = gamma <= 1.0 / p.spectrum.trace
    if not ok:
        warnings.warn(
            f"stepsize {gamma!r} exceeds 1/tr(H) = {1.0 / p.spectrum.trace!r}; "
            "the bound is outside its validity range",
            RuntimeWarning,
            stacklevel=3,
        )
    return ok


def _check_even(n: int) -> None:
    if n < 2 or n % 2:
        raise ValueError(f"N must be even and >= 2, got {n}")


def sgd_risk_bound_gaussian(
    p: ProblemInstance, n: int, gamma: float, c: float = 1.0, contraction: str = "power"
) -> BoundReport:
    """Tail-averaged SGD upper bound, minimized over the head/tail cuts ``k1``, ``k2``."""
    _check_even(n)
    ok = _check_stepsize(p, gamma)
    lam = p.eigenvalues
    gn = gamma * n
    f = _contraction(gamma * lam, 2.0 * n, contraction)
    bias, k1 = _scan_bias(lam, p.w_star**2, f, gn)
    ks = np.arange(p.d + 1)
    var_all = ((p.sigma2 + p.signal) / n) * (ks + gn * gn * _tail_squares(lam))
    k2 = int(np.argmin(var_all))
    return _report(
        "sgd_gaussian", bias, var_all[k2], c, k1=k1, k2=k2,
        r_squared=r_squared(p), in_regime=ok,
    )


def sgd_risk_bound_onehot(
    p: ProblemInstance, n: int, gamma: float, c: float = 1.0, contraction: str = "power"
) -> BoundReport:
    """One-hot SGD upper bound; the contraction runs for ``N/2`` steps."""
    if not p.is_onehot:
        raise ValueError("sgd_risk_bound_onehot needs a one-hot instance")
    _check_even(n)
    if gamma > 1:
        raise ValueError(f"one-hot SGD needs gamma <= 1, got {gamma}")
    lam = p.eigenvalues
    gn = gamma * n
    # squared norm of (I - gamma H)^(N/2) w*
    f = _contraction(gamma * lam, float(n), contraction)
    bias, k1 = _scan_bias(lam, p.w_star**2, f, gn)
    ks = np.arange(p.d + 1)
    var_all = p.sigma2 * (ks / n + gn * gamma * _tail_squares(lam))
    k2 = int(np.argmin(var_all))
    return _report(
        "sgd_onehot", bias, var_all[k2], c, k1=k1, k2=k2, r_squared=r_squared(p)
    )


def ridge_risk_lower_gaussian(
    p: ProblemInstance, n: int, lam: float, b: float = 1.0, c: float = 1.0
) -> BoundReport:
    """Ridge lower bound with effective dimension ``k* = k_star_ridge`` and ``lambda_tilde``."""
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    s = p.spectrum
    ev = p.eigenvalues
    k = k_star_ridge(s, lam, n, b)
    lt = lam + float(s.tail_sums[k])
    w2 = p.w_star**2
    bias = (lt / n) ** 2 * float(np.sum(w2[:k] / ev[:k])) + float(np.dot(ev[k:], w2[k:]))
    tail_sq = float(_tail_squares(ev)[k])
    var = p.sigma2 * (k / n + (n * tail_sq / lt**2 if tail_sq > 0 else 0.0))
    return _report(
        "ridge_gaussian_lower", bias, var, c, k_star=k, lambda_tilde=lt,
        kappa=kappa(s, n), r_squared=r_squared(p), b=b,
    )


def ridge_risk_lower_onehot(
    p: ProblemInstance, n: int, lam: float, c: float = 1.0
) -> BoundReport:
    """One-hot ridge lower bound with ``k* = k_star_onehot``; the head includes index ``k*``."""
    if not p.is_onehot:
        raise ValueError("ridge_risk_lower_onehot needs a one-hot instance")
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    ev = p.eigenvalues
    w2 = p.w_star**2
    k = k_star_onehot(p.spectrum, n)
    h = min(k, p.d)
    with np.errstate(divide="ignore"):
        never_seen = np.exp(n * np.log1p(-np.minimum(ev, 1.0)))
    unseen = float(np.dot(never_seen, ev * w2))
    head_den = (n * ev[:h] + lam) ** 2
    shrink = float(np.sum(lam**2 * ev[:h] * w2[:h] / head_den)) if lam > 0 else 0.0
    bias = max(unseen, shrink + float(np.dot(ev[h:], w2[h:])))
    var = p.sigma2 * (
        float(np.sum(n * ev[:h] ** 2 / head_den)) + float(np.sum(n * ev[h:] ** 2)) / (1.0 + lam) ** 2
    )
    return _report(
        "ridge_onehot_lower", bias, var, c, k_star=k, r_squared=r_squared(p)
    )


class Thm3Rule(NamedTuple):
    gamma: float
    n_sgd: int
    case: str
    kappa: float
    log_a: float
    lambda_tilde: float
    k_star: int


def thm3_rule(p: ProblemInstance, lam: float, n_ridge: int) -> Thm3Rule:
    """Stepsize and SGD sample size that match ridge with ``(lam, n_ridge)``.

    ``n_sgd = ceil((1 + R^2) kappa L n_ridge)`` with ``L = max(log a, 1)`` and
    ``a = kappa R sqrt(n_ridge)``.
    """
    if n_ridge < 1:
        raise ValueError(f"n_ridge must be >= 1, got {n_ridge}")
    r2 = r_squared(p)
    if math.isinf(r2):
        raise ValueError(
            "the rule needs sigma^2 > 0: with noiseless data R^2 is infinite and "
            "the SGD sample-size multiplier is unbounded"
        )
    s = p.spectrum
    kap = kappa(s, n_ridge)
    a = kap * math.sqrt(r2) * math.sqrt(n_ridge)
    log_a = max(math.log(a), 1.0) if a > 0 else 1.0
    k = k_star_ridge(s, lam, n_ridge)
    lt = lam + float(s.tail_sums[k])
    n_sgd = math.ceil((1.0 + r2) * kap * log_a * n_ridge)
    scale = max(1.0, kap * log_a)
    if lt * scale >= s.trace:
        gamma, case = 1.0 / ((1.0 + r2) * lt * scale), "I"
    else:
        gamma, case = 1.0 / ((1.0 + r2) * s.trace), "II"
    assert gamma <= 1.0 / s.trace
    return Thm3Rule(gamma, n_sgd, case, kap, log_a, lt, k)


class Thm5Check(NamedTuple):
    holds: bool
    lhs: float
    rhs: float
    k_star: int
    r_squared: float
    r_squared_moderate: bool
    note: str = ""


def thm5_condition(p: ProblemInstance, n_ridge: int, c: float = 1.0) -> Thm5Check:
    """``sum_{i=k*+1}^{min(n, d)} lambda_i w*_i^2 <= c k* ||w*||_H^2 / n`` with ``k* = k_star_thm5``."""
    k = k_star_thm5(p.spectrum, n_ridge)
    r2 = r_squared(p)
    moderate = 0.1 <= r2 <= 10.0
    if k > p.d:
        return Thm5Check(False, math.nan, math.nan, k, r2, moderate, "no index qualifies for k*")
    stop = min(n_ridge, p.d)
    ev, w = p.eigenvalues, p.w_star
    lhs = float(np.dot(ev[k:stop], w[k:stop] ** 2))
    rhs = c * k * p.signal / n_ridge
    return Thm5Check(lhs <= rhs, lhs, rhs, k, r2, moderate)
