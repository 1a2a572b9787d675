"""Sampling, tail-averaged SGD, ridge regression and Monte-Carlo excess risk.

Excess risk is reported as ``||w - w*||_H^2``, i.e. *without* the factor 1/2
of the population loss. The factor cancels in every comparison made here.

Random streams
--------------
Every sample consumes one row of standard normals from the generator:

* Gaussian kind: a row of ``d + 1`` normals ``z``; ``x[i] = sqrt(lambda_i) z[i]``
  and the noise is ``sigma * z[d]``.
* One-hot kind: a row of 2 normals; the coordinate is drawn by pushing
  ``z[0]`` through the standard normal CDF and inverting the categorical CDF
  of the eigenvalues, the noise is ``sigma * z[1]``.

Because rows are consumed in order, the first ``n`` samples of a longer draw
equal an ``n``-sample draw from the same generator. Replication ``r`` of a
Monte-Carlo run with seed ``s`` uses ``np.random.default_rng([s, r])``.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
from scipy.special import ndtr

from .instances import ProblemInstance

SEED_MASK = (1 << 64) - 1
# upper bound on floats held by one chunk of replications
_CHUNK_FLOATS = 1 << 22
_MAX_CHUNK_REPS = 512
_STEP_BLOCK = 256


class SingularMatrixError(np.linalg.LinAlgError):
    """Regularized Gram matrix is not positive definite."""

    def __init__(self, message: str, eigenvalue: float):
        super().__init__(message)
        self.eigenvalue = eigenvalue


@dataclass(frozen=True)
class SgdConfig:
    n: int
    gamma: float

    def __post_init__(self) -> None:
        if self.n < 2 or self.n % 2:
            raise ValueError(f"SGD sample size must be even and >= 2, got {self.n}")
        if not self.gamma >= 0 or not math.isfinite(self.gamma):
            raise ValueError(f"stepsize must be finite and >= 0, got {self.gamma}")


@dataclass(frozen=True)
class RidgeConfig:
    n: int
    lam: float

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"ridge sample size must be >= 1, got {self.n}")
        if not math.isfinite(self.lam):
            raise ValueError(f"lambda must be finite, got {self.lam}")


EstimatorConfig = Union[SgdConfig, RidgeConfig]


@dataclass(frozen=True)
class RiskEstimate:
    mean: float
    stderr: float
    reps: int
    seed: int

    @classmethod
    def exact(cls, value: float) -> "RiskEstimate":
        return cls(float(value), 0.0, 0, 0)


class RidgeMode(str, enum.Enum):
    PRIMAL = "primal"
    DUAL = "dual"
    AUTO = "auto"


# --- seeds -----------------------------------------------------------------


def rep_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & SEED_MASK, int(rep)])


def derive_seed(seed: int, *keys: int) -> int:
    """A 64-bit child seed of ``seed`` keyed by ``keys``."""
    ss = np.random.SeedSequence([int(seed) & SEED_MASK, *map(int, keys)])
    return int(ss.generate_state(1, np.uint64)[0])


# --- sampling --------------------------------------------------------------


def _row_width(p: ProblemInstance) -> int:
    return 2 if p.is_onehot else p.d + 1


def _decode(p: ProblemInstance, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map normal rows ``z[..., width]`` to (features, responses).

    One-hot features are integer coordinates, Gaussian features dense vectors.
    """
    sigma = math.sqrt(p.sigma2)
    if p.is_onehot:
        cdf = np.cumsum(p.eigenvalues)
        idx = np.searchsorted(cdf, ndtr(z[..., 0]), side="right")
        idx = np.minimum(idx, p.d - 1)
        return idx, p.w_star[idx] + sigma * z[..., 1]
    x = z[..., : p.d] * np.sqrt(p.eigenvalues)
    return x, x @ p.w_star + sigma * z[..., p.d]


def _dense(p: ProblemInstance, feats: np.ndarray) -> np.ndarray:
    if not p.is_onehot:
        return feats
    out = np.zeros(feats.shape + (p.d,))
    np.put_along_axis(out, feats[..., None], 1.0, axis=-1)
    return out


def draw_samples(
    p: ProblemInstance, n: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """``n`` i.i.d. samples as a dense ``(n, d)`` design and responses."""
    feats, y = _decode(p, rng.standard_normal((n, _row_width(p))))
    return _dense(p, feats), y


def draw_sample(p: ProblemInstance, rng: np.random.Generator) -> tuple[np.ndarray, float]:
    X, y = draw_samples(p, 1, rng)
    return X[0], float(y[0])


# --- SGD -------------------------------------------------------------------


class _SgdPaths:
    """Constant-stepsize SGD run for a batch of replications and stepsizes at once.

    Keeps prefix sums of the iterates so that the tail average for any even
    ``N`` up to the horizon can be read off a single pass.
    """

    def __init__(self, p: ProblemInstance, reps: int, gammas: np.ndarray):
        self.p = p
        self.gammas = np.asarray(gammas, dtype=float)
        shape = (reps, self.gammas.size, p.d)
        self.w = np.zeros(shape)
        self.prefix = np.zeros(shape)  # sum of w_0 .. w_{t-1}
        self.t = 0
        self._rows = np.arange(reps)

    def advance(self, feats: np.ndarray, y: np.ndarray, on_step: Callable[[int], None]) -> None:
        """Consume ``feats[:, j]``, ``y[:, j]`` for ``j`` in the block."""
        g = self.gammas[None, :]
        for j in range(y.shape[1]):
            self.prefix += self.w
            self.t += 1
            on_step(self.t)
            if self.p.is_onehot:
                idx = feats[:, j]
                cur = self.w[self._rows, :, idx]
                self.w[self._rows, :, idx] = cur + g * (y[:, j, None] - cur)
            else:
                x = feats[:, j]
                pred = np.einsum("rgd,rd->rg", self.w, x)
                self.w += (g * (y[:, j, None] - pred))[:, :, None] * x[:, None, :]


def _sgd_tail_risks(
    p: ProblemInstance,
    streams: Sequence[np.random.Generator],
    n_values: Sequence[int],
    gammas: np.ndarray,
    weights_out: bool = False,
):
    """Excess risks ``(reps, len(gammas), len(n_values))`` of tail-averaged SGD.

    With ``weights_out`` the tail-averaged weights for the single ``N`` in
    ``n_values`` are returned instead, shape ``(reps, len(gammas), d)``.
    """
    n_values = [int(n) for n in n_values]
    horizon = max(n_values)
    reps = len(streams)
    paths = _SgdPaths(p, reps, gammas)
    halves: dict[int, np.ndarray] = {}
    need_half = {n // 2 for n in n_values}
    want = set(n_values)
    risks = np.empty((reps, paths.gammas.size, len(n_values)))
    col = {n: k for k, n in enumerate(n_values)}
    result: dict = {}

    def on_step(t: int) -> None:
        if t in need_half:
            halves[t] = paths.prefix.copy()
        if t in want:
            with np.errstate(over="ignore", invalid="ignore"):
                avg = (paths.prefix - halves.pop(t // 2)) * (2.0 / t)
                if weights_out:
                    result["w"] = avg
                    return
                err = avg - p.w_star
                r = np.einsum("rgd,d->rg", err * err, p.eigenvalues)
            risks[:, :, col[t]] = np.where(np.isfinite(r), r, np.inf)

    width = _row_width(p)
    done = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while done < horizon:
            block = min(_STEP_BLOCK, horizon - done)
            z = np.stack([g.standard_normal((block, width)) for g in streams])
            feats, y = _decode(p, z)
            paths.advance(feats, y, on_step)
            done += block
    return result["w"] if weights_out else risks


def sgd_fit(p: ProblemInstance, cfg: SgdConfig, rng: np.random.Generator) -> np.ndarray:
    """Tail average ``(2/N) * sum_{t=N/2}^{N-1} w_t`` of single-pass SGD from ``w_0 = 0``.

    Consumes exactly ``N`` samples from ``rng``.
    """
    w = _sgd_tail_risks(p, [rng], [cfg.n], np.array([cfg.gamma]), weights_out=True)
    return w[0, 0].copy()


# --- ridge -----------------------------------------------------------------


def _pinv_solve(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Minimum-norm least squares with singular-value cutoff ``d * eps * s_max``."""
    d = X.shape[-1]
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    cut = d * np.finfo(float).eps * s[..., :1]
    inv = np.where(s > cut, 1.0 / np.where(s > cut, s, 1.0), 0.0)
    uty = np.einsum("...nk,...n->...k", U, y)
    return np.einsum("...kd,...k->...d", Vt, inv * uty)


def _check_pd(G: np.ndarray, lam: float, which: str) -> None:
    ev = np.linalg.eigvalsh(G)[..., 0]
    bad = ev <= 0
    if np.any(bad):
        worst = float(np.min(ev))
        raise SingularMatrixError(
            f"{which} regularized Gram matrix with lambda={lam!r} is not positive "
            f"definite: smallest eigenvalue {worst!r}",
            worst,
        )


def ridge_fit(
    X: np.ndarray, y: np.ndarray, lam: float, mode: RidgeMode | str = RidgeMode.AUTO
) -> np.ndarray:
    """Ridge estimator in primal ``(X'X + lam I)^-1 X'y`` or dual ``X'(XX' + lam I)^-1 y`` form.

    ``lam = 0`` gives the minimum-norm least-squares solution. Negative ``lam``
    is accepted when the regularized Gram matrix of the chosen form is positive
    definite. ``X`` may carry leading batch dimensions.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape[-2:]
    if y.shape != X.shape[:-1]:
        raise ValueError(f"y has shape {y.shape}, expected {X.shape[:-1]}")
    mode = RidgeMode(mode)
    if mode is RidgeMode.AUTO:
        mode = RidgeMode.PRIMAL if d <= n else RidgeMode.DUAL
    if lam == 0:
        return _pinv_solve(X, y)
    Xt = np.swapaxes(X, -1, -2)
    if mode is RidgeMode.PRIMAL:
        G = Xt @ X + lam * np.eye(d)
        if lam < 0:
            _check_pd(G, lam, "primal")
        rhs = np.einsum("...nd,...n->...d", X, y)
        return np.linalg.solve(G, rhs[..., None])[..., 0]
    K = X @ Xt + lam * np.eye(n)
    if lam < 0:
        _check_pd(K, lam, "dual")
    alpha = np.linalg.solve(K, y[..., None])[..., 0]
    return np.einsum("...nd,...n->...d", X, alpha)


def ridge_path(X: np.ndarray, y: np.ndarray, lams: Sequence[float]) -> np.ndarray:
    """Ridge weights for every ``lam >= 0`` in ``lams`` from one SVD; shape ``(len(lams), d)``."""
    lams = np.asarray(lams, dtype=float)
    if np.any(lams < 0):
        raise ValueError("ridge_path handles lambda >= 0 only")
    d = X.shape[1]
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    uty = U.T @ y
    cut = d * np.finfo(float).eps * (s[0] if s.size else 0.0)
    keep = s > cut
    with np.errstate(divide="ignore"):
        shrink = np.where(
            lams[:, None] == 0,
            np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)[None, :],
            s[None, :] / (s[None, :] ** 2 + lams[:, None]),
        )
    return (shrink * uty[None, :]) @ Vt


# --- risk ------------------------------------------------------------------


def excess_risk(w: np.ndarray, p: ProblemInstance) -> float:
    """``||w - w*||_H^2``."""
    w = np.asarray(w, dtype=float)
    if w.shape[-1] != p.d:
        raise ValueError(f"weight dimension {w.shape[-1]} does not match d = {p.d}")
    err = w - p.w_star
    return float(np.dot(p.eigenvalues, err * err)) if w.ndim == 1 else (err * err) @ p.eigenvalues


def summarize(values: np.ndarray, seed: int) -> RiskEstimate:
    """Mean and standard error; the sum is exactly rounded, hence order free."""
    values = np.asarray(values, dtype=float)
    reps = values.size
    mean = math.fsum(values) / reps
    if not math.isfinite(mean):
        return RiskEstimate(math.inf, math.inf, reps, seed)
    var = math.fsum((values - mean) ** 2) / (reps - 1)
    return RiskEstimate(mean, math.sqrt(var / reps), reps, seed)


def chunk_reps(reps: int, floats_per_rep: int) -> list[range]:
    size = max(1, min(_MAX_CHUNK_REPS, _CHUNK_FLOATS // max(1, floats_per_rep)))
    return [range(a, min(a + size, reps)) for a in range(0, reps, size)]


def map_chunks(fn: Callable, chunks: Sequence, workers: int = 1) -> list:
    """``[fn(c) for c in chunks]``, optionally in worker processes; order preserved."""
    if workers <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ProcessPoolExecutor(max_workers=min(workers, len(chunks))) as pool:
        return list(pool.map(fn, chunks))


@dataclass(frozen=True)
class _RepRisks:
    """Picklable per-chunk worker for :func:`mc_risk`."""

    p: ProblemInstance
    est: EstimatorConfig
    seed: int

    def __call__(self, reps: range) -> np.ndarray:
        try:
            if isinstance(self.est, SgdConfig):
                streams = [rep_rng(self.seed, r) for r in reps]
                risks = _sgd_tail_risks(
                    self.p, streams, [self.est.n], np.array([self.est.gamma])
                )
                return risks[:, 0, 0]
            width = _row_width(self.p)
            z = np.stack(
                [rep_rng(self.seed, r).standard_normal((self.est.n, width)) for r in reps]
            )
            feats, y = _decode(self.p, z)
            w = ridge_fit(_dense(self.p, feats), y, self.est.lam)
            return np.atleast_1d(excess_risk(w, self.p))
        except (np.linalg.LinAlgError, ValueError, FloatingPointError) as exc:
            raise RuntimeError(
                f"replications {reps.start}..{reps.stop - 1} (seed {self.seed}) failed: {exc}"
            ) from exc


def rep_risks(
    p: ProblemInstance, est: EstimatorConfig, reps: int, seed: int, workers: int = 1
) -> np.ndarray:
    """Per-replication excess risks, indexed by replication."""
    n = est.n
    chunks = chunk_reps(reps, n * _row_width(p) + p.d * (n if isinstance(est, RidgeConfig) else 3))
    return np.concatenate(map_chunks(_RepRisks(p, est, int(seed) & SEED_MASK), chunks, workers))


def mc_risk(
    p: ProblemInstance, est: EstimatorConfig, reps: int, seed: int, workers: int = 1
) -> RiskEstimate:
    """Monte-Carlo mean excess risk of an estimator; replication ``r`` uses ``rep_rng(seed, r)``."""
    if reps < 2:
        raise ValueError(f"reps must be >= 2, got {reps}")
    return summarize(rep_risks(p, est, reps, seed, workers), int(seed) & SEED_MASK)
