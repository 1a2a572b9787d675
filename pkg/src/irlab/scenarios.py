"""Packaged experiments. Each writes its artifacts plus ``<name>_summary.json``.

Every scenario takes a ``params`` mapping whose keys override the defaults in
:data:`DEFAULTS`; ``scale`` is a shortcut for the main size knob (``d`` for
fig1, ``n`` for the others).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import bounds
from .estimators import RiskEstimate, SgdConfig, derive_seed, mc_risk
from .harness import (
    ComparisonCurve,
    default_gamma_grid,
    default_lambda_grid,
    even_grid,
    pick,
    ridge_risk_table,
    sample_inflation_curve,
    sgd_risk_table,
)
from .instances import (
    Constant,
    Delta,
    Kind,
    PowerLaw,
    ProblemInstance,
    RotationInvariant,
    Theorem2,
    dumps_instance,
    make_ground_truth,
    r_squared,
)
from .oracles import gaussian_sgd_risk_exact, onehot_ridge_risk_grid, onehot_sgd_risk_exact
from .spectra import Spectrum, kappa, power_law_spectrum, theorem2_spectrum, theorem4_spectrum
from .svgplot import Series, emit_svg_plot

SCENARIOS = ("fig1", "thm1", "thm2", "thm4", "cor1")

DEFAULTS: dict[str, dict[str, Any]] = {
    "fig1": dict(
        d=200, sigma2=1.0, reps=20, n_ridge_grid=[25, 50, 100, 200, 400], alphas=[1.0, 2.0],
        wstars=["const", "pow1", "pow10"], n_sgd_factor=100, n_sgd_steps=120, slack=0.05,
        ratio_factor=10.0,
    ),
    "thm1": dict(
        n=64, instances=10, d_min=4, d_max=40, sigma2=1.0, gamma_steps=31, lambda_steps=201, C=8.0,
    ),
    "thm2": dict(n=256, sigma2=1.0, ridge_multipliers=[1, 2, 4, 8, 16], lambda_steps=401, factor=10.0),
    "thm4": dict(n=64, sigma2=1.0, reps=200, lambda_steps=81, factor=10.0, gap_stderr=3.0),
    "cor1": dict(
        n=1000, alphas=[0.0, 0.5, 1.0], sigma2=1.0, cor2=False, cor2_draws=50, cor2_alpha=1.0,
        cor2_d=100, cor2_reps=4, slack=0.05,
    ),
}

_WSTARS = {"const": Constant(1.0), "pow1": PowerLaw(1.0), "pow10": PowerLaw(10.0)}
_WSTAR_TEXT = {"const": "w*[i]=1", "pow1": "w*[i]=i^-1", "pow10": "w*[i]=i^-10"}


@dataclass
class ScenarioResult:
    summary: dict
    files: list


def _clean(v):
    """JSON-safe copy: numpy scalars to Python, infinities and NaN to strings."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return v


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


class _Writer:
    def __init__(self, out_dir: Path):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []

    def text(self, name: str, body: str) -> None:
        (self.dir / name).write_text(body)
        self.files.append(name)

    def json(self, name: str, obj) -> None:
        self.text(name, dumps_json(obj))


def _params(name: str, params: dict | None) -> dict:
    merged = dict(DEFAULTS[name])
    params = dict(params or {})
    scale = params.pop("scale", None)
    unknown = set(params) - set(merged) - {"seed"}
    if unknown:
        raise ValueError(f"unknown parameters for {name}: {sorted(unknown)}")
    merged.update(params)
    if scale is not None:
        merged["d" if name == "fig1" else "n"] = int(scale)
    return merged


def _dense_lambda_grid(tr: float, steps: int) -> np.ndarray:
    return np.concatenate([[0.0], np.geomspace(1e-4 * tr, 1e4 * tr, steps)])


# --- fig1 -------------------------------------------------------------------


def _fig1(prm: dict, seed: int, w: _Writer) -> dict:
    d, nr = int(prm["d"]), [int(n) for n in prm["n_ridge_grid"]]
    n_sgd_grid = even_grid(2, prm["n_sgd_factor"] * max(nr), prm["n_sgd_steps"], nr)
    curves: dict[tuple, ComparisonCurve] = {}
    k = 0
    for alpha in prm["alphas"]:
        spectrum = power_law_spectrum(d, float(alpha))
        for tag in prm["wstars"]:
            spec = _WSTARS[tag]
            stem = f"fig1_alpha{alpha:g}_{tag}"
            p = ProblemInstance(Kind.GAUSSIAN, spectrum, make_ground_truth(spec, d), prm["sigma2"],
                                label=f"lambda_i=i^-{alpha:g}, {_WSTAR_TEXT[tag]}")
            w.text(stem + ".json", dumps_instance(
                p, spectrum_family={"family": "power_law", "d": d, "alpha": float(alpha)}, w_star_spec=spec))
            curve = sample_inflation_curve(
                p, nr, n_sgd_grid, default_lambda_grid(p), default_gamma_grid(p),
                int(prm["reps"]), prm["slack"], derive_seed(seed, k),
            )
            w.text(stem + ".csv", curve.to_csv())
            curves[(alpha, tag)] = curve
            k += 1
        series, notes = [], []
        for tag in prm["wstars"]:
            rows = curves[(alpha, tag)].rows
            ok = [r for r in rows if r.n_sgd is not None]
            if len(ok) < len(rows):
                notes.append(f"{_WSTAR_TEXT[tag]}: {len(rows) - len(ok)} row(s) without n_sgd")
            series.append(Series(_WSTAR_TEXT[tag], tuple(r.n_ridge for r in ok), tuple(r.n_sgd for r in ok)))
        w.text(f"fig1_alpha{alpha:g}.svg", emit_svg_plot(
            series, title=f"SGD vs ridge sample sizes, lambda_i = i^-{alpha:g}",
            xlabel="ridge sample size", ylabel="SGD sample size", notes=notes))

    checks: dict[str, Any] = {}
    if (2.0, "pow10") in curves:
        rows = curves[(2.0, "pow10")].rows
        checks["sgd_not_more_samples"] = all(r.n_sgd is not None and r.n_sgd <= r.n_ridge for r in rows)
    ratio_ok = []
    for (alpha, tag), c in curves.items():
        if tag == "const":
            for r in c.rows:
                limit = prm["ratio_factor"] * (1 + math.log(r.n_ridge))
                ratio_ok.append(r.n_sgd is not None and r.n_sgd / r.n_ridge <= limit)
    if ratio_ok:
        checks["log_factor_inflation"] = all(ratio_ok)
    mono = {}
    for (alpha, tag), c in curves.items():
        ns = [r.n_sgd for r in c.rows]
        mono[f"alpha{alpha:g}_{tag}"] = None not in ns and all(a <= b for a, b in zip(ns, ns[1:]))
    checks["monotone"] = all(mono.values())
    rows_out = {
        f"alpha{a:g}_{t}": [[r.n_ridge, r.n_sgd] for r in c.rows] for (a, t), c in curves.items()
    }
    return dict(verdict=all(checks.values()), checks=checks, monotone_by_curve=mono,
                n_sgd_by_curve=rows_out, n_sgd_grid_size=len(n_sgd_grid))


# --- thm1 -------------------------------------------------------------------


def random_onehot_instance(rng: np.random.Generator, d: int, sigma2: float, label: str = "") -> ProblemInstance:
    lam = np.sort(rng.dirichlet(np.ones(d)))[::-1]
    lam = np.maximum(lam, 1e-12)
    lam = lam / math.fsum(lam)
    return ProblemInstance(Kind.ONEHOT, Spectrum(lam), rng.standard_normal(d), sigma2, label)


def _thm1(prm: dict, seed: int, w: _Writer) -> dict:
    n = int(prm["n"])
    n += n % 2
    rng = np.random.default_rng([seed & ((1 << 64) - 1), 1])
    gammas = np.geomspace(1e-3, 1.0, int(prm["gamma_steps"]))
    lines = ["instance,d,n,lambda_best,ridge_risk,gamma_best,sgd_risk,ratio"]
    reports, ratios = [], []
    for k in range(int(prm["instances"])):
        d = int(rng.integers(prm["d_min"], prm["d_max"] + 1))
        p = random_onehot_instance(rng, d, prm["sigma2"], f"random one-hot #{k}")
        w.text(f"thm1_instance{k}.json", dumps_instance(p))
        lams = _dense_lambda_grid(1.0, int(prm["lambda_steps"]))
        rt = pick(list(lams), ridge_risk_table(p, [n], lams, 0, seed)[0])
        st = pick(list(gammas), sgd_risk_table(p, [n], gammas, 0, seed)[0])
        ratio = st.risk.mean / rt.risk.mean
        ratios.append(ratio)
        lines.append(f"{k},{d},{n},{rt.best_param!r},{rt.risk.mean!r},{st.best_param!r},{st.risk.mean!r},{ratio!r}")
        reports.append(bounds.sgd_risk_bound_onehot(p, n, st.best_param).to_record())
        reports.append(bounds.ridge_risk_lower_onehot(p, n, rt.best_param).to_record())
    w.text("thm1_results.csv", "\n".join(lines) + "\n")
    w.json("thm1_bounds.json", reports)
    worst = max(ratios)
    return dict(verdict=worst <= prm["C"], max_ratio=worst, C=prm["C"], ratios=ratios)


# --- thm2 -------------------------------------------------------------------


def thm2_instance(n: int, sigma2: float = 1.0) -> ProblemInstance:
    sigma = math.sqrt(sigma2)
    return ProblemInstance(Kind.ONEHOT, theorem2_spectrum(n), make_ground_truth(Theorem2(n, sigma), n),
                           sigma2, label=f"one-hot best case, N={n}")


def _thm2(prm: dict, seed: int, w: _Writer) -> dict:
    n = int(prm["n"])
    n += n % 2
    p = thm2_instance(n, prm["sigma2"])
    w.text("thm2_instance.json", dumps_instance(p, spectrum_family={"family": "theorem2", "n": n},
                                                w_star_spec=Theorem2(n, math.sqrt(prm["sigma2"]))))
    gamma = n ** -0.5
    sgd = onehot_sgd_risk_exact(p, n, gamma)
    sgd_ok = sgd <= prm["factor"] * p.sigma2 / n
    limit = n**2 / math.log(n) ** 2
    lams = _dense_lambda_grid(1.0, int(prm["lambda_steps"]))
    lines = ["n_ridge,lambda_best,ridge_risk,sgd_risk,ridge_ge_sgd,stress"]
    reports = [bounds.sgd_risk_bound_onehot(p, n, gamma).to_record()]
    rows = []
    for m in prm["ridge_multipliers"]:
        nr = int(m * n)
        bias, var = onehot_ridge_risk_grid(p, nr, lams)
        tr = pick(list(lams), [RiskEstimate.exact(v) for v in bias + var])
        ge = tr.risk.mean >= sgd
        stress = nr > limit
        rows.append(dict(n_ridge=nr, lambda_best=tr.best_param, ridge_risk=tr.risk.mean,
                         ridge_ge_sgd=ge, stress=stress))
        lines.append(f"{nr},{tr.best_param!r},{tr.risk.mean!r},{sgd!r},{str(ge).lower()},{str(stress).lower()}")
        reports.append(bounds.ridge_risk_lower_onehot(p, nr, tr.best_param).to_record())
    w.text("thm2_rows.csv", "\n".join(lines) + "\n")
    w.json("thm2_bounds.json", reports)
    core = all(r["ridge_ge_sgd"] for r in rows if not r["stress"])
    return dict(verdict=sgd_ok and core, sgd_risk=sgd, gamma=gamma, sgd_within_factor=sgd_ok,
                separation_limit=limit, separation_holds_below_limit=core,
                stress_rows={str(r["n_ridge"]): r["ridge_ge_sgd"] for r in rows if r["stress"]},
                rows=rows)


# --- thm4 -------------------------------------------------------------------


def thm4_instance(n: int, sigma2: float = 1.0) -> ProblemInstance:
    s = theorem4_spectrum(n, n * n)
    return ProblemInstance(Kind.GAUSSIAN, s, make_ground_truth(Delta(1, math.sqrt(sigma2)), s.d), sigma2,
                           label=f"Gaussian best case, N={n}")


def _thm4(prm: dict, seed: int, w: _Writer) -> dict:
    n = int(prm["n"])
    n += n % 2
    p = thm4_instance(n, prm["sigma2"])
    w.text("thm4_instance.json", dumps_instance(
        p, spectrum_family={"family": "theorem4", "n": n, "d": n * n},
        w_star_spec=Delta(1, math.sqrt(prm["sigma2"]))))
    gamma = math.log(n) / (2 * n)
    reps = int(prm["reps"])
    # same data streams for both estimators
    sgd = mc_risk(p, SgdConfig(n, gamma), reps, seed)
    lams = _dense_lambda_grid(p.spectrum.trace, int(prm["lambda_steps"]))
    ridge = pick(list(lams), ridge_risk_table(p, [n], lams, reps, seed)[0])
    combined = math.hypot(sgd.stderr, ridge.risk.stderr)
    gap = ridge.risk.mean - sgd.mean
    small = sgd.mean <= prm["factor"] * p.sigma2 / n
    beats = sgd.mean <= ridge.risk.mean and gap > prm["gap_stderr"] * combined
    w.json("thm4_bounds.json", [
        bounds.sgd_risk_bound_gaussian(p, n, gamma).to_record(),
        bounds.ridge_risk_lower_gaussian(p, n, ridge.best_param).to_record(),
    ])
    lines = [
        "estimator,param,risk,stderr",
        f"sgd,{gamma!r},{sgd.mean!r},{sgd.stderr!r}",
        f"ridge,{ridge.best_param!r},{ridge.risk.mean!r},{ridge.risk.stderr!r}",
    ]
    w.text("thm4_results.csv", "\n".join(lines) + "\n")
    return dict(verdict=small and beats, sgd_risk=sgd.mean, sgd_stderr=sgd.stderr,
                sgd_risk_exact=gaussian_sgd_risk_exact(p, n, gamma), gamma=gamma,
                ridge_risk=ridge.risk.mean, ridge_stderr=ridge.risk.stderr, lambda_best=ridge.best_param,
                sgd_within_factor=small, gap=gap, combined_stderr=combined, sgd_beats_ridge=beats)


# --- cor1 -------------------------------------------------------------------


def _cor1(prm: dict, seed: int, w: _Writer) -> dict:
    n = int(prm["n"])
    lines = ["alpha,kappa,limit,ok,thm3_n_sgd,thm3_gamma,log2_n_times_n"]
    rows = {}
    for alpha in prm["alphas"]:
        s = power_law_spectrum(n, float(alpha))
        k = kappa(s, n)
        limit = 1 + math.log(n)
        # ground truth scaled so that R^2 = 1
        wst = np.full(n, math.sqrt(prm["sigma2"] / s.trace))
        p = ProblemInstance(Kind.GAUSSIAN, s, wst, prm["sigma2"])
        rule = bounds.thm3_rule(p, 0.0, n)
        rows[f"{alpha:g}"] = dict(kappa=k, limit=limit, ok=k <= limit, thm3_n_sgd=rule.n_sgd, thm3_gamma=rule.gamma)
        lines.append(f"{alpha:g},{k!r},{limit!r},{str(k <= limit).lower()},{rule.n_sgd},{rule.gamma!r},"
                     f"{math.log(n) ** 2 * n!r}")
    w.text("cor1_kappa.csv", "\n".join(lines) + "\n")
    out: dict[str, Any] = dict(rows=rows)
    verdict = all(r["ok"] for r in rows.values())
    if prm["cor2"]:
        out["rotation_invariant"] = _cor2(prm, seed, w)
        verdict = verdict and out["rotation_invariant"]["verdict"]
    out["verdict"] = verdict
    return out


def _cor2(prm: dict, seed: int, w: _Writer) -> dict:
    """Average risk tables over rotation-invariant ground truths, then tune, at n_sgd = n_ridge."""
    d = int(prm["cor2_d"])
    n = d + d % 2
    s = power_law_spectrum(d, float(prm["cor2_alpha"]))
    # E ||w*||_H^2 = norm^2 tr(H) / d, chosen equal to sigma^2
    norm = math.sqrt(prm["sigma2"] * d / s.trace)
    probe = ProblemInstance(Kind.GAUSSIAN, s, np.zeros(d), prm["sigma2"])
    lams, gammas = default_lambda_grid(probe), default_gamma_grid(probe)
    ridge_means, sgd_means = [], []
    for k in range(int(prm["cor2_draws"])):
        rng = np.random.default_rng([seed & ((1 << 64) - 1), 2, k])
        p = ProblemInstance(Kind.GAUSSIAN, s, make_ground_truth(RotationInvariant(norm), d, rng), prm["sigma2"])
        dseed = derive_seed(seed, 2, k)
        ridge_means.append([e.mean for e in ridge_risk_table(p, [n], lams, prm["cor2_reps"], dseed)[0]])
        sgd_means.append([e.mean for e in sgd_risk_table(p, [n], gammas, prm["cor2_reps"], dseed)[0]])

    def averaged(table):
        arr = np.asarray(table)
        se = arr.std(axis=0, ddof=1) / math.sqrt(arr.shape[0])
        return [_avg(arr[:, j], se[j]) for j in range(arr.shape[1])]

    rt, st = pick(list(lams), averaged(ridge_means)), pick(list(gammas), averaged(sgd_means))
    ok = st.risk.mean <= rt.risk.mean * (1 + prm["slack"])
    w.text("cor2_results.csv", "estimator,param,risk,stderr\n"
           f"ridge,{rt.best_param!r},{rt.risk.mean!r},{rt.risk.stderr!r}\n"
           f"sgd,{st.best_param!r},{st.risk.mean!r},{st.risk.stderr!r}\n")
    return dict(verdict=ok, n=n, d=d, draws=int(prm["cor2_draws"]), ridge_risk=rt.risk.mean,
                sgd_risk=st.risk.mean, lambda_best=rt.best_param, gamma_best=st.best_param)


def _avg(col: np.ndarray, se: float) -> RiskEstimate:
    return RiskEstimate(math.fsum(col) / col.size, float(se), int(col.size), 0)


_RUNNERS: dict[str, Callable] = {"fig1": _fig1, "thm1": _thm1, "thm2": _thm2, "thm4": _thm4, "cor1": _cor1}


def run_scenario(name: str, params: dict | None = None, out_dir: str | Path = ".", seed: int = 42) -> ScenarioResult:
    """Run a named scenario, writing its files into ``out_dir``."""
    if name not in _RUNNERS:
        raise ValueError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    prm = _params(name, params)
    seed = int(prm.pop("seed", seed))
    w = _Writer(Path(out_dir))
    details = _RUNNERS[name](prm, seed, w)
    verdict = details.pop("verdict")
    summary = dict(scenario=name, params=dict(prm, seed=seed), verdict="pass" if verdict else "fail",
                   details=details)
    w.json(f"{name}_summary.json", summary)
    return ScenarioResult(summary, list(w.files))
