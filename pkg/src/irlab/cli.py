"""Command-line front end.

Exit codes: 0 success, 2 usage or invalid input, 1 runtime failure.
Grids accept ``start:stop:steps`` (log-spaced) or comma lists.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import bounds, harness, oracles
from .estimators import RidgeConfig, SgdConfig, mc_risk
from .instances import (
    Constant,
    Delta,
    Kind,
    PowerLaw,
    ProblemInstance,
    RotationInvariant,
    Theorem2,
    dumps_instance,
    load_instance,
    make_ground_truth,
)
from .scenarios import SCENARIOS, dumps_json, run_scenario
from .spectra import power_law_spectrum, theorem2_spectrum, theorem4_spectrum
from .svgplot import plot_csv

DEFAULT_SEED = 42


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def parse_grid(text: str, integer: bool = False) -> list:
    """``a:b:k`` gives ``k`` log-spaced values from ``a`` to ``b``; otherwise a comma list."""
    try:
        if ":" in text:
            a, b, k = text.split(":")
            vals = list(np.geomspace(float(a), float(b), int(k)))
        else:
            vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad grid {text!r}: {exc}") from None
    if not vals:
        raise UsageError(f"empty grid {text!r}")
    if integer:
        return sorted({int(round(v)) for v in vals})
    return [float(v) for v in vals]


def _seed_default() -> int:
    env = os.environ.get("IRLAB_SEED")
    if env is None:
        return DEFAULT_SEED
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"IRLAB_SEED must be an integer, got {env!r}") from None


def _common(p: argparse.ArgumentParser, reps: int) -> None:
    p.add_argument("--seed", type=int, default=None, help="64-bit seed (default: $IRLAB_SEED or 42)")
    p.add_argument("--reps", type=int, default=reps, help=f"Monte-Carlo replications (default {reps})")
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="irlab", description="SGD vs ridge regression on least-squares instances")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    p = sub.add_parser("instance", help="build and write an instance file")
    _common(p, 0)
    p.add_argument("--kind", choices=[k.value for k in Kind], default="gaussian")
    p.add_argument("--spectrum", choices=("power_law", "theorem2", "theorem4"), default="power_law")
    p.add_argument("--d", type=int, default=100)
    p.add_argument("--n", type=int, default=None, help="size parameter of the theorem2/theorem4 spectra")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--normalize", action="store_true", help="rescale the spectrum to unit trace")
    p.add_argument("--wstar", choices=("const", "pow", "delta", "rot", "theorem2"), default="const")
    p.add_argument("--wstar-param", type=float, default=None,
                   help="c for const, beta for pow, j for delta, norm for rot")
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--label", default="")

    for name, helptext in (("risk", "expected excess risk of one estimator"),
                           ("bounds", "bound report for one estimator")):
        p = sub.add_parser(name, help=helptext)
        _common(p, 100)
        p.add_argument("--instance", required=True)
        p.add_argument("--estimator", choices=("sgd", "ridge"), required=True)
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--gamma", type=float, default=None)
        p.add_argument("--lambda", dest="lam", type=float, default=None)
        if name == "risk":
            p.add_argument("--exact", action="store_true", help="exact oracle (one-hot instances)")
        else:
            p.add_argument("--b", type=float, default=1.0)
            p.add_argument("--c", type=float, default=1.0)
            p.add_argument("--contraction", choices=("power", "exp"), default="power")

    p = sub.add_parser("compare", help="sample-inflation curve as CSV")
    _common(p, 20)
    p.add_argument("--instance", required=True)
    p.add_argument("--nridge-grid", required=True)
    p.add_argument("--nsgd-grid", required=True)
    p.add_argument("--lambda-grid", default=None)
    p.add_argument("--gamma-grid", default=None)
    p.add_argument("--slack", type=float, default=harness.DEFAULT_SLACK)

    p = sub.add_parser("scenario", help="run a packaged experiment")
    _common(p, 0)
    p.add_argument("--name", choices=SCENARIOS, required=True)
    p.add_argument("--scale", type=int, default=None, help="main size knob (d for fig1, N otherwise)")
    p.add_argument("--param", action="append", default=[], metavar="KEY=JSON",
                   help="override a scenario parameter, e.g. --param instances=20")

    p = sub.add_parser("plot", help="SVG line chart from CSV columns")
    p.add_argument("--csv", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True, help="comma-separated column names")
    p.add_argument("--out", required=True)
    p.add_argument("--linear-x", action="store_true")
    p.add_argument("--linear-y", action="store_true")
    p.add_argument("--title", default="")
    return ap


def _emit(text: str, out: str | None) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _record_text(rec: dict, fmt: str) -> str:
    if fmt == "json":
        return dumps_json(rec)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    keys = sorted(rec)
    w.writerow(keys)
    w.writerow(["" if rec[k] is None else rec[k] for k in keys])
    return buf.getvalue()


def _cmd_instance(a, seed: int) -> str:
    if a.spectrum == "power_law":
        s = power_law_spectrum(a.d, a.alpha, a.normalize)
        fam = {"family": "power_law", "d": a.d, "alpha": a.alpha, "normalize": a.normalize}
    elif a.spectrum == "theorem2":
        n = a.n or a.d
        s, fam = theorem2_spectrum(n), {"family": "theorem2", "n": n}
    else:
        n = a.n or int(math.isqrt(a.d))
        s, fam = theorem4_spectrum(n, max(a.d, n * n)), {"family": "theorem4", "n": n, "d": max(a.d, n * n)}
    d = s.d
    wp = a.wstar_param
    rng = None
    if a.wstar == "const":
        spec = Constant(1.0 if wp is None else wp)
    elif a.wstar == "pow":
        spec = PowerLaw(1.0 if wp is None else wp)
    elif a.wstar == "delta":
        spec = Delta(1 if wp is None else int(wp))
    elif a.wstar == "rot":
        spec, rng = RotationInvariant(1.0 if wp is None else wp), np.random.default_rng(seed)
    else:
        spec = Theorem2(int(wp) if wp is not None else d, math.sqrt(a.sigma2))
    p = ProblemInstance(Kind(a.kind), s, make_ground_truth(spec, d, rng), a.sigma2, a.label)
    return dumps_instance(p, spectrum_family=fam, w_star_spec=spec)


def _param(a) -> float:
    if a.estimator == "sgd":
        if a.gamma is None:
            raise UsageError("--gamma is required for --estimator sgd")
        return a.gamma
    if a.lam is None:
        raise UsageError("--lambda is required for --estimator ridge")
    return a.lam


def _cmd_risk(a, seed: int) -> str:
    p = load_instance(a.instance)
    val = _param(a)
    rec = {"estimator": a.estimator, "n": a.n, "param": val}
    if a.exact:
        if not p.is_onehot:
            raise UsageError("--exact needs a one-hot instance")
        if a.estimator == "sgd":
            rec.update(mean=oracles.onehot_sgd_risk_exact(p, a.n, val), stderr=0.0, exact=True)
        else:
            rr = oracles.onehot_ridge_risk_exact(p, a.n, val)
            rec.update(mean=rr.total, stderr=0.0, bias=rr.bias, variance=rr.variance, exact=True)
    else:
        cfg = SgdConfig(a.n, val) if a.estimator == "sgd" else RidgeConfig(a.n, val)
        est = mc_risk(p, cfg, a.reps, seed, workers=a.threads)
        rec.update(mean=est.mean, stderr=est.stderr, reps=est.reps, seed=est.seed, exact=False)
    return _record_text(rec, a.format)


def _cmd_bounds(a, seed: int) -> str:
    p = load_instance(a.instance)
    val = _param(a)
    if a.estimator == "sgd":
        fn = bounds.sgd_risk_bound_onehot if p.is_onehot else bounds.sgd_risk_bound_gaussian
        rep = fn(p, a.n, val, c=a.c, contraction=a.contraction)
    elif p.is_onehot:
        rep = bounds.ridge_risk_lower_onehot(p, a.n, val, c=a.c)
    else:
        rep = bounds.ridge_risk_lower_gaussian(p, a.n, val, b=a.b, c=a.c)
    return _record_text(rep.to_record(), a.format)


def _cmd_compare(a, seed: int) -> str:
    p = load_instance(a.instance)
    nr = parse_grid(a.nridge_grid, integer=True)
    ns = sorted({n + n % 2 for n in parse_grid(a.nsgd_grid, integer=True)})
    lams = parse_grid(a.lambda_grid) if a.lambda_grid else list(harness.default_lambda_grid(p))
    gams = parse_grid(a.gamma_grid) if a.gamma_grid else list(harness.default_gamma_grid(p))
    curve = harness.sample_inflation_curve(p, nr, ns, lams, gams, a.reps, a.slack, seed, a.threads)
    if a.format == "csv":
        return curve.to_csv()
    rows = [dict(zip(harness.CURVE_HEADER, (getattr(r, k) for k in harness.CURVE_HEADER))) for r in curve.rows]
    return dumps_json({"label": curve.label, "reps": curve.reps, "seed": curve.seed, "rows": rows})


def _cmd_scenario(a, seed: int) -> str:
    params = {}
    for item in a.param:
        key, sep, raw = item.partition("=")
        if not sep:
            raise UsageError(f"--param expects KEY=VALUE, got {item!r}")
        try:
            params[key] = json.loads(raw)
        except json.JSONDecodeError:
            params[key] = raw
    if a.scale is not None:
        params["scale"] = a.scale
    out = a.out or f"scenario_{a.name}"
    res = run_scenario(a.name, params, out, seed)
    return dumps_json(res.summary)


def _cmd_plot(a) -> str:
    text = Path(a.csv).read_text()
    ys = [c for c in a.y.split(",") if c]
    svg = plot_csv(text, a.x, ys, logx=not a.linear_x, logy=not a.linear_y, title=a.title)
    Path(a.out).write_text(svg)
    return ""


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        a = build_parser().parse_args(argv)
        if a.cmd == "plot":
            _cmd_plot(a)
            return 0
        seed = a.seed if a.seed is not None else _seed_default()
        if getattr(a, "reps", 2) < 0 or (a.cmd in ("risk", "compare") and a.reps < 2):
            raise UsageError("--reps must be >= 2")
        handler = {"instance": _cmd_instance, "risk": _cmd_risk, "bounds": _cmd_bounds,
                   "compare": _cmd_compare, "scenario": _cmd_scenario}[a.cmd]
        text = handler(a, seed)
        _emit(text, None if a.cmd == "scenario" else a.out)
        return 0
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return 2
    except (np.linalg.LinAlgError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
