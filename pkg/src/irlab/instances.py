"""Least-squares problem instances and their JSON file format.

Ground truths are stored in the eigenbasis of ``H``: ``w_star[i]`` pairs with
``lambda_{i+1}``. For Gaussian data this loses nothing (the law is rotation
invariant); for one-hot data the eigenbasis is the natural basis.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Union

import numpy as np

from .spectra import Spectrum, power_law_spectrum, theorem2_spectrum, theorem4_spectrum

ONEHOT_TRACE_TOL = 1e-10


class Kind(str, enum.Enum):
    ONEHOT = "onehot"
    GAUSSIAN = "gaussian"


# Ground-truth descriptors. Indices are 1-based, matching the eigenvalue order.


@dataclass(frozen=True)
class Constant:
    c: float = 1.0


@dataclass(frozen=True)
class PowerLaw:
    beta: float
    c: float = 1.0


@dataclass(frozen=True)
class Delta:
    j: int = 1
    c: float = 1.0


@dataclass(frozen=True)
class RotationInvariant:
    norm: float = 1.0


@dataclass(frozen=True)
class Theorem2:
    n: int
    sigma: float = 1.0


GroundTruthSpec = Union[Constant, PowerLaw, Delta, RotationInvariant, Theorem2]

_SPEC_NAMES = {
    Constant: "constant",
    PowerLaw: "power_law",
    Delta: "delta",
    RotationInvariant: "rotation_invariant",
    Theorem2: "theorem2",
}
_SPEC_TYPES = {v: k for k, v in _SPEC_NAMES.items()}


def make_ground_truth(
    spec: GroundTruthSpec, d: int, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Build ``w*`` (length ``d``) from a descriptor."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    idx = np.arange(1, d + 1, dtype=float)
    if isinstance(spec, Constant):
        w = np.full(d, float(spec.c))
    elif isinstance(spec, PowerLaw):
        w = float(spec.c) * idx ** (-float(spec.beta))
    elif isinstance(spec, Delta):
        if not 1 <= spec.j <= d:
            raise ValueError(f"delta index must lie in [1, {d}], got {spec.j}")
        w = np.zeros(d)
        w[spec.j - 1] = spec.c
    elif isinstance(spec, RotationInvariant):
        if rng is None:
            raise ValueError("a rotation-invariant ground truth needs a seeded rng")
        g = rng.standard_normal(d)
        w = float(spec.norm) * g / np.linalg.norm(g)
    elif isinstance(spec, Theorem2):
        w = np.zeros(d)
        w[0] = spec.sigma * math.sqrt(math.sqrt(spec.n) / math.log(spec.n))
    else:
        raise TypeError(f"unknown ground-truth spec {spec!r}")
    return w


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    kind: Kind
    spectrum: Spectrum
    w_star: np.ndarray
    sigma2: float
    label: str = ""

    def __post_init__(self) -> None:
        kind = Kind(self.kind)
        w = np.array(self.w_star, dtype=float).reshape(-1)
        if w.size != self.spectrum.d:
            raise ValueError(
                f"w_star has length {w.size}, spectrum has dimension {self.spectrum.d}"
            )
        if not np.all(np.isfinite(w)):
            raise ValueError("w_star must be finite")
        if not self.sigma2 >= 0 or not math.isfinite(self.sigma2):
            raise ValueError(f"sigma2 must be finite and >= 0, got {self.sigma2}")
        if kind is Kind.ONEHOT and abs(self.spectrum.trace - 1.0) > ONEHOT_TRACE_TOL:
            raise ValueError(
                f"one-hot instances need unit trace, got trace = {self.spectrum.trace!r}"
            )
        w.setflags(write=False)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "w_star", w)
        object.__setattr__(self, "sigma2", float(self.sigma2))

    @property
    def d(self) -> int:
        return self.spectrum.d

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.spectrum.eigenvalues

    @property
    def signal(self) -> float:
        """``||w*||_H^2``."""
        return float(np.dot(self.spectrum.eigenvalues, self.w_star**2))

    @property
    def is_onehot(self) -> bool:
        return self.kind is Kind.ONEHOT


def r_squared(p: ProblemInstance) -> float:
    """Signal-to-noise ratio ``||w*||_H^2 / sigma^2``; ``inf`` when noiseless."""
    if p.sigma2 == 0:
        return math.inf
    return p.signal / p.sigma2


def is_generalizable(risk: Any, sigma2: float) -> bool:
    """Expected excess risk at most the noise level (boundary included)."""
    mean = getattr(risk, "mean", risk)
    if not math.isfinite(mean):
        raise ValueError("risk mean must be finite")
    return mean <= sigma2


# --- file format -----------------------------------------------------------


def _spectrum_from_record(rec: dict) -> Spectrum:
    if "eigenvalues" in rec:
        return Spectrum(np.asarray(rec["eigenvalues"], dtype=float))
    family = rec.get("family")
    if family == "power_law":
        return power_law_spectrum(
            int(rec["d"]), float(rec.get("alpha", 1.0)), bool(rec.get("normalize", False))
        )
    if family == "theorem2":
        return theorem2_spectrum(int(rec["n"]))
    if family == "theorem4":
        n = int(rec["n"])
        return theorem4_spectrum(n, int(rec.get("d", n * n)))
    raise ValueError(f"unknown spectrum family {family!r}")


def ground_truth_spec_from_record(rec: dict) -> GroundTruthSpec:
    name = rec.get("spec")
    if name not in _SPEC_TYPES:
        raise ValueError(f"unknown w_star spec {name!r}")
    params = {k: v for k, v in rec.items() if k not in ("spec", "seed", "values")}
    return _SPEC_TYPES[name](**params)


def _w_star_from_record(rec: Any, d: int) -> np.ndarray:
    if isinstance(rec, list):
        return np.asarray(rec, dtype=float)
    if "values" in rec:
        return np.asarray(rec["values"], dtype=float)
    spec = ground_truth_spec_from_record(rec)
    rng = np.random.default_rng(int(rec["seed"])) if "seed" in rec else None
    return make_ground_truth(spec, d, rng)


def instance_from_record(rec: dict) -> ProblemInstance:
    spectrum = _spectrum_from_record(rec["spectrum"])
    return ProblemInstance(
        kind=Kind(rec["kind"]),
        spectrum=spectrum,
        w_star=_w_star_from_record(rec["w_star"], spectrum.d),
        sigma2=float(rec["sigma2"]),
        label=str(rec.get("label", "")),
    )


def instance_to_record(
    p: ProblemInstance,
    spectrum_family: dict | None = None,
    w_star_spec: GroundTruthSpec | None = None,
) -> dict:
    """Explicit arrays are always written; descriptors are kept for readability."""
    spectrum: dict = dict(spectrum_family or {})
    spectrum["eigenvalues"] = [float(v) for v in p.spectrum.eigenvalues]
    w_star: dict = {}
    if w_star_spec is not None:
        w_star["spec"] = _SPEC_NAMES[type(w_star_spec)]
        w_star.update({k: v for k, v in vars(w_star_spec).items()})
    w_star["values"] = [float(v) for v in p.w_star]
    rec = {"kind": p.kind.value, "spectrum": spectrum, "w_star": w_star, "sigma2": p.sigma2}
    if p.label:
        rec["label"] = p.label
    return rec


def dumps_instance(p: ProblemInstance, **descriptors: Any) -> str:
    return json.dumps(instance_to_record(p, **descriptors), indent=2, sort_keys=True) + "\n"


def save_instance(p: ProblemInstance, path: str | Path, **descriptors: Any) -> Path:
    path = Path(path)
    path.write_text(dumps_instance(p, **descriptors))
    return path


def load_instance(path: str | Path) -> ProblemInstance:
    return instance_from_record(json.loads(Path(path).read_text()))
