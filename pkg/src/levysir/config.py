"""Scenario configuration, figure presets and serialization.

Config files are JSON.  Keys mirror the dataclass field names::

    {
      "name": "fig1",
      "mode": "full",                      # full | degenerate | deterministic
      "model": {"A": 0.9, "mu1": 0.3, "mu2": 0.5, "gamma": 0.05,
                "beta": 0.07, "eta": 0.09},
      "noise": {"sigma1": 0.15, "sigma2": 0.25, "sigma4": 0.27,
                "atoms": [{"weight": 1.0, "lam1": 0.2, "lam2": 0.23, "lam4": 0.1}]},
      "sim": {"dt": 0.01, "horizon": 1000.0, "seed": 0,
              "record_stride": 1, "positivity_floor": 0.0},
      "initial": [0.6, 0.3, 0.05],
      "analysis": {"epsilon": 0.001, "tail_fraction": 0.5, "window": [500.0, 1000.0],
                   "n_seeds": 50, "mean_tolerance": 0.05, "square_tolerance": 0.1,
                   "p_max": 4.0, "p_step": 0.01}
    }

Only ``model`` is required; everything else has defaults.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .errors import ParseError, ValidationError
from .integrator import SimConfig, Trajectory
from .model import LevyAtom, ModelParams, NoiseSpec, ThresholdReport

OUTPUT_DIR_ENV = "LEVYSIR_OUTPUT_DIR"
MODES = ("full", "degenerate", "deterministic")


@dataclass(frozen=True)
class AnalysisSettings:
    epsilon: float = 1e-3
    tail_fraction: float = 0.5
    window: tuple[float, float] | None = None
    n_seeds: int = 50
    mean_tolerance: float = 0.05
    square_tolerance: float = 0.10
    p_max: float = 4.0
    p_step: float = 0.01

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValidationError("analysis.epsilon must be > 0")
        if not 0 < self.tail_fraction < 1:
            raise ValidationError("analysis.tail_fraction must lie in (0, 1)")
        if self.window is not None:
            w = tuple(float(x) for x in self.window)
            if len(w) != 2 or not 0 <= w[0] < w[1]:
                raise ValidationError("analysis.window must be [start, stop] with 0 <= start < stop")
            object.__setattr__(self, "window", w)
        if int(self.n_seeds) != self.n_seeds or self.n_seeds < 1:
            raise ValidationError("analysis.n_seeds must be an integer >= 1")
        object.__setattr__(self, "n_seeds", int(self.n_seeds))
        if self.mean_tolerance < 0 or self.square_tolerance < 0:
            raise ValidationError("analysis tolerances must be >= 0")
        if not self.p_max > 2 or not self.p_step > 0:
            raise ValidationError("analysis.p_max must be > 2 and p_step > 0")


@dataclass(frozen=True)
class ScenarioConfig:
    """A validated run description.

    ``mode`` rewrites the noise on construction: ``degenerate`` keeps only
    sigma1 (no jumps, sigma2 = sigma4 = 0) and ``deterministic`` drops all
    noise.
    """

    model: ModelParams
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    sim: SimConfig = field(default_factory=SimConfig)
    initial: tuple[float, float, float] = (0.6, 0.3, 0.05)
    analysis: AnalysisSettings = field(default_factory=AnalysisSettings)
    mode: str = "full"
    name: str = "custom"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        init = tuple(float(x) for x in self.initial)
        if len(init) != 3 or not all(math.isfinite(x) and x > 0 for x in init):
            raise ValidationError(f"initial must be three positive numbers, got {self.initial!r}")
        object.__setattr__(self, "initial", init)
        if self.mode == "degenerate":
            object.__setattr__(self, "noise", NoiseSpec(self.noise.sigma1))
        elif self.mode == "deterministic":
            object.__setattr__(self, "noise", NoiseSpec())
        self.noise.require_h2()

    @property
    def window(self) -> tuple[float, float]:
        if self.analysis.window is not None:
            return self.analysis.window
        return (0.5 * self.sim.horizon, self.sim.horizon)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "mode": self.mode,
            "model": dataclasses.asdict(self.model),
            "noise": {
                "sigma1": self.noise.sigma1,
                "sigma2": self.noise.sigma2,
                "sigma4": self.noise.sigma4,
                "atoms": [dataclasses.asdict(a) for a in self.noise.atoms],
            },
            "sim": dataclasses.asdict(self.sim),
            "initial": list(self.initial),
            "analysis": {
                **dataclasses.asdict(self.analysis),
                "window": list(self.analysis.window) if self.analysis.window else None,
            },
        }


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------

_SECTION_FIELDS = {
    "model": {f.name for f in dataclasses.fields(ModelParams)},
    "noise": {"sigma1", "sigma2", "sigma4", "atoms"},
    "sim": {f.name for f in dataclasses.fields(SimConfig)},
    "analysis": {f.name for f in dataclasses.fields(AnalysisSettings)},
}
_TOP_FIELDS = {"name", "mode", "model", "noise", "sim", "initial", "analysis"}
_ATOM_FIELDS = {f.name for f in dataclasses.fields(LevyAtom)}


def _check_keys(obj: Any, allowed: set, where: str) -> dict:
    if not isinstance(obj, dict):
        raise ParseError("expected a JSON object", field=where)
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ParseError(f"unknown key {unknown[0]!r}", field=f"{where}.{unknown[0]}" if where else unknown[0])
    return obj


def _numbers(obj: dict, where: str) -> dict:
    for key, value in obj.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParseError(f"expected a number, got {value!r}", field=f"{where}.{key}")
    return obj


def config_from_dict(raw: Any) -> ScenarioConfig:
    """Build a ScenarioConfig from parsed JSON, checking every invariant."""
    raw = _check_keys(raw, _TOP_FIELDS, "")
    if "model" not in raw:
        raise ParseError("missing required section", field="model")
    model_raw = _numbers(_check_keys(raw["model"], _SECTION_FIELDS["model"], "model"), "model")
    missing = sorted(_SECTION_FIELDS["model"] - set(model_raw))
    if missing:
        raise ParseError("missing model parameter", field=f"model.{missing[0]}")

    noise_raw = _check_keys(raw.get("noise", {}), _SECTION_FIELDS["noise"], "noise")
    atoms_raw = noise_raw.get("atoms", [])
    if not isinstance(atoms_raw, list):
        raise ParseError("expected a list", field="noise.atoms")
    sigmas = _numbers({k: v for k, v in noise_raw.items() if k != "atoms"}, "noise")

    sim_raw = _numbers(_check_keys(raw.get("sim", {}), _SECTION_FIELDS["sim"], "sim"), "sim")
    an_raw = dict(_check_keys(raw.get("analysis", {}), _SECTION_FIELDS["analysis"], "analysis"))
    window = an_raw.pop("window", None)
    _numbers(an_raw, "analysis")
    if window is not None and (not isinstance(window, list) or len(window) != 2):
        raise ParseError("expected [start, stop]", field="analysis.window")

    initial = raw.get("initial", [0.6, 0.3, 0.05])
    if not isinstance(initial, list) or len(initial) != 3:
        raise ParseError("expected [S0, I0, D0]", field="initial")
    _numbers({str(k): v for k, v in enumerate(initial)}, "initial")

    atoms = []
    for k, a in enumerate(atoms_raw):
        a = _numbers(_check_keys(a, _ATOM_FIELDS, f"noise.atoms[{k}]"), f"noise.atoms[{k}]")
        if "weight" not in a:
            raise ParseError("missing weight", field=f"noise.atoms[{k}].weight")
        atoms.append(LevyAtom(**a))

    return ScenarioConfig(
        model=ModelParams(**model_raw),
        noise=NoiseSpec(atoms=tuple(atoms), **sigmas),
        sim=SimConfig(**sim_raw),
        initial=tuple(initial),
        analysis=AnalysisSettings(window=tuple(window) if window is not None else None, **an_raw),
        mode=raw.get("mode", "full"),
        name=str(raw.get("name", "custom")),
    )


def parse_config(text: str) -> ScenarioConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc
    return config_from_dict(raw)


def load_config(path: str | os.PathLike) -> ScenarioConfig:
    """Load a JSON config file, or a preset by name when no such file exists."""
    p = Path(path)
    if not p.exists() and str(path) in PRESETS:
        return preset(str(path))
    try:
        text = p.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_config(text)


def dump_config(config: ScenarioConfig) -> str:
    return json.dumps(config.to_dict(), indent=2) + "\n"


def save_config(config: ScenarioConfig, path: str | os.PathLike) -> Path:
    p = Path(path)
    p.write_text(dump_config(config))
    return p


# --------------------------------------------------------------------------
# presets
# --------------------------------------------------------------------------

# Parameter sets for the four reference scenarios.  The step size 0.01 and
# horizon 1000 are assumed defaults, not part of the scenario data.
_FIGURES = {
    "fig1": dict(A=0.9, mu1=0.3, beta=0.07, gamma=0.05, mu2=0.5, eta=0.09,
                 sigmas=(0.15, 0.25, 0.27), lams=(0.2, 0.23, 0.1), initial=(0.6, 0.3, 0.05)),
    "fig2": dict(A=0.3, mu1=0.3, beta=1.3, gamma=0.05, mu2=0.5, eta=0.09,
                 sigmas=(0.15, 0.25, 0.27), lams=(0.2, 0.23, 0.1), initial=(0.6, 0.3, 0.05)),
    "fig3": dict(A=0.6, mu1=0.4, beta=0.35, gamma=0.2, mu2=0.3, eta=0.7,
                 sigmas=(0.2, 0.15, 0.13), lams=(0.5, 0.3, 0.7), initial=(0.2, 0.3, 0.4)),
    "fig4": dict(A=0.6, mu1=0.4, beta=0.8, gamma=0.3, mu2=0.3, eta=0.2,
                 sigmas=(0.169, 0.15, 0.13), lams=(0.5, 0.3, 0.7), initial=(0.2, 0.3, 0.4)),
}
PRESETS = tuple(_FIGURES)


def preset(name: str, mode: str = "full") -> ScenarioConfig:
    try:
        f = _FIGURES[name]
    except KeyError:
        raise ValidationError(f"unknown preset {name!r}; choose from {PRESETS}") from None
    horizon = 1000.0
    window = (500.0, 1000.0)
    return ScenarioConfig(
        model=ModelParams(A=f["A"], mu1=f["mu1"], mu2=f["mu2"], gamma=f["gamma"],
                          beta=f["beta"], eta=f["eta"]),
        noise=NoiseSpec.single_atom(f["sigmas"], f["lams"]),
        sim=SimConfig(dt=0.01, horizon=horizon),
        initial=f["initial"],
        analysis=AnalysisSettings(window=window),
        mode=mode,
        name=name,
    )


# --------------------------------------------------------------------------
# outputs
# --------------------------------------------------------------------------

def output_dir(override: str | os.PathLike | None = None) -> Path:
    d = Path(override or os.environ.get(OUTPUT_DIR_ENV, "levysir-out"))
    d.mkdir(parents=True, exist_ok=True)
    return d


def write_trajectory_csv(traj: Trajectory, path: str | os.PathLike) -> Path:
    """Write ``t,S,I,D[,psi]`` with shortest round-trip float formatting."""
    p = Path(path)
    with p.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["t", "S", "I", "D"] + (["psi"] if traj.psi is not None else [])
        w.writerow(header)
        for k in range(len(traj.times)):
            row = [traj.times[k], *traj.states[k]]
            if traj.psi is not None:
                row.append(traj.psi[k])
            w.writerow([repr(float(x)) for x in row])
    return p


def read_trajectory_csv(path: str | os.PathLike) -> Trajectory:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(x) for x in r] for r in body]).reshape(-1, len(header))
    psi = data[:, 4].copy() if "psi" in header else None
    return Trajectory(data[:, 0].copy(), data[:, 1:4].copy(), psi)


def _finite_or_none(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite_or_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_or_none(v) for v in obj]
    return obj


def json_ready(obj):
    """Plain-JSON form of a nested structure; non-finite floats become null."""
    return _finite_or_none(json.loads(json.dumps(obj, default=_default)))


def _default(o):
    if dataclasses.is_dataclass(o):
        return dataclasses.asdict(o)
    if hasattr(o, "tolist"):
        return o.tolist()
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


@dataclass(frozen=True)
class RunReport:
    config: dict
    thresholds: ThresholdReport
    hypotheses: list
    analysis: dict
    provenance: dict

    @classmethod
    def build(cls, config: ScenarioConfig, thresholds: ThresholdReport, hypotheses,
              analysis: dict | None = None, seed: int | None = None) -> "RunReport":
        return cls(
            config=json_ready(config.to_dict()),
            thresholds=thresholds,
            hypotheses=json_ready([dataclasses.asdict(h) for h in hypotheses]),
            analysis=json_ready(analysis or {}),
            provenance={
                "tool": "levysir",
                "version": __version__,
                "seed": config.sim.seed if seed is None else seed,
                "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            },
        )

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "thresholds": self.thresholds.to_dict(),
            "hypotheses": self.hypotheses,
            "analysis": self.analysis,
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(d["config"], ThresholdReport.from_dict(d["thresholds"]),
                   d["hypotheses"], d["analysis"], d["provenance"])

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))

