"""Model parameters, Lévy noise description and the closed-form thresholds.

The epidemic is the delayed SIR system reduced by the linear chain trick to
three compartments (S, I, D), where D is the exponentially weighted memory of
past infections.  Each compartment carries multiplicative Brownian noise and a
multiplicative jump driven by a compensated Poisson random measure.  The Lévy
measure is represented by a finite list of atoms, so every integral against it
is a finite weighted sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .errors import (
    ChiTwoNonPositive,
    DegenerateDiffusion,
    InvalidOrder,
    LevySIRError,
    ThetaNonPositive,
    ValidationError,
)

COMPARTMENTS = ("S", "I", "D")


def _check_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class ModelParams:
    """Biological rates of the reduced (S, I, D) system."""

    A: float       # recruitment
    mu1: float     # natural death of S
    mu2: float     # general mortality of I
    gamma: float   # recovery
    beta: float    # transmission
    eta: float     # fading-memory rate of the weak kernel

    def __post_init__(self):
        for name in ("A", "mu1", "mu2", "gamma", "beta", "eta"):
            value = _check_finite(name, getattr(self, name))
            if value <= 0:
                raise ValidationError(f"{name} must be > 0, got {value!r}")
            object.__setattr__(self, name, value)

    @property
    def removal(self) -> float:
        """Total exit rate from I, mu2 + gamma."""
        return self.mu2 + self.gamma


@dataclass(frozen=True)
class LevyAtom:
    """One atom of the Lévy measure: arrival weight and relative jump sizes.

    ``1 + lam > 0`` is deliberately not enforced here so that a bad atom can
    still be constructed and reported by :func:`validate_hypotheses`; the
    simulator and the config loader refuse such atoms.
    """

    weight: float
    lam1: float = 0.0
    lam2: float = 0.0
    lam4: float = 0.0

    def __post_init__(self):
        for name in ("weight", "lam1", "lam2", "lam4"):
            object.__setattr__(self, name, _check_finite(name, getattr(self, name)))
        if self.weight < 0:
            raise ValidationError(f"atom weight must be >= 0, got {self.weight!r}")

    @property
    def lams(self) -> tuple[float, float, float]:
        return (self.lam1, self.lam2, self.lam4)


@dataclass(frozen=True)
class NoiseSpec:
    """Diffusion intensities for S, I, D and a finite-atom Lévy measure."""

    sigma1: float = 0.0
    sigma2: float = 0.0
    sigma4: float = 0.0
    atoms: tuple[LevyAtom, ...] = ()

    def __post_init__(self):
        for name in ("sigma1", "sigma2", "sigma4"):
            value = _check_finite(name, getattr(self, name))
            if value < 0:
                raise ValidationError(f"{name} must be >= 0, got {value!r}")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "atoms", tuple(self.atoms))

    @classmethod
    def single_atom(cls, sigmas: Sequence[float], lams: Sequence[float], weight: float = 1.0):
        """Constant jump sizes with total jump intensity ``weight``."""
        return cls(*sigmas, atoms=(LevyAtom(weight, *lams),))

    @property
    def sigmas(self) -> tuple[float, float, float]:
        return (self.sigma1, self.sigma2, self.sigma4)

    @property
    def total_rate(self) -> float:
        """nu(U), the total jump arrival intensity."""
        return math.fsum(a.weight for a in self.atoms)

    def weights(self) -> np.ndarray:
        return np.array([a.weight for a in self.atoms], dtype=float)

    def lam_matrix(self) -> np.ndarray:
        """Jump sizes as an (n_atoms, 3) array, columns S, I, D."""
        return np.array([a.lams for a in self.atoms], dtype=float).reshape(-1, 3)

    def compensator(self) -> tuple[float, float, float]:
        """Per-compartment sum(w * lam), the drift correction of the jump part."""
        return tuple(
            math.fsum(a.weight * a.lams[i] for a in self.atoms) for i in range(3)
        )

    def h2_violations(self) -> list[str]:
        out = []
        for k, atom in enumerate(self.atoms):
            for label, lam in zip(("lam1", "lam2", "lam4"), atom.lams):
                if 1.0 + lam <= 0:
                    out.append(f"atom {k}: 1+{label} <= 0")
        return out

    def require_h2(self) -> None:
        bad = self.h2_violations()
        if bad:
            raise ValidationError("; ".join(bad))


def _atom_sum(noise: NoiseSpec, fn: Callable[[LevyAtom], float]) -> float:
    return math.fsum(a.weight * fn(a) for a in noise.atoms if a.weight != 0.0)


# --------------------------------------------------------------------------
# deterministic pieces
# --------------------------------------------------------------------------

def deterministic_threshold(params: ModelParams) -> float:
    """beta*A / (mu1*(mu2 + gamma)), the threshold of the noise-free system."""
    return params.beta * (params.A / params.mu1) / (params.mu2 + params.gamma)


def drift_reduced(state, params: ModelParams) -> tuple[float, float, float]:
    S, I, D = (float(x) for x in state)
    p = params
    return (
        p.A - p.mu1 * S - p.beta * S * D,
        p.beta * S * D - (p.mu2 + p.gamma) * I,
        p.eta * (I - D),
    )


def gamma_kernel(s, n: int, eta: float):
    """Gamma(n+1, eta) delay density s^n eta^(n+1) exp(-eta s) / n!.

    Accepts scalars or arrays for ``s``.  Evaluated in log space so large
    orders do not overflow.
    """
    if int(n) != n or n < 0:
        raise ValueError(f"kernel order must be a non-negative integer, got {n!r}")
    if eta <= 0:
        raise ValueError(f"eta must be > 0, got {eta!r}")
    n = int(n)
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise ValueError("elapsed time must be >= 0")
    log_norm = (n + 1) * math.log(eta) - math.lgamma(n + 1)
    if n == 0:
        out = np.exp(log_norm - eta * s_arr)
    else:
        with np.errstate(divide="ignore"):
            out = np.exp(log_norm + n * np.log(s_arr) - eta * s_arr)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# extinction side
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtinctionTerms:
    t_star: float
    upsilon: float
    pi_term: float
    sigma_term: float
    lambda_term: float
    chi2: float
    theta: float


def chi2_value(params: ModelParams, noise: NoiseSpec) -> float:
    """2*mu1 - sigma1^2 - sum(w * lam1^2)."""
    return 2.0 * params.mu1 - noise.sigma1**2 - _atom_sum(noise, lambda a: a.lam1**2)


def jump_log_penalty(atom: LevyAtom) -> float:
    """Per-atom contribution to the jump penalty of the infected functional.

    Uses ln(1+x) - x at the smaller of (lam2, lam4) when both are positive,
    at the larger when both are non-positive, and 0 for mixed signs.
    """
    lo, hi = min(atom.lam2, atom.lam4), max(atom.lam2, atom.lam4)
    out = 0.0
    if lo > 0:
        out += math.log1p(lo) - lo
    if hi <= 0:
        out += math.log1p(hi) - hi
    return out


def extinction_report(params: ModelParams, noise: NoiseSpec) -> ExtinctionTerms:
    if noise.sigma2 == 0.0 or noise.sigma4 == 0.0:
        raise DegenerateDiffusion("sigma2 and sigma4 must both be > 0")
    noise.require_h2()
    t_star = deterministic_threshold(params)
    root = math.sqrt(t_star) - 1.0
    if t_star <= 1.0:
        upsilon = min(params.removal, params.eta) * root
    else:
        upsilon = max(params.removal, params.eta) * root
    pi_term = _atom_sum(noise, jump_log_penalty)
    sigma_term = 1.0 / (2.0 * (noise.sigma2**-2 + noise.sigma4**-2))
    lambda_term = noise.sigma1**2 + _atom_sum(noise, lambda a: a.lam1**2)
    chi2 = chi2_value(params, noise)
    if chi2 <= 0:
        raise ChiTwoNonPositive(f"chi2 = {chi2!r} <= 0")
    theta = upsilon + pi_term - sigma_term + params.eta * math.sqrt(t_star * lambda_term / chi2)
    return ExtinctionTerms(t_star, upsilon, pi_term, sigma_term, lambda_term, chi2, theta)


# --------------------------------------------------------------------------
# persistence side
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PersistenceTerms:
    sbar1: float
    sbar2: float
    sbar4: float
    t_tilde: float
    c1: float
    c2: float
    c3: float
    persistence_lower_bound: float


def noise_penalty(sigma: float, noise: NoiseSpec, index: int) -> float:
    """0.5 sigma^2 + sum(w * (lam - ln(1 + lam))) for one compartment."""
    return 0.5 * sigma**2 + _atom_sum(
        noise, lambda a: a.lams[index] - math.log1p(a.lams[index])
    )


def persistence_report(params: ModelParams, noise: NoiseSpec) -> PersistenceTerms:
    noise.require_h2()
    p = params
    sbar1 = noise_penalty(noise.sigma1, noise, 0)
    sbar2 = noise_penalty(noise.sigma2, noise, 1)
    sbar4 = noise_penalty(noise.sigma4, noise, 2)
    s_level = p.A / (p.mu1 + sbar1)
    t_tilde = p.beta * s_level / ((p.mu2 + p.gamma + sbar2) + p.beta * s_level * sbar4 / p.eta)
    c1 = p.beta * s_level**2 * (p.eta + sbar4) / (p.A * p.eta)
    c2 = p.beta * s_level / (p.eta + sbar4)
    c3 = c1 * p.beta / p.eta
    bound = (1.0 / c1) * s_level * (1.0 - 1.0 / t_tilde) if t_tilde > 1.0 else 0.0
    return PersistenceTerms(sbar1, sbar2, sbar4, t_tilde, c1, c2, c3, bound)


# --------------------------------------------------------------------------
# moment condition
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentCheck:
    p: float
    vartheta: float
    sigma_bar: float
    ell_p: float
    chi1p: float


def moment_gap(lam: float, p: float) -> float:
    """(1 + lam)^p - 1 - p*lam; non-negative for p > 1 and lam > -1."""
    return (1.0 + lam) ** p - 1.0 - p * lam


def moment_condition(params: ModelParams, noise: NoiseSpec, p: float) -> MomentCheck:
    if not p > 2:
        raise InvalidOrder(f"moment order must be > 2, got {p!r}")
    vartheta = min(params.mu1, params.removal - params.eta, params.eta)
    if vartheta <= 0:
        raise ThetaNonPositive(f"min(mu1, mu2+gamma-eta, eta) = {vartheta!r} <= 0")
    noise.require_h2()
    sigma_bar = max(s**2 for s in noise.sigmas)
    ell_p = _atom_sum(
        noise, lambda a: max(moment_gap(max(a.lams), p), moment_gap(min(a.lams), p))
    )
    chi1p = vartheta - (p - 1) / 2 * sigma_bar - ell_p / p
    return MomentCheck(float(p), vartheta, sigma_bar, ell_p, chi1p)


def find_p(params: ModelParams, noise: NoiseSpec, p_max: float = 4.0,
           grid_step: float = 0.01) -> tuple[float, float] | None:
    """Scan p on (2, p_max] and return the (p, chi1p) with the largest positive chi1p.

    Ties go to the smallest p.  Returns None when no grid point is positive or
    the condition cannot be evaluated at all.
    """
    if not p_max > 2 or not grid_step > 0:
        raise ValueError("need p_max > 2 and grid_step > 0")
    best = None
    n = int(math.floor((p_max - 2.0) / grid_step + 1e-9))
    for k in range(1, n + 1):
        p = round(2.0 + k * grid_step, 12)
        try:
            chi = moment_condition(params, noise, p).chi1p
        except LevySIRError:
            return None
        if chi > 0 and (best is None or chi > best[1]):
            best = (p, chi)
    return best


# --------------------------------------------------------------------------
# hypotheses and the combined report
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class HypothesisVerdict:
    name: str
    passed: bool
    quantity: float | None
    detail: str = ""


def _finite_sum(noise: NoiseSpec, fn) -> float:
    try:
        value = _atom_sum(noise, fn)
    except (ValueError, OverflowError, ZeroDivisionError):
        return math.nan
    return value


def validate_hypotheses(params: ModelParams, noise: NoiseSpec, p_max: float = 4.0,
                        grid_step: float = 0.01) -> list[HypothesisVerdict]:
    """Evaluate H1..H5 for a finite-atom measure; failures are reported, not raised."""
    out = []

    h1 = max(_finite_sum(noise, lambda a, i=i: a.lams[i] ** 2) for i in range(3))
    out.append(HypothesisVerdict("H1", math.isfinite(h1), h1, "max_i sum w*lam_i^2"))

    bad = noise.h2_violations()
    if bad:
        out.append(HypothesisVerdict("H2", False, None, "; ".join(bad)))
        for name in ("H3", "H4", "H5"):
            out.append(HypothesisVerdict(name, False, None, "requires H2"))
        return out
    h2 = max(_finite_sum(noise, lambda a, i=i: a.lams[i] - math.log1p(a.lams[i]))
             for i in range(3))
    out.append(HypothesisVerdict("H2", math.isfinite(h2), h2,
                                 "max_i sum w*(lam_i - ln(1+lam_i))"))

    h3 = max(_finite_sum(noise, lambda a, i=i: math.log1p(a.lams[i]) ** 2) for i in range(3))
    out.append(HypothesisVerdict("H3", math.isfinite(h3), h3, "max_i sum w*ln(1+lam_i)^2"))

    h4 = _finite_sum(noise, lambda a: ((1.0 + max(a.lams)) ** 2 - 1.0) ** 2)
    out.append(HypothesisVerdict("H4", math.isfinite(h4), h4,
                                 "sum w*((1+max lam)^2 - 1)^2"))

    found = find_p(params, noise, p_max, grid_step)
    if found is None:
        out.append(HypothesisVerdict("H5", False, None,
                                     f"no p in (2, {p_max}] with chi1p > 0"))
    else:
        out.append(HypothesisVerdict("H5", True, found[1], f"chi1p at p={found[0]}"))
    return out


class Regime(str, Enum):
    EXTINCTION = "ExtinctionPredicted"
    PERSISTENCE = "PersistencePredicted"
    INDETERMINATE = "Indeterminate"


def classify(theta: float | None, t_tilde: float) -> Regime:
    if theta is not None and theta < 0:
        return Regime.EXTINCTION
    if t_tilde > 1.0:
        return Regime.PERSISTENCE
    return Regime.INDETERMINATE


@dataclass(frozen=True)
class ThresholdReport:
    """Every closed-form threshold quantity plus the predicted regime.

    Extinction fields are None when they are undefined for the given noise
    (zero sigma2/sigma4 or non-positive chi2); ``extinction_note`` says why.
    """

    t_star: float
    upsilon: float | None
    pi_term: float | None
    sigma_term: float | None
    lambda_term: float | None
    chi2: float
    theta: float | None
    sbar1: float
    sbar2: float
    sbar4: float
    t_tilde: float
    c1: float
    c2: float
    c3: float
    persistence_lower_bound: float
    regime: Regime
    extinction_note: str | None = None

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["regime"] = self.regime.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ThresholdReport":
        d = dict(d)
        d["regime"] = Regime(d["regime"])
        return cls(**d)


def threshold_report(params: ModelParams, noise: NoiseSpec) -> ThresholdReport:
    pers = persistence_report(params, noise)
    note = None
    try:
        ext = extinction_report(params, noise)
        ext_fields = dict(upsilon=ext.upsilon, pi_term=ext.pi_term,
                          sigma_term=ext.sigma_term, lambda_term=ext.lambda_term,
                          theta=ext.theta)
    except (DegenerateDiffusion, ChiTwoNonPositive) as exc:
        note = f"{type(exc).__name__}: {exc}"
        ext_fields = dict(upsilon=None, pi_term=None, sigma_term=None,
                          lambda_term=None, theta=None)
    return ThresholdReport(
        t_star=deterministic_threshold(params),
        chi2=chi2_value(params, noise),
        sbar1=pers.sbar1, sbar2=pers.sbar2, sbar4=pers.sbar4,
        t_tilde=pers.t_tilde, c1=pers.c1, c2=pers.c2, c3=pers.c3,
        persistence_lower_bound=pers.persistence_lower_bound,
        regime=classify(ext_fields["theta"], pers.t_tilde),
        extinction_note=note,
        **ext_fields,
    )
