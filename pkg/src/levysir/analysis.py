"""Time averages, Lyapunov slopes, regime verdicts and Monte Carlo ensembles."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from .errors import ChiTwoNonPositive, EmptyWindow, NonFiniteState
from .integrator import PsiPath, SimConfig, Trajectory, simulate, simulate_psi
from .model import ModelParams, NoiseSpec, chi2_value, deterministic_threshold

# below this the windowed mean of I is treated as zero
PERSISTENCE_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class TimeAverage:
    times: np.ndarray      # right end of each running window
    running: np.ndarray
    value: float


def _window_mask(times: np.ndarray, start: float, stop: float) -> np.ndarray:
    # small slack so grid points that should coincide with the edges are kept
    eps = 1e-9 * max(1.0, abs(stop))
    return (times >= start - eps) & (times <= stop + eps)


def time_average(traj: Trajectory | PsiPath, component: str = "I", power: int = 1,
                 burn_in: float = 0.0) -> TimeAverage:
    """Trapezoidal time average of ``component**power`` over [burn_in*T, T]."""
    if not 0.0 <= burn_in < 1.0:
        raise ValueError(f"burn_in must lie in [0, 1), got {burn_in!r}")
    if power not in (1, 2):
        raise ValueError("power must be 1 or 2")
    times = np.asarray(traj.times)
    values = np.asarray(traj.component(component), dtype=float) ** power
    t_end = float(times[-1])
    mask = _window_mask(times, burn_in * t_end, t_end)
    t, v = times[mask], values[mask]
    if t.size < 2:
        raise EmptyWindow(f"averaging window holds {t.size} point(s)")
    integral = cumulative_trapezoid(v, t)
    running = integral / (t[1:] - t[0])
    return TimeAverage(t[1:], running, float(running[-1]))


def window_mean(times, values, start: float, stop: float) -> float:
    times = np.asarray(times)
    mask = _window_mask(times, start, stop)
    t, v = times[mask], np.asarray(values, dtype=float)[mask]
    if t.size < 2:
        raise EmptyWindow(f"window [{start}, {stop}] holds {t.size} point(s)")
    return float(trapezoid(v, t) / (t[-1] - t[0]))


def infection_weights(params: ModelParams) -> tuple[float, float]:
    """Weights of I and D in the infection functional whose log-growth is bounded."""
    return 1.0 / (params.mu2 + params.gamma), math.sqrt(deterministic_threshold(params)) / params.eta


def lyapunov_slope(traj: Trajectory, params: ModelParams, tail_fraction: float = 0.5,
                   weights: tuple[float, float] | None = None) -> float:
    """Least-squares slope of ln(w1*I + w2*D) against t over the final tail.

    Returns ``-inf`` when the functional reaches zero anywhere in the tail.
    """
    if not 0.0 < tail_fraction < 1.0:
        raise ValueError(f"tail_fraction must lie in (0, 1), got {tail_fraction!r}")
    w1, w2 = weights if weights is not None else infection_weights(params)
    times = np.asarray(traj.times)
    t_end = float(times[-1])
    mask = _window_mask(times, (1.0 - tail_fraction) * t_end, t_end)
    t = times[mask]
    if t.size < 2:
        raise EmptyWindow(f"regression window holds {t.size} point(s)")
    m = w1 * traj.I[mask] + w2 * traj.D[mask]
    if np.any(m <= 0):
        return -math.inf
    slope, _ = np.polyfit(t, np.log(m), 1)
    return float(slope)


@dataclass(frozen=True)
class ExtinctionVerdict:
    extinct: bool
    final_I: float
    slope: float


def extinction_verdict(traj: Trajectory, params: ModelParams, epsilon: float = 1e-3,
                       tail_fraction: float = 0.5) -> ExtinctionVerdict:
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    slope = lyapunov_slope(traj, params, tail_fraction)
    final_i = float(traj.I[-1])
    return ExtinctionVerdict(bool(final_i < epsilon and slope < 0), final_i, slope)


@dataclass(frozen=True)
class PersistenceVerdict:
    persistent: bool
    tail_mean_I: float
    threshold: float
    tail_mean_S: float
    tail_mean_D: float


def default_window(horizon: float) -> tuple[float, float]:
    return (0.5 * horizon, horizon)


def persistence_verdict(traj: Trajectory, window: tuple[float, float] | None = None,
                        bound: float = 0.0) -> PersistenceVerdict:
    """Persistent iff the windowed mean of I exceeds max(bound, 1e-6).

    S and D window means are reported for context only.
    """
    start, stop = window if window is not None else default_window(traj.horizon)
    if not (0.0 <= start < stop <= traj.horizon + 1e-9 * max(1.0, traj.horizon)):
        raise EmptyWindow(f"window [{start}, {stop}] is not inside [0, {traj.horizon}]")
    means = [window_mean(traj.times, traj.states[:, k], start, stop) for k in range(3)]
    threshold = max(bound, PERSISTENCE_FLOOR)
    return PersistenceVerdict(means[1] > threshold, means[1], threshold, means[0], means[2])


# --------------------------------------------------------------------------
# ensembles
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RunRecord:
    seed: int
    final_state: tuple[float, float, float]
    final_psi: float | None
    tail_mean_I: float
    slope: float
    extinct: bool
    persistent: bool
    clamped_steps: int


@dataclass(frozen=True)
class Aggregate:
    mean: float
    std: float
    median: float
    q05: float
    q95: float

    @classmethod
    def of(cls, values: Sequence[float]) -> "Aggregate":
        x = np.asarray(values, dtype=float)
        with np.errstate(invalid="ignore"):
            return cls(float(np.mean(x)), float(np.std(x)), float(np.median(x)),
                       float(np.quantile(x, 0.05)), float(np.quantile(x, 0.95)))


AGGREGATED = ("final_S", "final_I", "final_D", "tail_mean_I", "slope")


@dataclass(frozen=True)
class EnsembleSummary:
    n_runs: int
    runs: tuple[RunRecord, ...]
    aggregates: dict
    fraction_extinct: float
    fraction_persistent: float

    @classmethod
    def from_runs(cls, runs: Sequence[RunRecord]) -> "EnsembleSummary":
        runs = tuple(sorted(runs, key=lambda r: r.seed))
        columns = {
            "final_S": [r.final_state[0] for r in runs],
            "final_I": [r.final_state[1] for r in runs],
            "final_D": [r.final_state[2] for r in runs],
            "tail_mean_I": [r.tail_mean_I for r in runs],
            "slope": [r.slope for r in runs],
        }
        n = len(runs)
        return cls(
            n_runs=n,
            runs=runs,
            aggregates={k: Aggregate.of(v) for k, v in columns.items()},
            fraction_extinct=sum(r.extinct for r in runs) / n,
            fraction_persistent=sum(r.persistent for r in runs) / n,
        )

    def to_dict(self) -> dict:
        return {
            "n_runs": self.n_runs,
            "fraction_extinct": self.fraction_extinct,
            "fraction_persistent": self.fraction_persistent,
            "aggregates": {k: asdict(v) for k, v in self.aggregates.items()},
            "runs": [asdict(r) for r in self.runs],
        }


@dataclass(frozen=True)
class _RunJob:
    initial: tuple[float, float, float]
    params: ModelParams
    noise: NoiseSpec
    config: SimConfig
    epsilon: float
    tail_fraction: float
    window: tuple[float, float] | None
    bound: float
    couple_psi: bool


def _run_one(job: _RunJob) -> RunRecord:
    try:
        traj = simulate(job.initial, job.params, job.noise, job.config, couple_psi=job.couple_psi)
    except NonFiniteState as exc:
        exc.seed = job.config.seed
        raise
    ext = extinction_verdict(traj, job.params, job.epsilon, job.tail_fraction)
    pers = persistence_verdict(traj, job.window, job.bound)
    return RunRecord(
        seed=job.config.seed,
        final_state=tuple(float(x) for x in traj.states[-1]),
        final_psi=float(traj.psi[-1]) if traj.psi is not None else None,
        tail_mean_I=pers.tail_mean_I,
        slope=ext.slope,
        extinct=ext.extinct,
        persistent=pers.persistent,
        clamped_steps=traj.clamped_steps,
    )


def ensemble(params: ModelParams, noise: NoiseSpec, config: SimConfig, n_seeds: int,
             initial=(0.6, 0.3, 0.05), epsilon: float = 1e-3, tail_fraction: float = 0.5,
             window: tuple[float, float] | None = None, bound: float = 0.0,
             couple_psi: bool = False, workers: int = 1) -> EnsembleSummary:
    """Run ``n_seeds`` simulations with seeds config.seed .. config.seed+n-1.

    ``workers > 1`` fans the runs out to a process pool; the summary does not
    depend on completion order.
    """
    if n_seeds < 1:
        raise ValueError("n_seeds must be >= 1")
    jobs = [
        _RunJob(tuple(initial), params, noise,
                SimConfig(config.dt, config.horizon, config.seed + i,
                          config.record_stride, config.positivity_floor),
                epsilon, tail_fraction, window, bound, couple_psi)
        for i in range(n_seeds)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_one, jobs))
    else:
        runs = [_run_one(j) for j in jobs]
    return EnsembleSummary.from_runs(runs)


# --------------------------------------------------------------------------
# auxiliary-process time averages
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LemmaVerdict:
    n_seeds: int
    mean_estimate: float
    square_estimate: float
    mean_theory: float
    square_theory: float
    mean_rel_error: float
    square_rel_error: float
    mean_tolerance: float
    square_tolerance: float
    mean_pass: bool
    square_pass: bool

    @property
    def passed(self) -> bool:
        return self.mean_pass and self.square_pass

    def to_dict(self) -> dict:
        return asdict(self)


def verify_lemma2(params: ModelParams, noise: NoiseSpec, config: SimConfig, n_seeds: int,
                  tolerance: float | tuple[float, float] = (0.05, 0.10),
                  psi0: float | None = None, burn_in: float = 0.0) -> LemmaVerdict:
    """Compare ensemble time averages of psi and psi^2 with A/mu1 and 2A^2/(mu1*chi2)."""
    chi2 = chi2_value(params, noise)
    if chi2 <= 0:
        raise ChiTwoNonPositive(f"chi2 = {chi2!r} <= 0")
    tol_mean, tol_sq = (tolerance, tolerance) if np.isscalar(tolerance) else tolerance
    psi0 = params.A / params.mu1 if psi0 is None else psi0
    firsts, seconds = [], []
    for i in range(n_seeds):
        cfg = SimConfig(config.dt, config.horizon, config.seed + i,
                        config.record_stride, config.positivity_floor)
        path = simulate_psi(psi0, params, noise, cfg)
        firsts.append(time_average(path, "psi", 1, burn_in).value)
        seconds.append(time_average(path, "psi", 2, burn_in).value)
    mean_est = float(np.mean(firsts))
    sq_est = float(np.mean(seconds))
    mean_th = params.A / params.mu1
    sq_th = 2.0 * params.A**2 / (params.mu1 * chi2)
    mean_err = abs(mean_est - mean_th) / mean_th
    sq_err = abs(sq_est - sq_th) / sq_th
    return LemmaVerdict(n_seeds, mean_est, sq_est, mean_th, sq_th, mean_err, sq_err,
                        float(tol_mean), float(tol_sq), mean_err <= tol_mean, sq_err <= tol_sq)
