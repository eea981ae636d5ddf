"""Fixed-step integrators for the (S, I, D) jump-diffusion and its relatives.

The stochastic scheme is explicit Euler-Maruyama with multiplicative Gaussian
increments and exact compound-Poisson sampling of the jumps on each step.
All jumps that land in a step are applied at the step end using the pre-step
state, and the compensator ``-X * dt * sum(w * lam)`` is folded into the
update.  Negative excursions are projected back onto ``positivity_floor``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteState, ValidationError
from .model import ModelParams, NoiseSpec, drift_reduced

# steps per block of pre-drawn random numbers
_CHUNK = 1 << 14


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.01
    horizon: float = 1000.0
    seed: int = 0
    record_stride: int = 1
    positivity_floor: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValidationError(f"dt must be > 0, got {self.dt!r}")
        if not (math.isfinite(self.horizon) and self.horizon >= self.dt):
            raise ValidationError(f"horizon must be >= dt, got {self.horizon!r}")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValidationError(f"record_stride must be an integer >= 1, got {self.record_stride!r}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValidationError(f"seed must be a non-negative integer, got {self.seed!r}")
        object.__setattr__(self, "record_stride", int(self.record_stride))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.horizon / self.dt - 1e-9))


@dataclass(frozen=True)
class RngStreams:
    """Independent generators spawned from one root seed."""

    seed: int
    gauss_s: np.random.Generator
    gauss_i: np.random.Generator
    gauss_d: np.random.Generator
    gauss_psi: np.random.Generator
    jump_clock: np.random.Generator
    jump_marks: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "RngStreams":
        children = np.random.SeedSequence(int(seed)).spawn(6)
        return cls(int(seed), *(np.random.default_rng(c) for c in children))


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray            # (n, 3): S, I, D
    psi: np.ndarray | None = None
    jump_events: list = field(default_factory=list)   # (time, atom index)
    clamped_steps: int = 0
    first_clamp_time: float | None = None

    def __post_init__(self):
        for arr in (self.times, self.states, self.psi):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def S(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def I(self) -> np.ndarray:  # noqa: E743
        return self.states[:, 1]

    @property
    def D(self) -> np.ndarray:
        return self.states[:, 2]

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def component(self, name: str) -> np.ndarray:
        if name == "psi":
            if self.psi is None:
                raise KeyError("trajectory has no psi series")
            return self.psi
        return self.states[:, "SID".index(name)]


@dataclass(frozen=True, eq=False)
class PsiPath:
    """Standalone path of the auxiliary one-dimensional process."""

    times: np.ndarray
    values: np.ndarray
    clamped_steps: int = 0

    def component(self, name: str = "psi") -> np.ndarray:
        if name != "psi":
            raise KeyError(name)
        return self.values


def em_step(state, params: ModelParams, noise: NoiseSpec, dt: float, gaussians,
            jumps=(), positivity_floor: float = 0.0) -> tuple[float, float, float]:
    """Advance (S, I, D) by one Euler-Maruyama step.

    ``gaussians`` are the standard normal draws for S, I, D and ``jumps`` the
    indices of the atoms that fired during the step.  ``dt = 0`` is accepted
    and applies only the jumps.
    """
    if dt < 0:
        raise ValueError("dt must be >= 0")
    sq = math.sqrt(dt)
    comp = noise.compensator()
    out = []
    for idx, (x, f, sig, z) in enumerate(
        zip(state, drift_reduced(state, params), noise.sigmas, gaussians)
    ):
        jsum = 0.0
        for j in jumps:
            jsum += noise.atoms[j].lams[idx]
        x = float(x)
        nxt = x + f * dt + sig * x * sq * z + x * jsum - x * dt * comp[idx]
        if not math.isfinite(nxt):
            raise NonFiniteState(f"non-finite {'SID'[idx]} after step")
        out.append(max(nxt, positivity_floor))
    return tuple(out)


class _JumpSampler:
    """Draws per-step jump counts and atom marks in fixed-size blocks."""

    def __init__(self, noise: NoiseSpec, dt: float, streams: RngStreams):
        self.rate = noise.total_rate
        self.mean = self.rate * dt
        self.n_atoms = len(noise.atoms)
        self.probs = noise.weights() / self.rate if self.rate > 0 else None
        self.clock = streams.jump_clock
        self.marks = streams.jump_marks

    def block(self, n: int) -> tuple[list[int], list[int]]:
        if self.rate <= 0:
            return [0] * n, []
        counts = self.clock.poisson(self.mean, n)
        total = int(counts.sum())
        if self.n_atoms == 1:
            marks = [0] * total
        else:
            marks = self.marks.choice(self.n_atoms, size=total, p=self.probs).tolist()
        return counts.tolist(), marks


def _normals(gen: np.random.Generator, sigma: float, n: int) -> list[float]:
    # zero-intensity channels consume no randomness
    return gen.standard_normal(n).tolist() if sigma != 0.0 else [0.0] * n


def simulate(initial, params: ModelParams, noise: NoiseSpec, config: SimConfig,
             couple_psi: bool = False) -> Trajectory:
    """Integrate the (S, I, D) jump-diffusion from ``initial`` to the horizon.

    With ``couple_psi`` the auxiliary process is advanced alongside S using the
    same Gaussian draw for S and the same jump events, starting at S(0).
    """
    S, I, D = (float(x) for x in initial)
    if not (S > 0 and I > 0 and D > 0):
        raise ValidationError(f"initial state must be componentwise > 0, got {initial!r}")
    noise.require_h2()

    p = params
    dt = config.dt
    sq = math.sqrt(dt)
    floor = config.positivity_floor
    stride = config.record_stride
    n_steps = config.n_steps
    s1, s2, s4 = noise.sigmas
    c1, c2, c4 = noise.compensator()
    lam = [a.lams for a in noise.atoms]
    A, mu1, beta, removal, eta = p.A, p.mu1, p.beta, p.mu2 + p.gamma, p.eta

    streams = RngStreams.from_seed(config.seed)
    sampler = _JumpSampler(noise, dt, streams)

    n_rec = n_steps // stride + 1 + (1 if n_steps % stride else 0)
    times = np.empty(n_rec)
    states = np.empty((n_rec, 3))
    psi_rec = np.empty(n_rec) if couple_psi else None
    psi = S
    times[0] = 0.0
    states[0] = (S, I, D)
    if couple_psi:
        psi_rec[0] = psi
    rec = 1
    events = []
    clamped = 0
    first_clamp = None

    step = 0
    while step < n_steps:
        n = min(_CHUNK, n_steps - step)
        zs = _normals(streams.gauss_s, s1, n)
        zi = _normals(streams.gauss_i, s2, n)
        zd = _normals(streams.gauss_d, s4, n)
        counts, marks = sampler.block(n)
        mpos = 0
        for k in range(n):
            step += 1
            j1 = j2 = j4 = 0.0
            cnt = counts[k]
            if cnt:
                t_evt = step * dt
                for m in marks[mpos:mpos + cnt]:
                    l1, l2, l4 = lam[m]
                    j1 += l1
                    j2 += l2
                    j4 += l4
                    events.append((t_evt, m))
                mpos += cnt
            z1 = zs[k]
            fS = A - mu1 * S - beta * S * D
            fI = beta * S * D - removal * I
            fD = eta * (I - D)
            nS = S + fS * dt + s1 * S * sq * z1 + S * j1 - S * dt * c1
            nI = I + fI * dt + s2 * I * sq * zi[k] + I * j2 - I * dt * c2
            nD = D + fD * dt + s4 * D * sq * zd[k] + D * j4 - D * dt * c4
            if not (math.isfinite(nS) and math.isfinite(nI) and math.isfinite(nD)):
                raise NonFiniteState(f"non-finite state at t={step * dt}", time=step * dt)
            hit = False
            if nS < floor:
                nS, hit = floor, True
            if nI < floor:
                nI, hit = floor, True
            if nD < floor:
                nD, hit = floor, True
            if couple_psi:
                fP = A - mu1 * psi
                psi = psi + fP * dt + s1 * psi * sq * z1 + psi * j1 - psi * dt * c1
                if not math.isfinite(psi):
                    raise NonFiniteState(f"non-finite psi at t={step * dt}", time=step * dt)
                if psi < floor:
                    psi, hit = floor, True
            if hit:
                clamped += 1
                if first_clamp is None:
                    first_clamp = step * dt
            S, I, D = nS, nI, nD
            if step % stride == 0 or step == n_steps:
                times[rec] = step * dt
                states[rec] = (S, I, D)
                if couple_psi:
                    psi_rec[rec] = psi
                rec += 1

    return Trajectory(times, states, psi_rec, events, clamped, first_clamp)


def simulate_psi(psi0: float, params: ModelParams, noise: NoiseSpec,
                 config: SimConfig) -> PsiPath:
    """Integrate the auxiliary process alone on its own Gaussian stream.

    Jump arrivals come from the same clock and mark streams as :func:`simulate`,
    so for a given seed both see the same jump events.
    """
    psi = float(psi0)
    if not psi > 0:
        raise ValidationError(f"psi0 must be > 0, got {psi0!r}")
    noise.require_h2()
    A, mu1 = params.A, params.mu1
    dt = config.dt
    sq = math.sqrt(dt)
    floor = config.positivity_floor
    stride = config.record_stride
    n_steps = config.n_steps
    s1 = noise.sigma1
    c1 = noise.compensator()[0]
    lam1 = [a.lam1 for a in noise.atoms]

    streams = RngStreams.from_seed(config.seed)
    sampler = _JumpSampler(noise, dt, streams)
    n_rec = n_steps // stride + 1 + (1 if n_steps % stride else 0)
    times = np.empty(n_rec)
    values = np.empty(n_rec)
    times[0], values[0] = 0.0, psi
    rec = 1
    clamped = 0
    step = 0
    while step < n_steps:
        n = min(_CHUNK, n_steps - step)
        zs = _normals(streams.gauss_psi, s1, n)
        counts, marks = sampler.block(n)
        mpos = 0
        for k in range(n):
            step += 1
            j1 = 0.0
            cnt = counts[k]
            if cnt:
                for m in marks[mpos:mpos + cnt]:
                    j1 += lam1[m]
                mpos += cnt
            psi = psi + (A - mu1 * psi) * dt + s1 * psi * sq * zs[k] + psi * j1 - psi * dt * c1
            if not math.isfinite(psi):
                raise NonFiniteState(f"non-finite psi at t={step * dt}", time=step * dt)
            if psi < floor:
                psi = floor
                clamped += 1
            if step % stride == 0 or step == n_steps:
                times[rec] = step * dt
                values[rec] = psi
                rec += 1
    times.setflags(write=False)
    values.setflags(write=False)
    return PsiPath(times, values, clamped)


def _rk4_rhs(y: np.ndarray, p: ModelParams) -> np.ndarray:
    return np.array(drift_reduced(y, p))


def simulate_deterministic(initial, params: ModelParams, config: SimConfig) -> Trajectory:
    """Classical fixed-step RK4 on the noise-free reduced system."""
    y = np.array([float(x) for x in initial])
    if not np.all(y > 0):
        raise ValidationError(f"initial state must be componentwise > 0, got {initial!r}")
    dt = config.dt
    stride = config.record_stride
    n_steps = config.n_steps
    n_rec = n_steps // stride + 1 + (1 if n_steps % stride else 0)
    times = np.empty(n_rec)
    states = np.empty((n_rec, 3))
    times[0], states[0] = 0.0, y
    rec = 1
    for step in range(1, n_steps + 1):
        k1 = _rk4_rhs(y, params)
        k2 = _rk4_rhs(y + 0.5 * dt * k1, params)
        k3 = _rk4_rhs(y + 0.5 * dt * k2, params)
        k4 = _rk4_rhs(y + dt * k3, params)
        y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise NonFiniteState(f"non-finite state at t={step * dt}", time=step * dt)
        if step % stride == 0 or step == n_steps:
            times[rec] = step * dt
            states[rec] = y
            rec += 1
    return Trajectory(times, states)


def compensated_jump_increments(noise: NoiseSpec, dt: float, n_steps: int,
                                seed: int = 0) -> np.ndarray:
    """Per-step compensated jump increments with the state frozen at 1.

    Row k holds ``sum(lam over jumps in step k) - dt * sum(w * lam)`` for S, I, D;
    the rows are martingale increments with mean zero.
    """
    streams = RngStreams.from_seed(seed)
    sampler = _JumpSampler(noise, dt, streams)
    counts, marks = sampler.block(n_steps)
    lam = noise.lam_matrix()
    out = np.zeros((n_steps, 3))
    if marks:
        step_of_mark = np.repeat(np.arange(n_steps), counts)
        np.add.at(out, step_of_mark, lam[marks])
    return out - dt * np.array(noise.compensator())
