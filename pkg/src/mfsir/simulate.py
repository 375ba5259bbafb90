"""N-particle jump-diffusion simulator.

Positions follow Euler-Maruyama with the pairwise mean-field drift; states
jump S -> I at the empirical infection rate and I -> R at rate gamma.  Two
jump discretizations:

  split_step  per step, each transition fires with probability
              1 - exp(-rate * dt) using start-of-step rates and positions;
              O(N * N_I) per step, first-order weak error.
  thinning    candidate events from a homogeneous Poisson stream of rate
              beta + gamma per individual, accepted with probability
              rate / (beta + gamma); rates are evaluated at the candidate
              time on the linearly interpolated Euler path with left-limit
              states, so jump times are exact given the path.

Pairwise sums run through the compiled backend in a fixed order; a single
replication is sequential and deterministic given its generator.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backends
from .model import EpidemicState, ModelConfig, ParticleEnsemble, StateMeasure, sample_initial

__all__ = [
    "SimScheme",
    "EventLog",
    "Trajectory",
    "NumericalBlowupError",
    "infection_rate",
    "step",
    "run",
    "empirical_measure",
    "FluctuationRecorder",
]


class NumericalBlowupError(RuntimeError):
    """A position left the representable range; bounded coefficients make
    this a bug signal, not a modeling outcome."""


@dataclass(frozen=True)
class SimScheme:
    """Time discretization: step size, jump mode and snapshot grid."""

    dt: float
    snapshot_times: tuple
    mode: str = "split_step"

    def __post_init__(self):
        if self.mode not in ("split_step", "thinning"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        times = tuple(float(t) for t in self.snapshot_times)
        if not times or any(t < 0 for t in times) or list(times) != sorted(times):
            raise ValueError("snapshot times must be sorted and nonnegative")
        object.__setattr__(self, "snapshot_times", times)
        positive = [t for t in times if t > 0]
        spacing = min(
            [positive[0]] + list(np.diff(positive)) if positive else [np.inf]
        )
        if self.dt > spacing + 1e-12:
            raise ValueError("dt must not exceed the smallest snapshot spacing")
        for t in times:
            k = round(t / self.dt)
            if abs(k * self.dt - t) > 1e-9 * max(1.0, t):
                raise ValueError(f"snapshot time {t} is not on the step grid")

    @property
    def t_end(self) -> float:
        return self.snapshot_times[-1]

    def n_steps(self) -> int:
        return round(self.t_end / self.dt)


class EventLog:
    """Per-step randomness and jump records of one replication.

    Brownian increments and start-of-step snapshots are kept only when
    ``store_brownian`` is on (fluctuation analysis needs them); jump records
    and compensator accumulators are always kept.
    """

    def __init__(self, n: int, d: int, store_brownian: bool = False):
        self.n = n
        self.d = d
        self.store_brownian = store_brownian
        self.gamma = 0.0      # stamped by run()/step()
        self.diffusion = None
        self.step_times: list[float] = []
        self.positions: list[np.ndarray] = []
        self.states: list[np.ndarray] = []
        self.brownian: list[np.ndarray] = []
        self.rates: list[np.ndarray] = []
        self.jump_times: list[float] = []
        self.jump_individuals: list[int] = []
        self.jump_from: list[int] = []
        self.jump_to: list[int] = []
        self.jump_rates: list[float] = []
        self.compensators = np.zeros(n)

    def record_step(self, t, positions, states, brownian, rates):
        self.step_times.append(t)
        if self.store_brownian:
            self.positions.append(positions.copy())
            self.states.append(states.copy())
            self.brownian.append(brownian.copy())
            self.rates.append(rates.copy())

    def record_jump(self, t, i, e_from, e_to, rate):
        # only the two epidemic channels exist
        if (e_from, e_to) not in ((0, 1), (1, 2)):
            raise ValueError("jumps must be S->I or I->R")
        self.jump_times.append(float(t))
        self.jump_individuals.append(int(i))
        self.jump_from.append(int(e_from))
        self.jump_to.append(int(e_to))
        self.jump_rates.append(float(rate))


@dataclass
class Trajectory:
    """Snapshots plus the event log of one replication."""

    snapshots: list
    log: EventLog
    config: ModelConfig
    scheme: SimScheme
    seed_label: str = ""

    def snapshot_at(self, t: float) -> ParticleEnsemble:
        for ens in self.snapshots:
            if abs(ens.time - t) <= 1e-9 * max(1.0, t):
                return ens
        raise KeyError(f"no snapshot at t={t}")


def empirical_measure(ensemble: ParticleEnsemble) -> StateMeasure:
    """Per-state point clouds with weight 1/N each; masses sum to 1."""
    return StateMeasure.from_ensemble(ensemble)


def infection_rate(i: int, ensemble: ParticleEnsemble, kernel) -> float:
    """(1/N) sum_{j != i} K(x_i, x_j) 1{e_j = I}; zero unless i susceptible."""
    n = ensemble.n
    if not 0 <= i < n:
        raise IndexError(f"individual {i} out of range")
    if ensemble.states[i] != 0:
        return 0.0
    loads = _infection_loads(ensemble.positions, ensemble.states, kernel)
    return float(loads[i]) / n


def _infection_loads(positions, states, kernel) -> np.ndarray:
    """Unnormalized infected-neighbour kernel sums for susceptible rows."""
    n = positions.shape[0]
    out = np.zeros(n)
    if kernel.beta == 0.0:
        return out
    if kernel.family == "constant":
        n_inf = int(np.sum(states == 1))
        out[states == 0] = kernel.beta * n_inf
        return out
    if positions.shape[1] == 1:
        backends.infection_load_1d(
            positions[:, 0], states, kernel.code, kernel.beta, kernel.scale, out
        )
    else:
        backends.infection_load_nd(
            positions, states, kernel.code, kernel.beta, kernel.scale, out
        )
    return out


def _drift_sums(positions, states, drift) -> np.ndarray:
    n, d = positions.shape
    out = np.zeros((n, d))
    if drift.family == "zero":
        return out
    w = drift.weight_matrix()
    if d == 1:
        buf = np.zeros(n)
        backends.drift_sum_1d(positions[:, 0], states, drift.code, drift.a, drift.ell, w, buf)
        out[:, 0] = buf
    else:
        backends.drift_sum_nd(positions, states, drift.code, drift.a, drift.ell, w, out)
    return out


def _sigma_values(config: ModelConfig, positions, states):
    """Per-individual isotropic sigma (N,), or per-state matrices."""
    diff = config.diffusion
    if diff.is_scalar():
        out = np.empty(positions.shape[0])
        for e in range(3):
            mask = states == e
            if np.any(mask):
                out[mask] = diff.scalar_at(positions[mask], e)
        return out, None
    mats = [diff.sigma_matrix(e, config.d) for e in range(3)]
    return None, mats


def step(ensemble: ParticleEnsemble, config: ModelConfig, scheme: SimScheme,
         rng: np.random.Generator, log: EventLog | None = None,
         recorder: "FluctuationRecorder | None" = None) -> ParticleEnsemble:
    """Advance one time step; returns the new ensemble, appends log entries."""
    n, d = ensemble.n, ensemble.d
    dt = scheme.dt
    x = ensemble.positions
    states = ensemble.states
    t = ensemble.time

    if log is not None:
        log.gamma = config.gamma
        log.diffusion = config.diffusion

    loads = _infection_loads(x, states, config.kernel)
    rates = loads / n

    drift = _drift_sums(x, states, config.drift) / n
    normals = rng.standard_normal((n, d))
    brownian = np.sqrt(dt) * normals
    sigma_scalar, sigma_mats = _sigma_values(config, x, states)
    if sigma_scalar is not None:
        noise = sigma_scalar[:, None] * brownian
    else:
        noise = np.empty_like(brownian)
        for e in range(3):
            mask = states == e
            if np.any(mask):
                noise[mask] = brownian[mask] @ sigma_mats[e].T
    x_new = x + drift * dt + noise

    if not np.all(np.isfinite(x_new)):
        bad = int(np.flatnonzero(~np.isfinite(x_new).all(axis=1))[0])
        step_no = round(t / dt)
        raise NumericalBlowupError(
            f"non-finite position for individual {bad} at step {step_no} (t={t:g})"
        )

    if log is not None:
        log.record_step(t, x, states, brownian, rates)
    if recorder is not None:
        recorder.on_step(t, x, states, rates, brownian, config)

    new_states = states.copy()
    if scheme.mode == "split_step":
        u_inf = rng.random(n)
        u_rec = rng.random(n)
        sus = states == 0
        inf = states == 1
        p_inf = -np.expm1(-rates * dt)
        new_inf = sus & (u_inf < p_inf)
        p_rec = -np.expm1(-config.gamma * dt)
        new_rec = inf & (u_rec < p_rec)
        new_states[new_inf] = 1
        new_states[new_rec] = 2
        if log is not None:
            log.compensators[sus] += rates[sus] * dt
            log.compensators[inf] += config.gamma * dt
            for i in np.flatnonzero(new_inf):
                log.record_jump(t + dt, i, 0, 1, rates[i])
            for i in np.flatnonzero(new_rec):
                log.record_jump(t + dt, i, 1, 2, config.gamma)
        if recorder is not None:
            recorder.on_jumps(x, np.flatnonzero(new_inf), np.flatnonzero(new_rec))
    else:
        _thinning_jumps(t, dt, x, x_new, states, new_states, config, rng, log, recorder)

    return ParticleEnsemble(x_new, new_states, t + dt)


def _thinning_jumps(t, dt, x_old, x_new, states, new_states, config, rng, log, recorder):
    """Exact jump times given the Euler path: dominate by beta + gamma,
    interpolate positions linearly, accept with rate/bound, processing
    candidates in global time order with left-limit states."""
    n = x_old.shape[0]
    lam_bar = config.kernel.beta + config.gamma
    if log is not None:
        # continuous compensator, start-of-step rates (diagnostic accuracy O(dt))
        loads = _infection_loads(x_old, states, config.kernel)
        log.compensators[states == 0] += loads[states == 0] / n * dt
        log.compensators[states == 1] += config.gamma * dt
    if lam_bar <= 0:
        return
    counts = rng.poisson(lam_bar * dt, n)
    total = int(counts.sum())
    if total == 0:
        return
    owners = np.repeat(np.arange(n), counts)
    offsets = rng.random(total) * dt
    accepts = rng.random(total)
    order = np.lexsort((owners, offsets))
    for k in order:
        i = owners[k]
        e_i = new_states[i]
        if e_i == 2:
            continue
        alpha = offsets[k] / dt
        if e_i == 1:
            if accepts[k] < config.gamma / lam_bar:
                new_states[i] = 2
                if log is not None:
                    log.record_jump(t + offsets[k], i, 1, 2, config.gamma)
                if recorder is not None:
                    xi = (1 - alpha) * x_old[i] + alpha * x_new[i]
                    recorder.on_thinning_jump(xi, 1, 2)
            continue
        # susceptible: infection rate from interpolated positions, left-limit states
        x_interp = (1 - alpha) * x_old + alpha * x_new
        infected = new_states == 1
        if not np.any(infected):
            continue
        load = 0.0
        pts = x_interp[infected]
        w = np.ones(pts.shape[0])
        buf = np.zeros(1)
        if config.kernel.family == "constant":
            load = config.kernel.beta * pts.shape[0]
        elif x_old.shape[1] == 1:
            backends.kernel_field_1d(x_interp[i], pts[:, 0], w, config.kernel.code,
                                     config.kernel.beta, config.kernel.scale, buf)
            load = buf[0]
        else:
            diffs = pts - x_interp[i]
            r2 = np.sum(diffs * diffs, axis=1)
            if config.kernel.family == "gaussian":
                load = config.kernel.beta * float(
                    np.exp(-0.5 * r2 / config.kernel.scale**2).sum()
                )
            else:
                u2 = r2 / config.kernel.scale**2
                inside = u2 < 1
                load = config.kernel.beta * float(
                    np.exp(1.0 - 1.0 / (1.0 - u2[inside])).sum()
                )
        rate = load / n
        if accepts[k] < rate / lam_bar:
            new_states[i] = 1
            if log is not None:
                log.record_jump(t + offsets[k], i, 0, 1, rate)
            if recorder is not None:
                recorder.on_thinning_jump(x_interp[i], 0, 1)


def run(config: ModelConfig, scheme: SimScheme, n: int, rng: np.random.Generator,
        *, log_brownian: bool = False, recorder: "FluctuationRecorder | None" = None,
        initial: ParticleEnsemble | None = None, keep_log: bool = True) -> Trajectory:
    """Sample the initial ensemble and iterate to the last snapshot time."""
    ens = initial if initial is not None else sample_initial(config.initial, n, rng)
    if ens.n != n:
        raise ValueError("initial ensemble size does not match n")
    log = EventLog(n, config.d, store_brownian=log_brownian) if keep_log else None
    if recorder is not None:
        recorder.begin(ens, scheme)
    snapshots = []
    snap_iter = iter(scheme.snapshot_times)
    next_snap = next(snap_iter)
    eps = 1e-9

    def maybe_snapshot(e):
        nonlocal next_snap
        while next_snap is not None and e.time >= next_snap - eps:
            snapshots.append(e.copy())
            if recorder is not None:
                recorder.on_checkpoint(e)
            next_snap = next(snap_iter, None)

    maybe_snapshot(ens)
    n_steps = scheme.n_steps()
    for _ in range(n_steps):
        ens = step(ens, config, scheme, rng, log=log, recorder=recorder)
        maybe_snapshot(ens)
    return Trajectory(snapshots, log, config, scheme)


class FluctuationRecorder:
    """Streaming accumulator for martingales, their quadratic variations and
    empirical pairings along one replication (d = 1).

    Per step it consumes start-of-step data and accumulates, for every
    (state channel, test function):

      Brownian term    sum_{i in e} phi'(x_i) sigma_e(x_i) dB_i
      jump terms       +-phi(x) at each transition
      compensator      the running integral of the jump functional rate
      QV formula       left-endpoint sums of the three closed-form integrands

    Checkpoints store the running martingale (scaled by 1/sqrt(N)), the QV
    values and the raw pairings <mu^{e,N}_t, phi_k>.
    """

    def __init__(self, bank, n: int):
        self.bank = list(bank)
        self.n = n
        self.sqrt_n = np.sqrt(n)
        b = len(self.bank)
        self.brownian_sum = np.zeros((3, b))
        self.jump_sum = np.zeros((3, b))
        self.comp_sum = np.zeros((3, b))
        self.qv = np.zeros((3, b))
        self.realized_qv = np.zeros((3, b))      # sum of squared martingale increments
        self._mart_prev = np.zeros((3, b))
        self.checkpoint_times: list[float] = []
        self.pairings: list[np.ndarray] = []     # (3, b) raw <mu^{e,N}, phi>
        self.martingale: list[np.ndarray] = []   # (3, b) scaled
        self.qv_path: list[np.ndarray] = []      # (3, b)
        self.realized_qv_path: list[np.ndarray] = []
        self._gamma = 0.0

    def begin(self, ensemble, scheme):
        self.dt = scheme.dt

    def _bank_eval(self, x):
        flat = x[:, 0]
        vals = np.empty((len(self.bank), flat.size))
        grads = np.empty_like(vals)
        for b, phi in enumerate(self.bank):
            vals[b] = phi.value(flat)
            grads[b] = phi.grad(flat)
        return vals, grads

    def _settle_step(self):
        # one full step's martingale increment (positions, jumps, compensator)
        now = self.brownian_sum + self.jump_sum - self.comp_sum
        delta = now - self._mart_prev
        self.realized_qv += delta * delta
        self._mart_prev = now

    def on_step(self, t, x, states, rates, brownian, config):
        self._settle_step()
        self._gamma = config.gamma
        vals, grads = self._bank_eval(x)
        self._last_vals = vals
        dt = self.dt
        dB = brownian[:, 0]
        for e in range(3):
            mask = states == e
            if not np.any(mask):
                continue
            sig = config.diffusion.scalar_at(x[mask], e) if config.diffusion.is_scalar() \
                else np.full(int(mask.sum()), float(config.diffusion.sigma_matrix(e, 1)[0, 0]))
            gs = grads[:, mask] * sig
            self.brownian_sum[e] += gs @ dB[mask]
            self.qv[e] += dt * np.sum(gs * gs, axis=1)
        sus = states == 0
        inf = states == 1
        if np.any(sus):
            v = vals[:, sus]
            r = rates[sus]
            infection_flux = v @ r
            self.comp_sum[0] += -dt * infection_flux
            self.comp_sum[1] += dt * infection_flux
            phi2_k = (v * v) @ r
            self.qv[0] += dt * phi2_k
            self.qv[1] += dt * phi2_k
        if np.any(inf):
            v = vals[:, inf]
            rec_flux = self._gamma * v.sum(axis=1)
            self.comp_sum[1] += -dt * rec_flux
            self.comp_sum[2] += dt * rec_flux
            phi2 = self._gamma * np.sum(vals[:, inf] ** 2, axis=1)
            self.qv[1] += dt * phi2
            self.qv[2] += dt * phi2

    def on_jumps(self, x, new_infected, new_recovered):
        # split-step jumps: phi at start-of-step positions
        vals = self._last_vals
        if new_infected.size:
            s = vals[:, new_infected].sum(axis=1)
            self.jump_sum[0] -= s
            self.jump_sum[1] += s
        if new_recovered.size:
            s = vals[:, new_recovered].sum(axis=1)
            self.jump_sum[1] -= s
            self.jump_sum[2] += s

    def on_thinning_jump(self, xi, e_from, e_to):
        v = np.array([phi.value(np.atleast_1d(xi[0]))[0] for phi in self.bank])
        self.jump_sum[e_from] -= v
        self.jump_sum[e_to] += v

    def on_checkpoint(self, ensemble):
        self._settle_step()
        vals, _ = self._bank_eval(ensemble.positions)
        pairing = np.zeros((3, len(self.bank)))
        for e in range(3):
            mask = ensemble.states == e
            if np.any(mask):
                pairing[e] = vals[:, mask].sum(axis=1) / self.n
        self.checkpoint_times.append(ensemble.time)
        self.pairings.append(pairing)
        mart = (self.brownian_sum + self.jump_sum - self.comp_sum) / self.sqrt_n
        self.martingale.append(mart.copy())
        self.qv_path.append((self.qv / self.n).copy())
        self.realized_qv_path.append((self.realized_qv / self.n).copy())

    def results(self):
        return {
            "times": np.asarray(self.checkpoint_times),
            "pairings": np.stack(self.pairings),
            "martingale": np.stack(self.martingale),
            "qv": np.stack(self.qv_path),
            "realized_qv": np.stack(self.realized_qv_path),
        }
