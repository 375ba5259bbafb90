"""Fluctuation laboratory: eta projections, martingale reconstruction,
closed-form quadratic variations, and the LLN / CLT experiments.

Experiments fan replications out to a process pool; every replication owns
a stream derived from (base seed, purpose, index) and results are reduced
in replication order, so outputs are identical for any worker count.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import backends
from .measures import pair, w1_1d, w1_1d_to_density, sliced_w1
from .model import ModelConfig, StateMeasure
from .pde import DensityTrajectory, pair_density
from .rng import derive_stream
from .simulate import EventLog, FluctuationRecorder, SimScheme, Trajectory, run
from .stats import FitResult, fit_power_law

__all__ = [
    "RateTable",
    "FluctuationSample",
    "eta_projection",
    "assemble_martingale",
    "qv_formula",
    "channel_w1_distance",
    "lln_experiment",
    "clt_experiment",
    "semimartingale_residual",
]

STATE_NAMES = ("S", "I", "R")


@dataclass
class RateTable:
    """Law-of-large-numbers sweep: one row per ensemble size."""

    d: int
    ns: list
    reps: list
    mean_w1: list
    se: list

    def __post_init__(self):
        if list(self.ns) != sorted(set(self.ns)):
            raise ValueError("N values must be strictly increasing")
        if any(s <= 0 for s in self.se):
            raise ValueError("standard errors must be positive")

    def fit(self) -> FitResult:
        return fit_power_law(self.ns, self.mean_w1)

    def rows(self):
        for n, r, m, s in zip(self.ns, self.reps, self.mean_w1, self.se):
            yield {"N": n, "reps": r, "mean_w1": m, "se": s}


@dataclass
class FluctuationSample:
    """Per-replication projections: eta values, martingale paths and
    formula QVs for every (state, test function, checkpoint)."""

    rep: int
    times: np.ndarray
    eta: np.ndarray          # (n_t, 3, n_phi)
    martingale: np.ndarray   # (n_t, 3, n_phi)
    qv: np.ndarray           # (n_t, 3, n_phi)
    realized_qv: np.ndarray  # (n_t, 3, n_phi)

    def total_mass_projection(self, one_index: int, t_index: int) -> float:
        return float(self.eta[t_index, :, one_index].sum())


def eta_projection(cloud, limit: DensityTrajectory, t: float, phi, state: int,
                   n: int) -> float:
    """sqrt(N) (<mu^{e,N}_t, phi> - <mu^e_t, phi>) for one state channel."""
    empirical = pair(cloud, phi)
    return float(np.sqrt(n) * (empirical - pair_density(limit, t, phi, state)))


def assemble_martingale(log: EventLog, phi, state: int, n: int):
    """Reconstruct t -> M~^{e,N}_t(phi) from a fully logged replication.

    Brownian sums use start-of-step positions, jump terms the start-of-step
    position of the jumping individual, compensators the left-endpoint
    rates; this matches the split-step scheme exactly.
    """
    if not log.store_brownian or not log.positions:
        raise ValueError(
            "event log has no Brownian increments; run with log_brownian=True"
        )
    n_steps = len(log.positions)
    dt = log.step_times[1] - log.step_times[0] if n_steps > 1 else 0.0
    jump_by_step = {}
    for t, i, ef, et in zip(log.jump_times, log.jump_individuals,
                            log.jump_from, log.jump_to):
        # jumps land in step k when t is in (k dt, (k+1) dt]
        k = 0 if dt <= 0 else int(np.ceil(t / dt - 1e-9)) - 1
        k = min(max(k, 0), n_steps - 1)
        jump_by_step.setdefault(k, []).append((i, ef, et))

    times = np.empty(n_steps + 1)
    path = np.empty(n_steps + 1)
    times[0] = log.step_times[0]
    acc = 0.0
    path[0] = 0.0
    for k in range(n_steps):
        x = log.positions[k][:, 0]
        states = log.states[k]
        dB = log.brownian[k][:, 0]
        rates = log.rates[k]
        mask = states == state
        if np.any(mask):
            sig = _sigma_vec(log, x[mask], state)
            acc += float(np.dot(phi.grad(x[mask]) * sig, dB[mask]))
        sus = states == 0
        inf = states == 1
        dt_k = dt if dt > 0 else 0.0
        if state == 0 and np.any(sus):
            acc += dt_k * float(np.dot(phi.value(x[sus]), rates[sus]))
        elif state == 1:
            if np.any(sus):
                acc -= dt_k * float(np.dot(phi.value(x[sus]), rates[sus]))
            if np.any(inf):
                acc += dt_k * log.gamma * float(np.sum(phi.value(x[inf])))
        elif state == 2 and np.any(inf):
            acc -= dt_k * log.gamma * float(np.sum(phi.value(x[inf])))
        for (i, ef, et) in jump_by_step.get(k, ()):
            if ef == state or et == state:
                v = float(phi.value(np.atleast_1d(x[i]))[0])
                acc += v if et == state else -v
        times[k + 1] = log.step_times[k] + dt_k
        path[k + 1] = acc
    return times, path / np.sqrt(n)


def _sigma_vec(log: EventLog, x, state):
    diff = log.diffusion
    if diff.is_scalar():
        return np.asarray(diff.scalar_at(x, state), dtype=float)
    return np.full(x.shape[0], float(diff.sigma_matrix(state, 1)[0, 0]))


def qv_formula(traj: Trajectory, phi, state: int):
    """Closed-form quadratic variation of M~^{e,N}(phi) by left-endpoint
    Riemann sums over the logged steps."""
    log = traj.log
    if log is None or not log.store_brownian or not log.positions:
        raise ValueError("qv_formula needs a fully logged trajectory")
    n = log.n
    dt = traj.scheme.dt
    gamma = traj.config.gamma
    n_steps = len(log.positions)
    times = np.empty(n_steps + 1)
    path = np.empty(n_steps + 1)
    times[0] = log.step_times[0]
    path[0] = 0.0
    acc = 0.0
    for k in range(n_steps):
        x = log.positions[k][:, 0]
        states = log.states[k]
        rates = log.rates[k]
        mask = states == state
        if np.any(mask):
            sig = _sigma_vec(log, x[mask], state)
            acc += dt * float(np.sum((phi.grad(x[mask]) * sig) ** 2)) / n
        sus = states == 0
        inf = states == 1
        if state in (0, 1) and np.any(sus):
            acc += dt * float(np.dot(phi.value(x[sus]) ** 2, rates[sus])) / n
        if state in (1, 2) and np.any(inf):
            acc += dt * gamma * float(np.sum(phi.value(x[inf]) ** 2)) / n
        times[k + 1] = log.step_times[k] + dt
        path[k + 1] = acc
    return times, path


def channel_w1_distance(ensemble_measure: StateMeasure, limit, d: int,
                        n_proj: int = 128, slice_rng=None,
                        with_mass_gap: bool = False):
    """Channel-wise W1 between mass-renormalized measures, summed over the
    three channels; channel-mass differences are returned separately.

    The product-space W1 of the convergence statement needs a metric on the
    state component; channels and masses are compared separately instead,
    and both pieces carry the same convergence rate.  In d = 1 ``limit``
    is a (DensityTrajectory, t) pair; for d >= 2 it is a StateMeasure from
    a reference ensemble and sliced W1 is used.
    """
    total = 0.0
    mass_gap = 0.0
    if d == 1:
        traj, t = limit
        masses = traj.interp(t)
        centers = traj.grid.centers
        for e in range(3):
            pts, w = ensemble_measure.clouds[e]
            m_cloud = float(w.sum())
            m_lim = float(masses[e].sum())
            mass_gap += abs(m_cloud - m_lim)
            if m_cloud > 1e-12 and m_lim > 1e-12:
                total += w1_1d_to_density((pts, w / m_cloud), centers,
                                          masses[e] / m_lim, mass_tol=1e-6)
    else:
        for e in range(3):
            pts, w = ensemble_measure.clouds[e]
            rpts, rw = limit.clouds[e]
            m_cloud = float(w.sum())
            m_lim = float(rw.sum())
            mass_gap += abs(m_cloud - m_lim)
            if m_cloud > 1e-12 and m_lim > 1e-12:
                total += sliced_w1((pts, w / m_cloud), (rpts, rw / m_lim),
                                   n_proj, slice_rng)
    if with_mass_gap:
        return total, mass_gap
    return total


# ---------------------------------------------------------------------------
# parallel replication machinery

_WORKER_CTX: dict = {}


def _init_ctx(ctx):
    _WORKER_CTX.update(ctx)


def _pool_map(fn, items, workers: int):
    if workers <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def _lln_rep(args):
    n, rep = args
    ctx = _WORKER_CTX
    config: ModelConfig = ctx["config"]
    scheme: SimScheme = ctx["scheme"]
    rng = derive_stream(ctx["base_seed"], f"lln-N{n}", rep)
    traj = run(config, scheme, n, rng, keep_log=False)
    measure = StateMeasure.from_ensemble(traj.snapshots[-1])
    if config.d == 1:
        return channel_w1_distance(measure, (ctx["limit"], scheme.t_end), 1)
    slice_rng = derive_stream(ctx["base_seed"], f"slice-N{n}", rep)
    return channel_w1_distance(measure, ctx["limit"], config.d,
                               n_proj=ctx["n_proj"], slice_rng=slice_rng)


def lln_experiment(config: ModelConfig, ns, reps: int, scheme: SimScheme,
                   limit, base_seed: int, workers: int = 1,
                   n_proj: int = 128) -> RateTable:
    """Mean W1 to the limit at the final time, per ensemble size.

    ``limit`` is a DensityTrajectory in d = 1, or the StateMeasure of a
    reference ensemble for d >= 2.
    """
    ns = sorted(int(n) for n in ns)
    if not ns:
        raise ValueError("need at least one ensemble size")
    _init_ctx({"config": config, "scheme": scheme, "limit": limit,
               "base_seed": base_seed, "n_proj": n_proj})
    mean_w1 = []
    ses = []
    rep_counts = []
    for n in ns:
        vals = np.asarray(_pool_map(_lln_rep, [(n, r) for r in range(reps)], workers))
        mean_w1.append(float(vals.mean()))
        ses.append(float(vals.std(ddof=1) / np.sqrt(reps)))
        rep_counts.append(reps)
    return RateTable(config.d, ns, rep_counts, mean_w1, ses)


def _clt_rep(args):
    (rep,) = args
    ctx = _WORKER_CTX
    config: ModelConfig = ctx["config"]
    scheme: SimScheme = ctx["scheme"]
    bank = ctx["bank"]
    n = ctx["n"]
    rng = derive_stream(ctx["base_seed"], "clt", rep)
    recorder = FluctuationRecorder(bank, n)
    run(config, scheme, n, rng, recorder=recorder, keep_log=False)
    res = recorder.results()
    return (rep, res["times"], res["pairings"], res["martingale"], res["qv"],
            res["realized_qv"])


def clt_experiment(config: ModelConfig, n: int, reps: int, bank, checkpoints,
                   limit: DensityTrajectory, base_seed: int,
                   workers: int = 1, dt: float | None = None):
    """Per-replication eta projections, martingale paths and formula QVs at
    the checkpoints, for every (state, bank function)."""
    if config.d != 1:
        raise ValueError("CLT experiments are specified in d = 1")
    checkpoints = tuple(float(t) for t in checkpoints)
    scheme = SimScheme(dt if dt is not None else checkpoints[-1] / 400,
                       checkpoints, mode="split_step")
    _init_ctx({"config": config, "scheme": scheme, "bank": bank, "n": n,
               "base_seed": base_seed})
    raw = _pool_map(_clt_rep, [(r,) for r in range(reps)], workers)
    raw.sort(key=lambda item: item[0])

    limit_pairings = np.empty((len(checkpoints), 3, len(bank)))
    for ti, t in enumerate(checkpoints):
        for e in range(3):
            for b, phi in enumerate(bank):
                limit_pairings[ti, e, b] = pair_density(limit, t, phi, e)

    sqrt_n = np.sqrt(n)
    samples = []
    for rep, times, pairings, mart, qv, rqv in raw:
        eta = sqrt_n * (pairings - limit_pairings)
        samples.append(FluctuationSample(rep, times, eta, mart, qv, rqv))
    return samples


# ---------------------------------------------------------------------------
# semimartingale residual diagnostic

def semimartingale_residual(traj: Trajectory, limit: DensityTrajectory, phi,
                            state: int):
    """Residual of the per-channel fluctuation evolution equation.

    Computes <eta^{e,N}_t, phi> minus its initial value minus the
    left-endpoint drift integrals; the result should reproduce the
    reconstructed martingale up to O(dt) time-discretization error.
    Returns (times, residual_path, martingale_path).
    """
    log = traj.log
    if log is None or not log.store_brownian:
        raise ValueError("needs a fully logged trajectory")
    config = traj.config
    n = log.n
    sqn = np.sqrt(n)
    dt = traj.scheme.dt
    grid = limit.grid
    centers = grid.centers
    kernel = config.kernel
    drift = config.drift
    gamma = config.gamma
    n_steps = len(log.positions)

    phi_c = phi.value(centers)
    dphi_c = phi.grad(centers)
    d2phi_c = phi.hess_trace(centers)
    sig2_c = np.asarray(config.diffusion.scalar_at(centers, state), dtype=float) ** 2

    def eta_pair(x, states, t, fn_particle, fn_grid, e):
        mask = states == e
        emp = float(np.sum(fn_particle[mask])) / n if np.any(mask) else 0.0
        lim = float(np.dot(fn_grid, limit.interp(t)[e]))
        return sqn * (emp - lim)

    times = np.empty(n_steps + 1)
    drift_int = 0.0
    resid = np.empty(n_steps + 1)
    eta_path = np.empty(n_steps + 1)

    def eta_at(k_x, k_states, t):
        vals = phi.value(k_x)
        mask = k_states == state
        emp = float(np.sum(vals[mask])) / n if np.any(mask) else 0.0
        lim = float(np.dot(phi_c, limit.interp(t)[state]))
        return sqn * (emp - lim)

    for k in range(n_steps + 1):
        if k < n_steps:
            x = log.positions[k][:, 0]
            states = log.states[k]
            t = log.step_times[k]
        else:
            last = traj.snapshots[-1]
            x = last.positions[:, 0]
            states = last.states
            t = last.time
        times[k] = t
        eta_path[k] = eta_at(x, states, t)
        resid[k] = eta_path[k] - eta_path[0] - drift_int
        if k == n_steps:
            break

        rates = log.rates[k]
        m = limit.interp(t)
        # empirical-coefficient fields at particles and at grid centers
        vmu_x = _drift_at(x, states, x, states, drift, n)
        vmu_c = _drift_at(centers, None, x, states, drift, n, force_state=state)
        kmu_c = _kernel_at(centers, x, states, kernel, n)
        kmu_x = _kernel_at(x, x, states, kernel, n)
        phi_x = phi.value(x)
        dphi_x = phi.grad(x)
        d2phi_x = phi.hess_trace(x)
        sig2_x = np.asarray(config.diffusion.scalar_at(x, state), dtype=float) ** 2

        # <eta^{e,N}, L^{e,N} phi> with L phi = 1/2 sigma^2 phi'' + phi' V^e_mu^N + ...
        l_x = 0.5 * sig2_x * d2phi_x + dphi_x * vmu_x
        l_c = 0.5 * sig2_c * d2phi_c + dphi_c * vmu_c
        chi_x = _chi_field(x, centers, m[0] * phi_c, kernel)
        chi_c = _chi_field(centers, centers, m[0] * phi_c, kernel)
        if state == 0:
            l_x = l_x - phi_x * kmu_x
            l_c = l_c - phi_c * kmu_c
        elif state == 1:
            l_x = l_x + chi_x - gamma * phi_x
            l_c = l_c + chi_c - gamma * phi_c
        term = eta_pair(x, states, t, l_x, l_c, state)

        # nonlocal transport linearization, tested against eta^N (all states)
        psi_base_x = _psi_base(x, centers, m[state] * dphi_c, drift)
        psi_base_c = _psi_base(centers, centers, m[state] * dphi_c, drift)
        wmat = drift.weight_matrix()
        for f in range(3):
            coef = wmat[state, f] if drift.family == "state_modulated" else 1.0
            term += coef * eta_pair(x, states, t, psi_base_x, psi_base_c, f)

        # infection linearization cross terms
        if state == 0:
            term -= eta_pair(x, states, t, chi_x, chi_c, 1)
        elif state == 1:
            term += eta_pair(x, states, t, phi_x * kmu_x, phi_c * kmu_c, 0)
        elif state == 2:
            term += gamma * eta_pair(x, states, t, phi_x, phi_c, 1)

        drift_int += dt * term

    _, mart = assemble_martingale(log, phi, state, n)
    return times, resid, mart


def _drift_at(targets, target_states, sources, source_states, drift, n,
              force_state=None):
    """V^e_{mu^N} at targets: (1/N) sum_j V(target, e, x_j, f_j)."""
    targets = np.ascontiguousarray(targets)
    out = np.zeros(targets.shape[0])
    if drift.family == "zero":
        return out
    w = np.ones(sources.shape[0])
    wm = drift.weight_matrix()
    if drift.family == "state_modulated":
        if force_state is not None:
            backends.drift_field_1d(targets, force_state, sources, source_states,
                                    w, drift.code, drift.a, drift.ell, wm, out)
            return out / n
        res = np.zeros_like(out)
        for e in range(3):
            mask = target_states == e
            if not np.any(mask):
                continue
            buf = np.zeros(int(mask.sum()))
            backends.drift_field_1d(np.ascontiguousarray(targets[mask]), e,
                                    sources, source_states, w, drift.code,
                                    drift.a, drift.ell, wm, buf)
            res[mask] = buf
        return res / n
    backends.drift_field_1d(targets, 0, sources, source_states, w, drift.code,
                            drift.a, drift.ell, wm, out)
    return out / n


def _kernel_at(targets, sources, source_states, kernel, n):
    """K_{mu^{I,N}} at targets."""
    inf = source_states == 1
    out = np.zeros(np.shape(targets)[0])
    if not np.any(inf) or kernel.beta == 0:
        return out
    w = np.ones(int(inf.sum()))
    backends.kernel_field_1d(np.ascontiguousarray(targets),
                             np.ascontiguousarray(sources[inf]), w,
                             kernel.code, kernel.beta, kernel.scale, out)
    return out / n


def _chi_field(targets, centers, weights, kernel):
    """chi(y) = sum_c weights_c K(x_c, y) (the <mu^S, phi K> operator term)."""
    out = np.zeros(np.shape(targets)[0])
    if kernel.beta == 0:
        return out
    backends.kernel_field_1d(np.ascontiguousarray(targets), centers,
                             np.ascontiguousarray(weights),
                             kernel.code, kernel.beta, kernel.scale, out)
    return out


def _psi_base(targets, centers, weights, drift):
    """psi(y) = sum_c weights_c V_base(x_c, y): the state-independent
    saturating profile is odd, so this equals minus the field with the
    target/source roles swapped."""
    out = np.zeros(np.shape(targets)[0])
    if drift.family == "zero":
        return out
    dummy = np.zeros(centers.size, dtype=np.int8)
    backends.drift_field_1d(np.ascontiguousarray(targets), 0, centers,
                            dummy, np.ascontiguousarray(weights),
                            1, drift.a, drift.ell, np.ones((3, 3)), out)
    return -out
