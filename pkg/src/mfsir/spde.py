"""Gaussian limit objects in one dimension: the martingale triple driven by
discretized space-time white noises, the limit covariance quadrature, and a
grid solver for the linear fluctuation system.

Noise bookkeeping.  Five mutually independent scalar white-noise fields
drive the limit: one diffusion field per state channel plus the infection
field and the recovery field.  The infection field enters the S channel
with a minus sign and the I channel with a plus sign (identical magnitude,
cell by cell); the recovery field couples I (minus) and R (plus).  Separate
diffusion fields per channel are forced by the prelimit structure: a
particle is in exactly one state at a time, so the Brownian parts of the
three channel martingales have zero cross-variation, and the limit
covariance is diagonal over channels in its diffusion term.  The recovery
amplitude is sqrt(gamma * mu_I) in both the I and R channels, which is what
the closed-form quadratic variations require.

Stored noise increments are the integrals of W(dr, dx) over one time step
and one cell, i.e. Normal(0, dt * h).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelConfig
from .pde import DensityTrajectory, Grid1D, MeanFieldOperator, check_cfl

__all__ = [
    "NoiseField",
    "FluctuationField",
    "sample_eta0",
    "build_martingale_increment",
    "increment_components",
    "covariance_quadrature",
    "noise_covariance_mc",
    "solve_linear_spde",
]

# noise component order
DIFF_S, DIFF_I, DIFF_R, INFECTION, RECOVERY = range(5)

_DENSITY_FLOOR = 1e-14  # cells below this contribute no noise


class NoiseField:
    """Discretized independent space-time white noises on a step/cell grid.

    ``increments`` has shape (n_steps, 5, n_cells); entry (k, c, j) is the
    integral of noise component c over step k and cell j, distributed
    Normal(0, dt * h), independent across all indices.
    """

    def __init__(self, grid: Grid1D, dt: float, n_steps: int, rng: np.random.Generator):
        self.grid = grid
        self.dt = dt
        self.n_steps = n_steps
        std = np.sqrt(dt * grid.h)
        self.increments = std * rng.standard_normal((n_steps, 5, grid.n_cells))

    def step(self, k: int) -> np.ndarray:
        return self.increments[k]


class FluctuationField:
    """Cell-integrated fluctuation values per channel over time."""

    def __init__(self, grid: Grid1D, times, values):
        self.grid = grid
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)  # (n_times, 3, G)

    def at(self, t: float) -> np.ndarray:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, t):
            raise KeyError(f"no stored field at t={t}")
        return self.values[k]

    def project(self, t: float, phi, state: int) -> float:
        vals = phi.value(self.grid.centers)
        return float(np.dot(vals, self.at(t)[state]))


def sample_eta0(initial_masses: np.ndarray, grid: Grid1D,
                rng: np.random.Generator) -> np.ndarray:
    """Gaussian initial fluctuation with the multinomial-CLT covariance.

    Cov(eta_{e,c}, eta_{f,c'}) = delta p_{e,c} - p_{e,c} p_{f,c'} over the
    flattened (state, cell) index; realized as
    eta_k = sqrt(p_k) Z_k - p_k sum_j sqrt(p_j) Z_j with i.i.d. Z.
    The total fluctuation mass is exactly zero.
    """
    p = np.asarray(initial_masses, dtype=float)
    if p.shape[0] != 3 or p.shape[1] != grid.n_cells:
        raise ValueError("initial masses must have shape (3, n_cells)")
    if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-6:
        raise ValueError("initial masses must form a probability vector")
    flat = np.clip(p.ravel(), 0.0, None)
    z = rng.standard_normal(flat.size)
    root = np.sqrt(flat)
    total = float(np.dot(root, z))
    eta = root * z - flat * total
    return eta.reshape(3, grid.n_cells)


def _noise_amplitudes(masses: np.ndarray, k_inf: np.ndarray, sigma: np.ndarray,
                      gamma: float, h: float):
    """Per-cell amplitudes of the five noise components.

    diffusion_e: sqrt(m_e / h) * sigma_e ; infection: sqrt(m_S K_I / h) ;
    recovery: sqrt(gamma m_I / h).
    """
    m = np.where(masses > _DENSITY_FLOOR, masses, 0.0)
    amp = np.empty((5, masses.shape[1]))
    for e in range(3):
        amp[e] = np.sqrt(m[e] / h) * sigma[e]
    amp[INFECTION] = np.sqrt(m[0] * np.clip(k_inf, 0.0, None) / h)
    amp[RECOVERY] = np.sqrt(gamma * m[1] / h)
    return amp


def increment_components(noise_step: np.ndarray, masses: np.ndarray,
                         k_inf: np.ndarray, sigma: np.ndarray, gamma: float,
                         h: float, phi_vals: np.ndarray, phi_grads: np.ndarray):
    """The five independent scalar contributions to the step increment of
    the martingale triple tested against one function."""
    amp = _noise_amplitudes(masses, k_inf, sigma, gamma, h)
    out = np.empty(5)
    for e in range(3):
        out[e] = float(np.dot(phi_grads * amp[e], noise_step[e]))
    out[INFECTION] = float(np.dot(phi_vals * amp[INFECTION], noise_step[INFECTION]))
    out[RECOVERY] = float(np.dot(phi_vals * amp[RECOVERY], noise_step[RECOVERY]))
    return out


def build_martingale_increment(noise_step: np.ndarray, masses: np.ndarray,
                               grid: Grid1D, config: ModelConfig, phi,
                               k_inf: np.ndarray | None = None) -> tuple[float, float, float]:
    """One-step increments (dM^S(phi), dM^I(phi), dM^R(phi)).

    dM^S = diff_S - infection ; dM^I = diff_I + infection - recovery ;
    dM^R = diff_R + recovery.
    """
    if np.any(masses < -1e-10):
        raise ValueError("negative density beyond clipping tolerance")
    centers = grid.centers
    if k_inf is None:
        k_inf = MeanFieldOperator(config, grid).infection_field(masses[1])
    sigma = np.stack([np.asarray(config.diffusion.scalar_at(centers, e), dtype=float)
                      for e in range(3)])
    comp = increment_components(noise_step, masses, k_inf, sigma, config.gamma,
                                grid.h, phi.value(centers), phi.grad(centers))
    d_s = comp[DIFF_S] - comp[INFECTION]
    d_i = comp[DIFF_I] + comp[INFECTION] - comp[RECOVERY]
    d_r = comp[DIFF_R] + comp[RECOVERY]
    return float(d_s), float(d_i), float(d_r)


def covariance_quadrature(phi1, phi2, t: float, s: float, traj: DensityTrajectory,
                          config: ModelConfig) -> float:
    """Limit covariance by trapezoidal quadrature over stored density times:

      int_0^{t^s} [ sum_e <mu^e_r, sigma_e^2 phi1' phi2'>
                    + <mu^S_r, K_{mu^I_r} phi1 phi2>
                    + gamma <mu^I_r, phi1 phi2> ] dr
    """
    t_cut = min(t, s)
    if t_cut < 0:
        raise ValueError("times must be nonnegative")
    grid = traj.grid
    centers = grid.centers
    op = MeanFieldOperator(config, grid)
    v1, g1 = phi1.value(centers), phi1.grad(centers)
    v2, g2 = phi2.value(centers), phi2.grad(centers)
    sigma = np.stack([np.asarray(config.diffusion.scalar_at(centers, e), dtype=float)
                      for e in range(3)])

    times = traj.times[traj.times <= t_cut + 1e-12]
    if times.size == 0 or times[-1] < t_cut - 1e-9:
        times = np.append(times, t_cut)

    def integrand(r):
        m = traj.interp(r)
        total = 0.0
        for e in range(3):
            total += float(np.dot(m[e], sigma[e] ** 2 * g1 * g2))
        k_i = op.infection_field(m[1])
        total += float(np.dot(m[0], k_i * v1 * v2))
        total += config.gamma * float(np.dot(m[1], v1 * v2))
        return total

    vals = np.array([integrand(r) for r in times])
    return float(np.trapezoid(vals, times))


def noise_covariance_mc(phi1, phi2, t: float, s: float, traj: DensityTrajectory,
                        config: ModelConfig, n_paths: int, dt: float,
                        rng: np.random.Generator, batch: int = 2000):
    """Monte Carlo Cov(M_t(phi1), M_s(phi2)) for the aggregate noise process
    M(phi) = sum_e diff_e(phi) + infection(phi) + recovery(phi), whose
    covariance is exactly the closed-form quadrature above (every source
    enters once, positively).  Vectorized across paths.
    """
    grid = traj.grid
    h = grid.h
    centers = grid.centers
    op = MeanFieldOperator(config, grid)
    v1, g1 = phi1.value(centers), phi1.grad(centers)
    v2, g2 = phi2.value(centers), phi2.grad(centers)
    sigma = np.stack([np.asarray(config.diffusion.scalar_at(centers, e), dtype=float)
                      for e in range(3)])
    t_max = max(t, s)
    n_steps = int(round(t_max / dt))
    if abs(n_steps * dt - t_max) > 1e-9:
        raise ValueError("t and s must be multiples of dt")
    std = np.sqrt(dt * h)

    samples1 = []
    samples2 = []
    for lo in range(0, n_paths, batch):
        nb = min(batch, n_paths - lo)
        acc1 = np.zeros(nb)
        acc2 = np.zeros(nb)
        snap1 = None
        snap2 = None
        for k in range(n_steps):
            # midpoint masses: second-order accurate against the trapezoid
            # quadrature this estimator is validated against
            masses = traj.interp((k + 0.5) * dt)
            k_i = op.infection_field(masses[1])
            amp = _noise_amplitudes(masses, k_i, sigma, config.gamma, h)
            # weights of each noise component against phi1 / phi2
            w1 = np.empty((5, grid.n_cells))
            w2 = np.empty((5, grid.n_cells))
            for e in range(3):
                w1[e] = g1 * amp[e]
                w2[e] = g2 * amp[e]
            w1[INFECTION] = v1 * amp[INFECTION]
            w2[INFECTION] = v2 * amp[INFECTION]
            w1[RECOVERY] = v1 * amp[RECOVERY]
            w2[RECOVERY] = v2 * amp[RECOVERY]
            xi = std * rng.standard_normal((nb, 5, grid.n_cells))
            acc1 += np.einsum("bfc,fc->b", xi, w1)
            acc2 += np.einsum("bfc,fc->b", xi, w2)
            t_next = (k + 1) * dt
            if snap1 is None and t_next >= t - 1e-9:
                snap1 = acc1.copy()
            if snap2 is None and t_next >= s - 1e-9:
                snap2 = acc2.copy()
        samples1.append(snap1 if snap1 is not None else acc1)
        samples2.append(snap2 if snap2 is not None else acc2)
    a = np.concatenate(samples1)
    b = np.concatenate(samples2)
    cov = float(np.mean(a * b) - a.mean() * b.mean())
    return cov, a, b


def solve_linear_spde(traj: DensityTrajectory, eta0: np.ndarray, noise: NoiseField,
                      t_end: float, dt: float, config: ModelConfig,
                      store_times=None) -> FluctuationField:
    """Explicit Euler-Maruyama solve of the linear fluctuation system.

    Each channel advances by the adjoint drift (diffusion of sigma_e^2 eta,
    transport by V_mu plus the linearized nonlocal transport of mu by
    V_eta, infection/recovery exchange terms) plus the white-noise
    martingale increment injected cell-wise in conservative form.
    """
    grid = traj.grid
    check_cfl(config, grid, dt)
    n_steps = int(round(t_end / dt))
    if abs(n_steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError("t_end must be a multiple of dt")
    if noise.n_steps < n_steps or abs(noise.dt - dt) > 1e-12:
        raise ValueError("noise field does not match the time grid")
    op = MeanFieldOperator(config, grid)
    h = grid.h
    centers = grid.centers
    sigma = np.stack([np.asarray(config.diffusion.scalar_at(centers, e), dtype=float)
                      for e in range(3)])
    eta = np.array(eta0, dtype=float, copy=True)
    if eta.shape != (3, grid.n_cells):
        raise ValueError("eta0 must have shape (3, n_cells)")

    if store_times is None:
        store_times = [0.0, t_end]
    store_times = sorted(float(u) for u in store_times)
    stored = []
    stored_t = []
    next_idx = 0
    gamma = config.gamma

    for k in range(n_steps + 1):
        t = k * dt
        while next_idx < len(store_times) and t >= store_times[next_idx] - 1e-9:
            if not stored_t or t > stored_t[-1] + 1e-15:
                stored.append(eta.copy())
                stored_t.append(t)
            next_idx += 1
        if k == n_steps:
            break
        masses = traj.interp(t)
        k_inf = op.infection_field(masses[1])
        k_eta_i = op.infection_field(eta[1])
        v_mu = op.face_velocities(masses)
        v_eta = op.face_velocities(eta)

        new = np.empty_like(eta)
        for e in range(3):
            adv_eta = op.advection_term(eta[e], v_mu[e])
            adv_mu = op.advection_term_central(masses[e], v_eta[e])
            new[e] = eta[e] + dt * (op.diffusion_term(eta[e], e) + adv_eta + adv_mu)
        react = dt * (k_inf * eta[0] + k_eta_i * masses[0])
        new[0] -= react
        new[1] += react - dt * gamma * eta[1]
        new[2] += dt * gamma * eta[1]

        xi = noise.step(k)
        amp = _noise_amplitudes(masses, k_inf, sigma, gamma, h)
        for e in range(3):
            a = amp[e] * xi[e]
            face = np.zeros(grid.n_cells + 1)
            face[1:-1] = 0.5 * (a[:-1] + a[1:])
            new[e] -= (face[1:] - face[:-1]) / h
        b = amp[INFECTION] * xi[INFECTION]
        new[0] -= b
        new[1] += b
        r = amp[RECOVERY] * xi[RECOVERY]
        new[1] -= r
        new[2] += r

        if not np.all(np.isfinite(new)):
            raise FloatingPointError(f"non-finite fluctuation field at t={t + dt:g}")
        eta = new

    return FluctuationField(grid, stored_t, np.stack(stored))
