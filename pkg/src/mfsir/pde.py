"""Deterministic mean-field limit in one dimension.

Explicit finite-volume solver for the coupled nonlinear nonlocal S/I/R
system

    d m_S = 1/2 (sigma_S^2 m_S)_xx - (V_mu m_S)_x - K_{mu_I} m_S
    d m_I = 1/2 (sigma_I^2 m_I)_xx - (V_mu m_I)_x + K_{mu_I} m_S - gamma m_I
    d m_R = 1/2 (sigma_R^2 m_R)_xx - (V_mu m_R)_x + gamma m_I

on a truncated domain with zero-flux boundaries.  Cell masses are evolved
(density times h); diffusion uses central differences on the flux form,
advection first-order upwind on face velocities, nonlocal terms are exact
grid quadratures evaluated by FFT convolution (all shipped kernel and drift
families are translation invariant; a direct O(G^2) path exists for
validation).  For d >= 2 a large-N particle run stands in for the limit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .model import ModelConfig
from .simulate import SimScheme, Trajectory, run

__all__ = [
    "Grid1D",
    "DensityTrajectory",
    "MeanFieldOperator",
    "MassConservationError",
    "default_domain",
    "initial_cell_masses",
    "check_cfl",
    "kernel_profile",
    "drift_profile",
    "solve_pde",
    "pair_density",
    "reference_ensemble",
]


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    n_cells: int

    def __post_init__(self):
        if self.n_cells < 16:
            raise ValueError("need at least 16 cells")
        if self.x_max <= self.x_min:
            raise ValueError("empty domain")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + self.h * (np.arange(self.n_cells) + 0.5)

    @property
    def faces(self) -> np.ndarray:
        return self.x_min + self.h * np.arange(self.n_cells + 1)


def default_domain(config: ModelConfig, T: float, tail: float = 1e-8) -> tuple[float, float]:
    """Domain covering the initial mass up to ``tail`` plus the reachable
    expansion a*T + 6 sigma sqrt(T)."""
    k = math.sqrt(2.0) * math.sqrt(max(-math.log(tail), 1.0))  # Gaussian tail quantile
    lo, hi = np.inf, -np.inf
    for m in config.initial.mixtures:
        for mean, cov in zip(m.means, m.covs):
            s = math.sqrt(cov[0][0])
            lo = min(lo, mean[0] - k * s)
            hi = max(hi, mean[0] + k * s)
    grow = config.drift.bound * T + 6.0 * config.diffusion.bound * math.sqrt(T)
    return lo - grow, hi + grow


class _Convolver:
    """Quadrature of translation-invariant kernels against cell masses."""

    def __init__(self, grid: Grid1D, fn, use_fft: bool = True):
        g = grid.n_cells
        h = grid.h
        offs_c = (np.arange(-(g - 1), g)) * h
        offs_f = (np.arange(-(g - 1), g + 1)) * h - 0.5 * h
        self._use_fft = use_fft
        self._g = g
        if use_fft:
            self._kc = fn(offs_c)
            self._kf = fn(offs_f)
        else:
            centers = grid.centers
            faces = grid.faces
            self._mc = fn(centers[:, None] - centers[None, :])
            self._mf = fn(faces[:, None] - centers[None, :])

    def at_centers(self, masses: np.ndarray) -> np.ndarray:
        if self._use_fft:
            g = self._g
            return fftconvolve(masses, self._kc, mode="full")[g - 1 : 2 * g - 1]
        return self._mc @ masses

    def at_faces(self, masses: np.ndarray) -> np.ndarray:
        if self._use_fft:
            g = self._g
            return fftconvolve(masses, self._kf, mode="full")[g - 1 : 2 * g]
        return self._mf @ masses


def kernel_profile(kernel):
    """K(x, y) as a function of x - y."""
    if kernel.family == "constant":
        return lambda r: np.full_like(np.asarray(r, dtype=float), kernel.beta)
    if kernel.family == "gaussian":
        return lambda r: kernel.beta * np.exp(-0.5 * (r / kernel.scale) ** 2)

    def bump_profile(r):
        u2 = (np.asarray(r, dtype=float) / kernel.scale) ** 2
        out = np.zeros_like(u2)
        mask = u2 < 1.0
        out[mask] = kernel.beta * np.exp(1.0 - 1.0 / (1.0 - u2[mask]))
        return out

    return bump_profile


def drift_profile(drift):
    """V(x, ., y, .) as a function of r = x - y (state-independent part)."""

    def profile(r):
        r = np.asarray(r, dtype=float)
        # V(x, y) = a (y - x) / (1 + |y - x|^2 / ell^2) with y - x = -r
        return -drift.a * r / (1.0 + (r / drift.ell) ** 2)

    return profile


class MassConservationError(RuntimeError):
    pass


class DensityTrajectory:
    """Time-indexed S/I/R cell masses on a 1-D grid."""

    def __init__(self, grid: Grid1D, times: np.ndarray, masses: np.ndarray,
                 clipped_per_step: float = 0.0):
        self.grid = grid
        self.times = np.asarray(times, dtype=float)
        self.masses = np.asarray(masses, dtype=float)  # (n_times, 3, G)
        self.clipped_per_step = clipped_per_step
        if self.masses.shape[0] != self.times.size or self.masses.shape[1] != 3:
            raise ValueError("masses must have shape (n_times, 3, n_cells)")

    def interp(self, t: float) -> np.ndarray:
        """Cell masses (3, G) at time t, linear between stored times."""
        ts = self.times
        if t < ts[0] - 1e-9 or t > ts[-1] + 1e-9:
            raise ValueError(f"time {t} outside stored range [{ts[0]}, {ts[-1]}]")
        k = np.searchsorted(ts, t)
        if k == 0:
            return self.masses[0]
        if k >= ts.size:
            return self.masses[-1]
        t0, t1 = ts[k - 1], ts[k]
        if t1 <= t0 + 1e-15 or abs(t - t0) < 1e-12:
            return self.masses[k - 1]
        lam = (t - t0) / (t1 - t0)
        return (1 - lam) * self.masses[k - 1] + lam * self.masses[k]

    def channel_mass(self, t: float, state: int) -> float:
        return float(self.interp(t)[state].sum())

    def restrict(self, factor: int) -> "DensityTrajectory":
        """Coarsen by summing blocks of ``factor`` cells."""
        g = self.grid.n_cells
        if g % factor:
            raise ValueError("cell count not divisible by factor")
        coarse = Grid1D(self.grid.x_min, self.grid.x_max, g // factor)
        m = self.masses.reshape(self.times.size, 3, g // factor, factor).sum(axis=3)
        return DensityTrajectory(coarse, self.times, m, self.clipped_per_step)

    def save(self, path):
        np.savez_compressed(path, x_min=self.grid.x_min, x_max=self.grid.x_max,
                            n_cells=self.grid.n_cells, times=self.times, masses=self.masses)

    @classmethod
    def load(cls, path) -> "DensityTrajectory":
        with np.load(path) as z:
            grid = Grid1D(float(z["x_min"]), float(z["x_max"]), int(z["n_cells"]))
            return cls(grid, z["times"], z["masses"])


def initial_cell_masses(config: ModelConfig, grid: Grid1D) -> np.ndarray:
    """Exact per-cell masses of the initial law (CDF differences)."""
    faces = grid.faces
    out = np.empty((3, grid.n_cells))
    for e in range(3):
        cdf = config.initial.mixtures[e].cdf_1d(faces)
        out[e] = config.initial.state_probs[e] * np.diff(cdf)
    return out


def check_cfl(config: ModelConfig, grid: Grid1D, dt: float):
    h = grid.h
    smax = config.diffusion.bound
    if smax > 0 and dt > 0.4 * h * h / (smax * smax) + 1e-15:
        raise ValueError(
            f"diffusive CFL violated: dt={dt:g} > {0.4 * h * h / (smax * smax):g}"
        )
    vmax = config.drift.bound
    if vmax > 0 and dt > 0.4 * h / vmax + 1e-15:
        raise ValueError(f"advective CFL violated: dt={dt:g} > {0.4 * h / vmax:g}")


class MeanFieldOperator:
    """One explicit finite-volume step of the limit system (shared by the
    deterministic solver and the linearized fluctuation solver)."""

    def __init__(self, config: ModelConfig, grid: Grid1D, use_fft: bool = True):
        if config.d != 1:
            raise ValueError("the grid solver requires d = 1")
        self.config = config
        self.grid = grid
        centers = grid.centers
        self.sigma2 = np.stack([
            np.asarray(config.diffusion.scalar_at(centers, e), dtype=float) ** 2
            for e in range(3)
        ])
        self.kernel_conv = (None if config.kernel.beta == 0.0 else
                            _Convolver(grid, kernel_profile(config.kernel), use_fft))
        self.drift_conv = (None if config.drift.family == "zero" else
                           _Convolver(grid, drift_profile(config.drift), use_fft))
        self.drift_weights = config.drift.weight_matrix() if \
            config.drift.family == "state_modulated" else None

    def infection_field(self, masses_i: np.ndarray) -> np.ndarray:
        """K_{ mu_I } at cell centers from infected cell masses."""
        if self.kernel_conv is None:
            return np.zeros(self.grid.n_cells)
        if self.config.kernel.family == "constant":
            return np.full(self.grid.n_cells, self.config.kernel.beta * masses_i.sum())
        return self.kernel_conv.at_centers(masses_i)

    def face_velocities(self, masses: np.ndarray) -> np.ndarray:
        """V^e_mu at faces, shape (3, G+1), from (3, G) source masses."""
        g1 = self.grid.n_cells + 1
        if self.drift_conv is None:
            return np.zeros((3, g1))
        if self.drift_weights is None:
            v = self.drift_conv.at_faces(masses.sum(axis=0))
            return np.broadcast_to(v, (3, g1)).copy()
        per_state = np.stack([self.drift_conv.at_faces(masses[f]) for f in range(3)])
        return self.drift_weights @ per_state

    def diffusion_term(self, m: np.ndarray, e: int) -> np.ndarray:
        """1/2 (sigma^2 m)_xx in flux form with zero-flux boundaries."""
        h2 = self.grid.h**2
        q = self.sigma2[e] * m
        out = np.empty_like(m)
        out[1:-1] = 0.5 * (q[2:] - 2.0 * q[1:-1] + q[:-2]) / h2
        out[0] = 0.5 * (q[1] - q[0]) / h2
        out[-1] = 0.5 * (q[-2] - q[-1]) / h2
        return out

    def advection_term(self, m: np.ndarray, v_faces: np.ndarray) -> np.ndarray:
        """-(v m / h)_x, first-order upwind, zero boundary flux."""
        h = self.grid.h
        flux = np.zeros(m.size + 1)
        v = v_faces[1:-1]
        up = np.where(v > 0, m[:-1], m[1:])
        flux[1:-1] = v * up / h
        return -(flux[1:] - flux[:-1])

    def advection_term_central(self, m: np.ndarray, v_faces: np.ndarray) -> np.ndarray:
        """-(v m / h)_x with face-averaged masses: linear in v, used for the
        linearized transport source where v itself is the unknown."""
        h = self.grid.h
        flux = np.zeros(m.size + 1)
        flux[1:-1] = v_faces[1:-1] * 0.5 * (m[:-1] + m[1:]) / h
        return -(flux[1:] - flux[:-1])


def solve_pde(config: ModelConfig, grid: Grid1D, t_end: float, dt: float,
              store_times=None, use_fft: bool = True,
              mass_tol: float = 1e-4) -> DensityTrajectory:
    """Explicit finite-volume solve of the mean-field system up to t_end."""
    check_cfl(config, grid, dt)
    op = MeanFieldOperator(config, grid, use_fft)
    masses = initial_cell_masses(config, grid)
    mass0 = masses.sum()

    n_steps = max(1, int(math.ceil(t_end / dt - 1e-12)))
    dt = t_end / n_steps  # shrink to land on t_end exactly; CFL still holds
    if store_times is None:
        store_times = np.linspace(0.0, t_end, 201)
    store_times = np.asarray(sorted(store_times), dtype=float)

    stored = []
    stored_t = []
    next_idx = 0
    clipped_total = 0.0
    min_before_clip = 0.0
    gamma = config.gamma

    for k in range(n_steps + 1):
        t = k * dt
        while next_idx < store_times.size and t >= store_times[next_idx] - 1e-9:
            if not stored_t or t > stored_t[-1] + 1e-15:
                stored.append(masses.copy())
                stored_t.append(t)
            next_idx += 1
        if k == n_steps:
            break
        k_inf = op.infection_field(masses[1])
        v_faces = op.face_velocities(masses)
        new = np.empty_like(masses)
        for e in range(3):
            new[e] = masses[e] + dt * (op.diffusion_term(masses[e], e)
                                       + op.advection_term(masses[e], v_faces[e]))
        react = dt * k_inf * masses[0]
        new[0] -= react
        new[1] += react - dt * gamma * masses[1]
        new[2] += dt * gamma * masses[1]

        neg = new < 0
        if np.any(neg):
            min_before_clip = min(min_before_clip, float(new.min()))
            clipped_total += -float(new[neg].sum())
            new[neg] = 0.0
        masses = new
        drift_err = abs(masses.sum() - mass0)
        if drift_err > mass_tol:
            raise MassConservationError(f"mass drift {drift_err:g} at t={t + dt:g}")

    out = DensityTrajectory(grid, np.asarray(stored_t), np.stack(stored),
                            clipped_per_step=clipped_total / max(n_steps, 1))
    out.min_before_clip = min_before_clip
    return out


def pair_density(traj: DensityTrajectory, t: float, phi, state: int) -> float:
    """<mu^e_t, phi> by midpoint quadrature on the stored grid."""
    masses = traj.interp(t)[state]
    vals = phi.value(traj.grid.centers) if hasattr(phi, "value") else phi(traj.grid.centers)
    return float(np.dot(vals, masses))


def reference_ensemble(config: ModelConfig, n_ref: int, rng, scheme: SimScheme) -> Trajectory:
    """Large-N particle surrogate for the limit (any d); O(n_ref^{-1/d}) bias."""
    return run(config, scheme, n_ref, rng, keep_log=False)
