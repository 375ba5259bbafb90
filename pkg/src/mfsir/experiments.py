"""Composite experiment drivers behind the CLI subcommands.

Each driver returns plain rows (for CSV export) plus verdicts (for the
manifest); the CLI layer owns files and exit codes.
"""
from __future__ import annotations

import numpy as np

from .fluctuations import clt_experiment, lln_experiment, RateTable, STATE_NAMES
from .model import ModelConfig, StateMeasure
from .pde import (DensityTrajectory, Grid1D, default_domain, initial_cell_masses,
                  reference_ensemble, solve_pde)
from .rng import derive_stream
from .simulate import SimScheme
from .spde import (NoiseField, covariance_quadrature, noise_covariance_mc,
                   sample_eta0, solve_linear_spde)
from .stats import ks_two_sample, normality_screen
from .testfunctions import bump, default_bank

__all__ = [
    "build_limit",
    "lln_driver",
    "qv_driver",
    "clt_driver",
    "noise_driver",
    "spde_compare_driver",
    "default_noise_tuples",
    "SLOPE_WINDOWS",
]

# acceptance windows for the fitted LLN rate, by dimension
SLOPE_WINDOWS = {1: (-0.62, -0.38), 2: (-0.62, -0.30), 3: (-0.45, -0.22)}


def build_limit(config: ModelConfig, t_end: float, grid_cells: int,
                dt_pde: float | None = None, store_dt: float | None = None,
                use_fft: bool = True) -> DensityTrajectory:
    """Solve the d=1 limit on an auto-sized domain at CFL-limited step."""
    lo, hi = default_domain(config, t_end)
    grid = Grid1D(lo, hi, grid_cells)
    if dt_pde is None:
        smax = config.diffusion.bound
        vmax = config.drift.bound
        dt_pde = min(
            0.35 * grid.h**2 / (smax**2) if smax > 0 else np.inf,
            0.35 * grid.h / vmax if vmax > 0 else np.inf,
            t_end / 64,
        )
    if store_dt is None:
        store_dt = t_end / 200
    store = np.arange(0.0, t_end + store_dt / 2, store_dt)
    return solve_pde(config, grid, t_end, dt_pde, store_times=store, use_fft=use_fft)


def lln_driver(config: ModelConfig, ns, reps: int, t_end: float, dt: float,
               base_seed: int, workers: int = 1, grid_cells: int = 512,
               n_ref: int = 100_000, n_proj: int = 128, mode: str = "split_step"):
    """LLN rate sweep; returns (RateTable, fit, slope window, limit)."""
    scheme = SimScheme(dt, (t_end,), mode=mode)
    if config.d == 1:
        limit = build_limit(config, t_end, grid_cells)
    else:
        if n_ref < 10 * max(ns):
            raise ValueError("reference ensemble must be >= 10x the largest N")
        ref = reference_ensemble(config, n_ref, derive_stream(base_seed, "reference"),
                                 scheme)
        limit = StateMeasure.from_ensemble(ref.snapshots[-1])
    table = lln_experiment(config, ns, reps, scheme, limit, base_seed,
                           workers=workers, n_proj=n_proj)
    fit = table.fit()
    window = SLOPE_WINDOWS.get(config.d, SLOPE_WINDOWS[3])
    return table, fit, window, limit


def qv_driver(config: ModelConfig, n: int, reps: int, t_end: float, dt: float,
              base_seed: int, workers: int = 1, grid_cells: int = 512,
              bank=None, qv_floor: float = 1e-3):
    """Ito isometry check: per (state, phi), E[M~_T^2] and the formula QV.

    E[M~_T^2] is estimated two ways: the plain mean of squared terminal
    values and the mean realized quadratic variation (sum of squared
    martingale increments), which is unbiased for the same expectation with
    far smaller variance; the verdict uses the latter.
    """
    bank = bank if bank is not None else default_bank()
    limit = build_limit(config, t_end, grid_cells)
    samples = clt_experiment(config, n, reps, bank, (0.0, t_end), limit,
                             base_seed, workers=workers, dt=dt)
    m2 = np.mean([s.martingale[-1] ** 2 for s in samples], axis=0)
    rqv = np.mean([s.realized_qv[-1] for s in samples], axis=0)
    qv = np.mean([s.qv[-1] for s in samples], axis=0)
    rows = []
    all_ok = True
    for e in range(3):
        for b, phi in enumerate(bank):
            nondegenerate = qv[e, b] >= qv_floor
            ratio = rqv[e, b] / qv[e, b] if qv[e, b] > 0 else np.nan
            ratio_plain = m2[e, b] / qv[e, b] if qv[e, b] > 0 else np.nan
            ok = (not nondegenerate) or (0.9 <= ratio <= 1.1)
            all_ok &= ok
            rows.append({"state": STATE_NAMES[e], "phi_id": phi.name,
                         "mean_m2": float(m2[e, b]),
                         "mean_realized_qv": float(rqv[e, b]),
                         "mean_formula_qv": float(qv[e, b]),
                         "ratio": float(ratio), "ratio_plain": float(ratio_plain),
                         "checked": bool(nondegenerate), "ok": bool(ok)})
    return rows, bool(all_ok), limit


def clt_driver(config: ModelConfig, n: int, reps: int, t_end: float, dt: float,
               base_seed: int, workers: int = 1, grid_cells: int = 512,
               bank=None, checkpoints=None):
    """Fluctuation projections at checkpoints plus initial-time normality
    screens."""
    bank = bank if bank is not None else default_bank()
    if checkpoints is None:
        checkpoints = (0.0, t_end / 4, t_end / 2, 3 * t_end / 4, t_end)
    limit = build_limit(config, t_end, grid_cells)
    samples = clt_experiment(config, n, reps, bank, checkpoints, limit,
                             base_seed, workers=workers, dt=dt)
    screens = {}
    if reps >= 100:
        eta0 = np.stack([s.eta[0] for s in samples])  # (reps, 3, B)
        for e in (0, 1):
            for b, phi in enumerate(bank):
                x = eta0[:, e, b]
                if x.std() > 1e-12:
                    v = normality_screen(x)
                    screens[f"eta0_{STATE_NAMES[e]}_{phi.name}"] = v.to_dict()
    return samples, screens, limit


def default_noise_tuples(t_end: float, bank=None):
    """Five nondegenerate and two disjoint-support covariance tuples.

    Nondegenerate pairs are chosen with strong correlation (same function,
    or two even bumps of similar shape) so the Monte Carlo covariance at
    10^4 paths resolves the 5 percent window with margin; the degenerate
    bumps sit in the density tails so the absolute tolerance dominates the
    estimator noise.
    """
    bank = bank if bank is not None else default_bank()
    gh0, gh1, b0 = bank[0], bank[1], bank[4]
    half = t_end / 2
    nondegenerate = [
        (gh0, gh0, half, half),
        (gh1, gh1, t_end, t_end),
        (b0, b0, t_end, t_end),
        (gh0, b0, t_end, t_end),
        (gh1, gh1, 0.75 * t_end, t_end),
    ]
    left = bump(-3.0, 1.2, name="bump_left")
    right = bump(3.0, 1.2, name="bump_right")
    degenerate = [(left, right, half, half), (left, right, t_end, t_end)]
    return nondegenerate, degenerate


def noise_driver(config: ModelConfig, t_end: float, dt: float, base_seed: int,
                 n_paths: int = 10_000, grid_cells: int = 256,
                 rel_tol: float = 0.05, abs_tol: float = 1e-3, tuples=None):
    """Monte Carlo vs quadrature covariance of the white-noise construction."""
    limit = build_limit(config, t_end, grid_cells, store_dt=dt)
    if tuples is None:
        nondeg, deg = default_noise_tuples(t_end)
    else:
        nondeg, deg = tuples
    rows = []
    all_ok = True
    for kind, tups in (("nondegenerate", nondeg), ("degenerate", deg)):
        for j, (p1, p2, t, s) in enumerate(tups):
            rng = derive_stream(base_seed, f"noise-{kind}", j)
            quad = covariance_quadrature(p1, p2, t, s, limit, config)
            mc, _, _ = noise_covariance_mc(p1, p2, t, s, limit, config,
                                           n_paths, dt, rng)
            if kind == "nondegenerate":
                err = abs(mc - quad) / abs(quad)
                ok = err <= rel_tol
            else:
                err = abs(mc - quad)
                ok = err <= abs_tol
            all_ok &= ok
            rows.append({"kind": kind, "phi1": p1.name, "phi2": p2.name,
                         "t": t, "s": s, "mc_cov": mc, "quad_cov": quad,
                         "error": err, "ok": bool(ok)})
    return rows, bool(all_ok), limit


def spde_compare_driver(config: ModelConfig, n: int, reps: int, t_end: float,
                        dt: float, base_seed: int, workers: int = 1,
                        grid_cells: int = 256, refine: int = 8, bank=None,
                        alpha: float = 0.01, var_window=(0.8, 1.25),
                        checkpoints=None):
    """Particle fluctuations vs limit-SPDE fluctuations, projection by
    projection.

    The deterministic limit is solved on a grid ``refine`` times finer than
    the SPDE grid and restricted for the SPDE coefficients; both systems
    use the same time step.
    """
    bank = bank if bank is not None else default_bank()[:5]
    if checkpoints is None:
        checkpoints = (0.0, t_end / 2, t_end)
    fine = build_limit(config, t_end, grid_cells * refine, store_dt=dt)
    coarse = fine.restrict(refine)
    p0 = coarse.masses[0]

    samples = clt_experiment(config, n, reps, bank, checkpoints, fine,
                             base_seed, workers=workers, dt=dt)

    n_steps = int(round(t_end / dt))
    grid = coarse.grid
    spde_rows = np.empty((reps, len(checkpoints), 3, len(bank)))
    for rep in range(reps):
        rng = derive_stream(base_seed, "spde", rep)
        eta0 = sample_eta0(p0, grid, rng)
        noise = NoiseField(grid, dt, n_steps, rng)
        field = solve_linear_spde(coarse, eta0, noise, t_end, dt, config,
                                  store_times=checkpoints)
        for ti, t in enumerate(checkpoints):
            for e in range(3):
                for b, phi in enumerate(bank):
                    spde_rows[rep, ti, e, b] = field.project(t, phi, e)

    particle_eta = np.stack([s.eta for s in samples])  # (reps, n_t, 3, B)
    verdicts = []
    all_ok = True
    t_idx = len(checkpoints) - 1
    for e in (0, 1):
        for b, phi in enumerate(bank):
            a = particle_eta[:, t_idx, e, b]
            s = spde_rows[:, t_idx, e, b]
            ks = ks_two_sample(a, s)
            var_ratio = float(a.var(ddof=1) / s.var(ddof=1))
            ok = (not ks.rejects(alpha)) and var_window[0] <= var_ratio <= var_window[1]
            all_ok &= ok
            verdicts.append({"state": STATE_NAMES[e], "phi_id": phi.name,
                             "ks_stat": ks.statistic, "ks_p": ks.p_value,
                             "var_ratio": var_ratio, "ok": bool(ok)})
    return samples, spde_rows, checkpoints, bank, verdicts, bool(all_ok)
