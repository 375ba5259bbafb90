import numpy as np
import pytest

from mfsir.model import DiffusionSpec, DriftSpec, KernelSpec
from mfsir.pde import DensityTrajectory, Grid1D, MeanFieldOperator, initial_cell_masses, solve_pde
from mfsir.rng import derive_stream
from mfsir.spde import (DIFF_I, DIFF_R, DIFF_S, INFECTION, RECOVERY, NoiseField,
                        build_martingale_increment, covariance_quadrature,
                        increment_components, noise_covariance_mc, sample_eta0,
                        solve_linear_spde)
from mfsir.testfunctions import bump, constant_one, default_bank, gauss_hermite

from conftest import make_config
from oracles import mixture_moment


@pytest.fixture(scope="module")
def limit256():
    cfg = make_config()
    grid = Grid1D(-10, 10, 256)
    dt = 0.35 * grid.h**2 / 0.25
    return cfg, solve_pde(cfg, grid, 1.0, dt, store_times=np.arange(0, 1.001, 0.01))


def test_noise_field_normalization():
    grid = Grid1D(-5, 5, 64)
    noise = NoiseField(grid, 0.02, 50, derive_stream(0, "nf", 0))
    assert noise.increments.shape == (50, 5, 64)
    var = noise.increments.var()
    assert var == pytest.approx(0.02 * grid.h, rel=0.05)


def test_noise_independence():
    grid = Grid1D(-5, 5, 32)
    noise = NoiseField(grid, 0.01, 200, derive_stream(1, "nf", 0))
    flat = noise.increments.reshape(200, 5, 32)
    for a in range(5):
        for b in range(a + 1, 5):
            r = np.corrcoef(flat[:, a, :].ravel(), flat[:, b, :].ravel())[0, 1]
            assert abs(r) <= 3 / np.sqrt(200 * 32)


def test_sample_eta0_degenerate():
    grid = Grid1D(0, 1, 16)
    p = np.zeros((3, 16))
    p[1, 7] = 1.0
    eta = sample_eta0(p, grid, derive_stream(2, "e0", 0))
    assert np.all(eta == 0.0)


def test_sample_eta0_total_mass_zero():
    grid = Grid1D(-8, 8, 64)
    cfg = make_config()
    p = initial_cell_masses(cfg, grid)
    p /= p.sum()
    for rep in range(50):
        eta = sample_eta0(p, grid, derive_stream(3, "e0", rep))
        assert abs(eta.sum()) < 1e-12


def test_sample_eta0_variance_matches_quadrature():
    grid = Grid1D(-8, 8, 128)
    cfg = make_config()
    p = initial_cell_masses(cfg, grid)
    p /= p.sum()
    phi = gauss_hermite(0, 2.0)
    vals = np.empty(10_000)
    rng = derive_stream(4, "e0", 0)
    for k in range(vals.size):
        eta = sample_eta0(p, grid, rng)
        vals[k] = float(np.dot(phi.value(grid.centers), eta[0]))
    m1 = float(np.dot(phi.value(grid.centers), p[0]))
    m2 = float(np.dot(phi.value(grid.centers) ** 2, p[0]))
    assert vals.var() == pytest.approx(m2 - m1 * m1, rel=0.10)


def test_increment_zero_function(limit256):
    cfg, traj = limit256
    grid = traj.grid
    masses = traj.interp(0.5)
    xi = NoiseField(grid, 0.01, 1, derive_stream(5, "inc", 0)).step(0)

    class Zero:
        def value(self, x):
            return np.zeros_like(x)

        grad = value

    d = build_martingale_increment(xi, masses, grid, cfg, Zero())
    assert d == (0.0, 0.0, 0.0)


def test_increment_vanishing_densities(limit256):
    cfg, traj = limit256
    grid = traj.grid
    masses = np.zeros((3, grid.n_cells))
    masses[0] = traj.interp(0.0)[0]
    xi = NoiseField(grid, 0.01, 1, derive_stream(6, "inc", 0)).step(0)
    _, d_i, d_r = build_martingale_increment(xi, masses, grid, cfg,
                                             gauss_hermite(0, 1.0))
    assert d_i == 0.0 and d_r == 0.0  # no infected mass: no I/R noise


def test_increment_variance_identity(limit256):
    cfg, traj = limit256
    grid = traj.grid
    masses = traj.interp(0.5)
    op = MeanFieldOperator(cfg, grid)
    k_i = op.infection_field(masses[1])
    phi = gauss_hermite(0, 2.0)
    dt = 0.01
    rng = derive_stream(7, "inc", 0)
    draws = np.empty((8000, 3))
    for k in range(draws.shape[0]):
        xi = np.sqrt(dt * grid.h) * rng.standard_normal((5, grid.n_cells))
        draws[k] = build_martingale_increment(xi, masses, grid, cfg, phi, k_i)
    g = phi.grad(grid.centers)
    v = phi.value(grid.centers)
    expect_s = dt * (np.dot(masses[0], (0.5 * g) ** 2) + np.dot(masses[0], k_i * v * v))
    assert draws[:, 0].var() == pytest.approx(expect_s, rel=0.10)


def test_w2_w3_sign_coupling(limit256):
    """Infection noise enters S and I with opposite signs and identical
    magnitude; recovery couples I and R likewise."""
    cfg, traj = limit256
    grid = traj.grid
    masses = traj.interp(0.5)
    op = MeanFieldOperator(cfg, grid)
    k_i = op.infection_field(masses[1])
    sigma = np.stack([np.asarray(cfg.diffusion.scalar_at(grid.centers, e), dtype=float)
                      for e in range(3)])
    phi = gauss_hermite(0, 1.5)
    xi = np.zeros((5, grid.n_cells))
    xi[INFECTION] = 1.0
    comp = increment_components(xi, masses, k_i, sigma, cfg.gamma, grid.h,
                                phi.value(grid.centers), phi.grad(grid.centers))
    d_s, d_i, d_r = build_martingale_increment(xi, masses, grid, cfg, phi, k_i)
    assert d_s == -comp[INFECTION] and d_i == +comp[INFECTION] and d_r == 0.0
    xi = np.zeros((5, grid.n_cells))
    xi[RECOVERY] = 1.0
    d_s, d_i, d_r = build_martingale_increment(xi, masses, grid, cfg, phi, k_i)
    assert d_s == 0.0 and d_i == -d_r and d_r > 0.0


def test_covariance_trivial_cases(limit256):
    cfg, traj = limit256

    class Zero:
        def value(self, x):
            return np.zeros_like(x)

        grad = value

    phi = gauss_hermite(0, 1.0)
    assert covariance_quadrature(Zero(), phi, 1.0, 1.0, traj, cfg) == 0.0
    left = bump(-2.0, 1.5)
    right = bump(2.0, 1.5)
    assert covariance_quadrature(left, right, 1.0, 0.5, traj, cfg) == pytest.approx(0.0, abs=1e-15)


def test_covariance_mc_vs_quadrature(limit256):
    cfg, traj = limit256
    phi = gauss_hermite(0, 2.0)
    quad = covariance_quadrature(phi, phi, 0.5, 0.5, traj, cfg)
    mc, a, b = noise_covariance_mc(phi, phi, 0.5, 0.5, traj, cfg, 6000, 0.01,
                                   derive_stream(8, "mc", 0))
    assert mc == pytest.approx(quad, rel=0.08)
    np.testing.assert_array_equal(a, b)


def test_covariance_mc_cross_times(limit256):
    cfg, traj = limit256
    phi = gauss_hermite(1, 1.0)
    quad = covariance_quadrature(phi, phi, 0.5, 1.0, traj, cfg)
    # Cov(M_s, M_t) = Var to the earlier time: equals quadrature to 0.5
    quad_half = covariance_quadrature(phi, phi, 0.5, 0.5, traj, cfg)
    assert quad == quad_half
    mc, _, _ = noise_covariance_mc(phi, phi, 0.5, 1.0, traj, cfg, 6000, 0.01,
                                   derive_stream(9, "mc", 0))
    assert mc == pytest.approx(quad, rel=0.10)


def test_spde_zero_inputs(limit256):
    cfg, traj = limit256
    grid = traj.grid
    noise = NoiseField(grid, 0.002, 500, derive_stream(10, "sp", 0))
    noise.increments[:] = 0.0
    eta0 = np.zeros((3, grid.n_cells))
    field = solve_linear_spde(traj, eta0, noise, 1.0, 0.002, cfg,
                              store_times=[0.0, 1.0])
    assert np.all(field.at(1.0) == 0.0)


def test_spde_heat_reduction():
    """No noise, no coupling: each channel obeys the heat equation."""
    cfg = make_config(gamma=0.0, kernel=KernelSpec("constant", 0.0),
                      drift=DriftSpec("zero"),
                      diffusion=DiffusionSpec("constant", (0.5, 0.5, 0.5)),
                      probs=(1.0, 0.0, 0.0))
    grid = Grid1D(-10, 10, 512)
    dtc = 0.35 * grid.h**2 / 0.25
    pde = solve_pde(cfg, grid, 1.0, dtc, store_times=np.arange(0, 1.001, 0.01))
    n_steps = int(round(1.0 / 0.002))
    noise = NoiseField(grid, 0.002, n_steps, derive_stream(11, "sp", 0))
    noise.increments[:] = 0.0
    eta0 = np.zeros((3, grid.n_cells))
    eta0[0] = (np.exp(-0.5 * grid.centers**2 / 0.25)
               / np.sqrt(2 * np.pi * 0.25) * grid.h)  # cell masses of N(0, 0.25)
    field = solve_linear_spde(pde, eta0, noise, 1.0, 0.002, cfg,
                              store_times=[1.0])
    var = 0.25 + 0.25
    exact = np.exp(-0.5 * grid.centers**2 / var) / np.sqrt(2 * np.pi * var)
    got = field.at(1.0)[0] / grid.h  # back to density values
    assert np.abs(got - exact).max() <= 1e-3


def test_spde_total_mass_conserved(limit256):
    cfg, traj = limit256
    grid = traj.grid
    n_steps = 250
    noise = NoiseField(grid, 0.002, n_steps, derive_stream(12, "sp", 0))
    eta0 = sample_eta0(np.clip(traj.masses[0], 0, None) / traj.masses[0].sum(),
                       grid, derive_stream(12, "e0", 0))
    field = solve_linear_spde(traj, eta0, noise, 0.5, 0.002, cfg,
                              store_times=np.arange(0, 0.5001, 0.1))
    t0_total = field.at(0.0).sum()
    for t in field.times:
        assert abs(field.at(t).sum() - t0_total) <= 1e-6


def test_spde_linearity(limit256):
    cfg, traj = limit256
    grid = traj.grid
    n_steps = 100
    rng = derive_stream(13, "sp", 0)
    p = np.clip(traj.masses[0], 0, None)
    p /= p.sum()
    eta_a = sample_eta0(p, grid, rng)
    eta_b = sample_eta0(p, grid, rng)
    na = NoiseField(grid, 0.002, n_steps, rng)
    nb = NoiseField(grid, 0.002, n_steps, rng)
    n_sum = NoiseField(grid, 0.002, n_steps, rng)
    n_sum.increments = na.increments + nb.increments

    def solve(e0, nz):
        return solve_linear_spde(traj, e0, nz, 0.2, 0.002, cfg,
                                 store_times=[0.2]).at(0.2)

    lhs = solve(eta_a + eta_b, n_sum)
    rhs = solve(eta_a, na) + solve(eta_b, nb)
    assert np.abs(lhs - rhs).max() <= 1e-10
    half = solve(0.5 * eta_a, NoiseField(grid, 0.002, n_steps, rng))
    # homogeneity with the zero noise field
    nz = NoiseField(grid, 0.002, n_steps, rng)
    nz.increments[:] = 0.0
    one = solve(eta_a, nz)
    two = solve(2.0 * eta_a, nz)
    assert np.abs(two - 2 * one).max() <= 1e-10


def test_noise_covariance_gaussianity(limit256):
    from mfsir.stats import normality_screen

    cfg, traj = limit256
    phi = gauss_hermite(0, 2.0)
    _, a, _ = noise_covariance_mc(phi, phi, 0.3, 0.3, traj, cfg, 4000, 0.01,
                                  derive_stream(14, "mc", 0))
    v = normality_screen(a)
    assert abs(v.extras["skew_z"]) < 5 and abs(v.extras["kurtosis_z"]) < 5
