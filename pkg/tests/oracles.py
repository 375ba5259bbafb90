"""Independent oracles used by the test suite.

Each oracle is deliberately implemented without touching the code paths it
checks: the CTMC oracle is an event-driven Gillespie chain over state
counts only, the transport oracle is a tiny direct-enumeration matcher,
and the quadrature oracle integrates with scipy on a dense grid.
"""
from __future__ import annotations

import itertools

import numpy as np


def gillespie_sir(n: int, beta: float, gamma: float, i0: int, t_grid,
                  rng: np.random.Generator):
    """Homogeneous stochastic SIR chain: infection rate beta*S*I/N, recovery
    rate gamma*I.  Returns I-counts sampled at t_grid."""
    s, i = n - i0, i0
    t = 0.0
    out = np.empty(len(t_grid), dtype=float)
    idx = 0
    t_grid = list(t_grid)
    while idx < len(t_grid):
        rate_inf = beta * s * i / n
        rate_rec = gamma * i
        total = rate_inf + rate_rec
        if total <= 0:
            while idx < len(t_grid):
                out[idx] = i
                idx += 1
            break
        dt = rng.exponential(1.0 / total)
        while idx < len(t_grid) and t + dt > t_grid[idx]:
            out[idx] = i
            idx += 1
        t += dt
        if rng.random() < rate_inf / total:
            s -= 1
            i += 1
        else:
            i -= 1
    return out


def w1_bruteforce(xa, xb):
    """Exact W1 for tiny equal-size uniform clouds by enumerating all
    assignments (n <= 7)."""
    xa = np.asarray(xa, dtype=float)
    xb = np.asarray(xb, dtype=float)
    if xa.ndim == 1:
        xa = xa[:, None]
    if xb.ndim == 1:
        xb = xb[:, None]
    n = xa.shape[0]
    assert n <= 7, "brute force assignment is factorial"
    best = np.inf
    for perm in itertools.permutations(range(n)):
        cost = sum(np.linalg.norm(xa[k] - xb[perm[k]]) for k in range(n)) / n
        best = min(best, cost)
    return best


def gauss_quadrature(fn, lo=-40.0, hi=40.0, n=200_001):
    """Dense midpoint quadrature of a scalar function."""
    h = (hi - lo) / n
    x = lo + h * (np.arange(n) + 0.5)
    return float(np.sum(fn(x)) * h)


def mixture_moment(phi, means, covs, weights):
    """<mu, phi> for a 1-D Gaussian mixture by dense quadrature."""
    means = np.asarray(means, dtype=float).ravel()
    sds = np.sqrt(np.asarray(covs, dtype=float).ravel())
    weights = np.asarray(weights, dtype=float)

    def dens(x):
        total = np.zeros_like(x)
        for w, m, s in zip(weights, means, sds):
            total += w * np.exp(-0.5 * ((x - m) / s) ** 2) / (s * np.sqrt(2 * np.pi))
        return total

    return gauss_quadrature(lambda x: phi(x) * dens(x))
