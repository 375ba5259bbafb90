"""Model definition: epidemic states, interaction kernels, drift and
diffusion families, initial laws.

Every shipped family is bounded, globally Lipschitz and smooth, so the
mean-field limit and the fluctuation analysis downstream are on solid
ground.  Families are deliberately parametric and few:

  infection kernel K : constant(beta) | gaussian(beta, ell) | bump(beta, r)
  pair drift V       : zero | saturating_attraction(a, ell)
                       | state_modulated(a, ell, weights[3][3])
  diffusion sigma    : constant (per-state scalar or matrix)
                       | smooth_bounded(base, amplitude, length) per state

All pointwise evaluators are pure functions of their arguments.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "EpidemicState",
    "Individual",
    "ParticleEnsemble",
    "KernelSpec",
    "DriftSpec",
    "DiffusionSpec",
    "GaussianMixture",
    "InitialLawSpec",
    "ModelConfig",
    "StateMeasure",
    "eval_K",
    "eval_V",
    "mean_field_drift",
    "mean_field_infection",
    "sample_initial",
]

KERNEL_FAMILIES = ("constant", "gaussian", "bump")
DRIFT_FAMILIES = ("zero", "saturating_attraction", "state_modulated")
DIFFUSION_FAMILIES = ("constant", "smooth_bounded")

# integer codes shared with the compiled backend
_KERNEL_CODE = {"constant": 0, "gaussian": 1, "bump": 2}
_DRIFT_CODE = {"zero": 0, "saturating_attraction": 1, "state_modulated": 2}


class EpidemicState(enum.IntEnum):
    """Individual infection state; the integer codes are fixed."""

    S = 0
    I = 1
    R = 2


STATES = (EpidemicState.S, EpidemicState.I, EpidemicState.R)


@dataclass(frozen=True)
class Individual:
    """One particle: a position in R^d plus an epidemic state."""

    position: np.ndarray
    state: EpidemicState

    def __post_init__(self):
        pos = np.atleast_1d(np.asarray(self.position, dtype=float))
        if not np.all(np.isfinite(pos)):
            raise ValueError("individual position must be finite")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "state", EpidemicState(self.state))


class ParticleEnsemble:
    """The microscopic state at one time: N positions plus N state tags.

    Stored as arrays (positions ``(N, d)`` float64, states ``(N,)`` int8);
    ``individuals`` exposes the per-particle view.
    """

    def __init__(self, positions, states, time: float = 0.0):
        positions = np.ascontiguousarray(positions, dtype=np.float64)
        if positions.ndim == 1:
            positions = positions[:, None]
        states = np.ascontiguousarray(states, dtype=np.int8)
        if positions.shape[0] != states.shape[0]:
            raise ValueError("positions and states must have equal length")
        if positions.shape[0] < 1:
            raise ValueError("ensemble needs at least one individual")
        if not np.all((states >= 0) & (states <= 2)):
            raise ValueError("states must be in {0, 1, 2}")
        if time < 0:
            raise ValueError("time must be nonnegative")
        self.positions = positions
        self.states = states
        self.time = float(time)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def d(self) -> int:
        return self.positions.shape[1]

    @property
    def individuals(self):
        return [Individual(self.positions[i].copy(), EpidemicState(int(self.states[i])))
                for i in range(self.n)]

    def state_counts(self):
        return np.bincount(self.states, minlength=3)

    def copy(self) -> "ParticleEnsemble":
        return ParticleEnsemble(self.positions.copy(), self.states.copy(), self.time)


@dataclass(frozen=True)
class KernelSpec:
    """Infection kernel K(x, y) >= 0, bounded by beta, globally Lipschitz."""

    family: str
    beta: float
    scale: float = 1.0  # length ell (gaussian) or support radius r (bump)

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.family != "constant" and self.scale <= 0:
            raise ValueError("kernel length must be > 0")

    @property
    def code(self) -> int:
        return _KERNEL_CODE[self.family]

    @property
    def bound(self) -> float:
        return self.beta

    @property
    def lipschitz(self) -> float:
        # sup of |d/dr K| over r >= 0 for each family
        if self.family == "constant":
            return 0.0
        if self.family == "gaussian":
            return self.beta * math.exp(-0.5) / self.scale
        # bump: max slope of exp(1 - 1/(1-u^2)) is 2.17036/r (numeric constant)
        return 2.1704 * self.beta / self.scale


@dataclass(frozen=True)
class DriftSpec:
    """Pairwise interaction drift V(x, e, y, f), bounded and Lipschitz.

    saturating_attraction: V = a (y - x) / (1 + |y - x|^2 / ell^2), an odd
    bounded attraction with sup norm a*ell/2.  state_modulated multiplies it
    by weights[e][f] in [-1, 1].
    """

    family: str
    a: float = 0.0
    ell: float = 1.0
    weights: tuple = ()

    def __post_init__(self):
        if self.family not in DRIFT_FAMILIES:
            raise ValueError(f"unknown drift family {self.family!r}")
        if self.family != "zero":
            if self.a < 0:
                raise ValueError("drift speed a must be >= 0")
            if self.ell <= 0:
                raise ValueError("drift length ell must be > 0")
        if self.family == "state_modulated":
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (3, 3):
                raise ValueError("state_modulated needs a 3x3 weight table")
            if np.any(np.abs(w) > 1.0 + 1e-12):
                raise ValueError("state weights must lie in [-1, 1]")
            object.__setattr__(self, "weights", tuple(map(tuple, w.tolist())))

    @property
    def code(self) -> int:
        return _DRIFT_CODE[self.family]

    @property
    def bound(self) -> float:
        if self.family == "zero":
            return 0.0
        return 0.5 * self.a * self.ell

    @property
    def lipschitz(self) -> float:
        # |dV/dr| <= a for the saturating profile
        return 0.0 if self.family == "zero" else self.a

    def weight_matrix(self) -> np.ndarray:
        if self.family == "state_modulated":
            return np.asarray(self.weights, dtype=float)
        return np.ones((3, 3))


@dataclass(frozen=True)
class DiffusionSpec:
    """State-dependent diffusion sigma(x, e).

    constant: per-state scalar (isotropic) or d x d matrix.
    smooth_bounded: per-state scalar field base + amp * exp(-|x|^2/(2 len^2)),
    isotropic, C-infinity, bounded in [base, base + amp].

    ``ellipticity`` is the declared lower bound on eigenvalues of sigma
    sigma^T; zero is allowed (degenerate test configurations switch the
    diffusion off entirely).
    """

    family: str
    values: tuple  # per state: scalar | matrix (constant); (base, amp, len) triples (smooth)

    def __post_init__(self):
        if self.family not in DIFFUSION_FAMILIES:
            raise ValueError(f"unknown diffusion family {self.family!r}")
        vals = self.values
        if len(vals) != 3:
            raise ValueError("diffusion needs one entry per state (S, I, R)")
        if self.family == "constant":
            norm = []
            for v in vals:
                arr = np.asarray(v, dtype=float)
                if arr.ndim == 0:
                    if arr < 0:
                        raise ValueError("scalar sigma must be >= 0")
                    norm.append(float(arr))
                elif arr.ndim == 2 and arr.shape[0] == arr.shape[1]:
                    norm.append(tuple(map(tuple, arr.tolist())))
                else:
                    raise ValueError("sigma must be a scalar or a square matrix")
            object.__setattr__(self, "values", tuple(norm))
        else:
            norm = []
            for v in vals:
                base, amp, length = (float(u) for u in v)
                if base < 0 or amp < 0 or length <= 0:
                    raise ValueError("smooth_bounded needs base, amp >= 0, length > 0")
                norm.append((base, amp, length))
            object.__setattr__(self, "values", tuple(norm))

    def is_scalar(self) -> bool:
        return self.family == "smooth_bounded" or all(
            not isinstance(v, tuple) for v in self.values
        )

    def sigma_matrix(self, state: int, d: int) -> np.ndarray:
        """Constant-family matrix for one state (raises for smooth_bounded)."""
        if self.family != "constant":
            raise ValueError("sigma_matrix is only defined for the constant family")
        v = self.values[state]
        if isinstance(v, tuple):
            return np.asarray(v, dtype=float)
        return float(v) * np.eye(d)

    def scalar_at(self, x, state: int):
        """Isotropic sigma at positions x ((n,) points in d=1 or (n, d))."""
        if self.family == "constant":
            v = self.values[state]
            if isinstance(v, tuple):
                raise ValueError("matrix diffusion has no scalar value")
            if np.ndim(x) == 0:
                return float(v)
            return np.full(np.shape(x)[0], float(v))
        base, amp, length = self.values[state]
        x = np.asarray(x, dtype=float)
        r2 = x * x if x.ndim <= 1 else np.sum(x * x, axis=-1)
        return base + amp * np.exp(-0.5 * r2 / (length * length))

    @property
    def bound(self) -> float:
        out = 0.0
        for s, v in enumerate(self.values):
            if self.family == "constant":
                if isinstance(v, tuple):
                    out = max(out, float(np.linalg.norm(np.asarray(v), 2)))
                else:
                    out = max(out, float(v))
            else:
                base, amp, _ = v
                out = max(out, base + amp)
        return out

    @property
    def ellipticity(self) -> float:
        """Uniform lower bound on eigenvalues of sigma sigma^T."""
        lams = []
        for v in self.values:
            if self.family == "constant":
                if isinstance(v, tuple):
                    m = np.asarray(v)
                    lams.append(float(np.linalg.eigvalsh(m @ m.T).min()))
                else:
                    lams.append(float(v) ** 2)
            else:
                base, _, _ = v
                lams.append(base**2)
        return min(lams)


@dataclass(frozen=True)
class GaussianMixture:
    """Spatial Gaussian mixture: weights, means (k, d), covariances (k, d, d)."""

    weights: tuple
    means: tuple
    covs: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        means = np.asarray(self.means, dtype=float)
        covs = np.asarray(self.covs, dtype=float)
        if means.ndim == 1:
            means = means[:, None]
        if covs.ndim == 1:
            covs = covs[:, None, None]
        elif covs.ndim == 2:
            covs = covs[:, :, None] if covs.shape[1] == 1 else covs[None]
        if w.ndim != 1 or w.size != means.shape[0] or w.size != covs.shape[0]:
            raise ValueError("mixture weights/means/covs must align")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("mixture weights must be >= 0 and sum to 1")
        for c in covs:
            if np.any(np.linalg.eigvalsh(c) <= 0):
                raise ValueError("mixture covariances must be positive definite")
        object.__setattr__(self, "weights", tuple(w.tolist()))
        object.__setattr__(self, "means", tuple(map(tuple, means.tolist())))
        object.__setattr__(self, "covs", tuple(tuple(map(tuple, c)) for c in covs.tolist()))

    @property
    def d(self) -> int:
        return len(self.means[0])

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        w = np.asarray(self.weights)
        comp = rng.choice(w.size, size=n, p=w)
        out = np.empty((n, self.d))
        for k in range(w.size):
            idx = np.flatnonzero(comp == k)
            if idx.size == 0:
                continue
            mean = np.asarray(self.means[k])
            cov = np.asarray(self.covs[k])
            chol = np.linalg.cholesky(cov)
            out[idx] = mean + rng.standard_normal((idx.size, self.d)) @ chol.T
        return out

    def pdf(self, x: np.ndarray) -> np.ndarray:
        """Density at points x (n, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.d:
            x = x.T if x.shape[0] == self.d else x
        total = np.zeros(x.shape[0])
        for wk, mk, ck in zip(self.weights, self.means, self.covs):
            mean = np.asarray(mk)
            cov = np.asarray(ck)
            diff = x - mean
            sol = np.linalg.solve(cov, diff.T).T
            quad = np.sum(diff * sol, axis=1)
            norm = math.sqrt(((2 * math.pi) ** self.d) * np.linalg.det(cov))
            total += wk * np.exp(-0.5 * quad) / norm
        return total

    def cdf_1d(self, x: np.ndarray) -> np.ndarray:
        """Mixture CDF, d=1 only (used for exact cell masses)."""
        if self.d != 1:
            raise ValueError("cdf_1d requires d=1")
        from scipy.stats import norm

        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for wk, mk, ck in zip(self.weights, self.means, self.covs):
            out += wk * norm.cdf(x, loc=mk[0], scale=math.sqrt(ck[0][0]))
        return out


@dataclass(frozen=True)
class InitialLawSpec:
    """Initial law mu_0: state probabilities plus a spatial mixture per state."""

    state_probs: tuple
    mixtures: tuple  # one GaussianMixture per state

    def __post_init__(self):
        p = np.asarray(self.state_probs, dtype=float)
        if p.shape != (3,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("state probabilities must be >= 0 and sum to 1")
        object.__setattr__(self, "state_probs", tuple(p.tolist()))
        if len(self.mixtures) != 3:
            raise ValueError("need one spatial mixture per state")
        d = {m.d for m in self.mixtures}
        if len(d) != 1:
            raise ValueError("all mixtures must share the dimension")

    @property
    def d(self) -> int:
        return self.mixtures[0].d


@dataclass(frozen=True)
class ModelConfig:
    """A full problem instance."""

    d: int
    gamma: float
    kernel: KernelSpec
    drift: DriftSpec
    diffusion: DiffusionSpec
    initial: InitialLawSpec

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension d must be >= 1")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.initial.d != self.d:
            raise ValueError("initial law dimension does not match d")

    @property
    def moment_order(self) -> int:
        # A1 moment order 4*ceil(d/2); Gaussian mixtures have all moments
        return 4 * math.ceil(self.d / 2)


class StateMeasure:
    """A finite measure on R^d x {S, I, R}: one weighted point cloud per state."""

    def __init__(self, clouds):
        # clouds: dict state -> (points (m, d), weights (m,))
        self.clouds = {}
        for e in STATES:
            pts, w = clouds.get(int(e), (np.zeros((0, 1)), np.zeros(0)))
            pts = np.atleast_2d(np.asarray(pts, dtype=float))
            if pts.size == 0:
                pts = pts.reshape(0, pts.shape[1] if pts.ndim == 2 and pts.shape[1] else 1)
            w = np.asarray(w, dtype=float)
            if pts.shape[0] != w.shape[0]:
                raise ValueError("points and weights must align")
            self.clouds[int(e)] = (pts, w)

    @classmethod
    def from_ensemble(cls, ens: ParticleEnsemble) -> "StateMeasure":
        clouds = {}
        wt = 1.0 / ens.n
        for e in STATES:
            idx = np.flatnonzero(ens.states == int(e))
            clouds[int(e)] = (ens.positions[idx], np.full(idx.size, wt))
        return cls(clouds)

    def mass(self, state=None) -> float:
        if state is None:
            return float(sum(w.sum() for _, w in self.clouds.values()))
        return float(self.clouds[int(state)][1].sum())


def eval_K(spec: KernelSpec, x, y) -> float:
    """Infection kernel between two locations."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise ValueError("x and y must share the dimension")
    if spec.family == "constant":
        return spec.beta
    r2 = float(np.sum((x - y) ** 2))
    if spec.family == "gaussian":
        return spec.beta * math.exp(-0.5 * r2 / (spec.scale**2))
    u2 = r2 / spec.scale**2
    if u2 >= 1.0:
        return 0.0
    return spec.beta * math.exp(1.0 - 1.0 / (1.0 - u2))


def eval_V(spec: DriftSpec, x, e, y, f) -> np.ndarray:
    """Pairwise drift exerted on (x, e) by (y, f)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise ValueError("x and y must share the dimension")
    if spec.family == "zero":
        return np.zeros_like(x)
    diff = y - x
    base = spec.a * diff / (1.0 + np.sum(diff**2) / spec.ell**2)
    if spec.family == "state_modulated":
        base = base * spec.weight_matrix()[int(e), int(f)]
    return base


def mean_field_drift(spec: DriftSpec, x, e, measure: StateMeasure) -> np.ndarray:
    """integral of V(x, e, y, f) measure(dy, df), ascending point order."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if spec.family == "zero":
        return np.zeros_like(x)
    total = measure.mass()
    if total > 1.0 + 1e-9:
        raise ValueError("measure mass exceeds 1")
    out = np.zeros_like(x)
    for f in STATES:
        pts, w = measure.clouds[int(f)]
        for j in range(pts.shape[0]):
            out = out + w[j] * eval_V(spec, x, e, pts[j], f)
    return out


def mean_field_infection(spec: KernelSpec, x, infected: StateMeasure | tuple) -> float:
    """integral of K(x, y) over the infected-channel measure."""
    if isinstance(infected, StateMeasure):
        pts, w = infected.clouds[int(EpidemicState.I)]
    else:
        pts, w = infected
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        w = np.asarray(w, dtype=float)
    out = 0.0
    for j in range(pts.shape[0]):
        out += w[j] * eval_K(spec, x, pts[j])
    return out


def sample_initial(spec: InitialLawSpec, n: int, rng: np.random.Generator) -> ParticleEnsemble:
    """n i.i.d. draws from the initial law."""
    if n < 1:
        raise ValueError("need n >= 1")
    states = rng.choice(3, size=n, p=np.asarray(spec.state_probs)).astype(np.int8)
    positions = np.empty((n, spec.d))
    for e in STATES:
        idx = np.flatnonzero(states == int(e))
        if idx.size:
            positions[idx] = spec.mixtures[int(e)].sample(idx.size, rng)
    return ParticleEnsemble(positions, states, 0.0)
