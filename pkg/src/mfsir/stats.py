"""Statistical verdicts: rate fitting, distribution comparison, normality
screening, covariance estimation with bootstrap intervals.

Verdicts are plain dataclasses that serialize into experiment manifests.
The primary convergence-in-law check downstream is the two-sample KS test
(particle vs SPDE projections); the one-sample normality screen is
secondary evidence and is flagged approximate because its null parameters
are estimated from the sample.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

__all__ = [
    "FitResult",
    "TestVerdict",
    "CovEstimate",
    "fit_power_law",
    "ks_two_sample",
    "normality_screen",
    "cov_with_ci",
]


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    slope_se: float
    r_squared: float

    def __post_init__(self):
        if not (np.isfinite(self.slope) and np.isfinite(self.intercept)):
            raise ValueError("fit produced non-finite coefficients")

    def to_dict(self):
        return {"slope": self.slope, "intercept": self.intercept,
                "slope_se": self.slope_se, "r_squared": self.r_squared}


@dataclass(frozen=True)
class TestVerdict:
    statistic: float
    p_value: float
    sample_sizes: tuple
    method: str
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.isnan(self.p_value) and not 0.0 <= self.p_value <= 1.0:
            raise ValueError("p-value outside [0, 1]")

    def rejects(self, alpha: float = 0.01) -> bool:
        return self.p_value < alpha

    def to_dict(self):
        out = {"statistic": self.statistic, "p_value": self.p_value,
               "sample_sizes": list(self.sample_sizes), "method": self.method}
        out.update(self.extras)
        return out


@dataclass(frozen=True)
class CovEstimate:
    value: float
    ci_low: float
    ci_high: float
    n: int

    def to_dict(self):
        return {"value": self.value, "ci_low": self.ci_low,
                "ci_high": self.ci_high, "n": self.n}


def fit_power_law(ns, means, ses=None) -> FitResult:
    """Least squares of log(mean) on log(N); slope SE from residuals."""
    ns = np.asarray(ns, dtype=float)
    means = np.asarray(means, dtype=float)
    if ns.size < 3:
        raise ValueError("need at least 3 rows to fit a rate")
    if np.any(means <= 0):
        raise ValueError("power-law fit needs positive means")
    x = np.log(ns)
    y = np.log(means)
    xm = x - x.mean()
    sxx = float(np.dot(xm, xm))
    slope = float(np.dot(xm, y) / sxx)
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    dof = max(ns.size - 2, 1)
    sigma2 = float(np.dot(resid, resid)) / dof
    slope_se = float(np.sqrt(sigma2 / sxx))
    ss_tot = float(np.dot(y - y.mean(), y - y.mean()))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.dot(resid, resid)) / ss_tot
    return FitResult(slope, intercept, slope_se, min(max(r2, 0.0), 1.0))


def ks_two_sample(a, b) -> TestVerdict:
    """Two-sample Kolmogorov-Smirnov with the asymptotic p-value."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 30 or b.size < 30:
        raise ValueError("KS needs at least 30 points per sample")
    res = sps.ks_2samp(a, b, method="asymp")
    return TestVerdict(float(res.statistic), float(res.pvalue),
                       (a.size, b.size), "ks_2samp_asymp")


def normality_screen(samples) -> TestVerdict:
    """One-sample KS against Normal(sample mean, sample variance), plus
    skewness and excess-kurtosis z-scores.  Flagged approximate: the null
    parameters are estimated, so the KS p-value is conservative only as a
    screen."""
    x = np.asarray(samples, dtype=float)
    if x.size < 100:
        raise ValueError("normality screen needs at least 100 points")
    sd = x.std(ddof=1)
    if sd == 0:
        raise ValueError("zero variance sample")
    res = sps.kstest(x, "norm", args=(x.mean(), sd))
    skew_z = float(sps.skewtest(x).statistic)
    kurt_z = float(sps.kurtosistest(x).statistic)
    return TestVerdict(float(res.statistic), float(res.pvalue), (x.size,),
                       "ks_normal_estimated",
                       extras={"approximate": True, "skew_z": skew_z, "kurtosis_z": kurt_z})


def cov_with_ci(u, v, n_boot: int = 2000, rng=None, level: float = 0.95) -> CovEstimate:
    """Empirical covariance with a percentile bootstrap interval."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.size < 100:
        raise ValueError("need paired samples of size >= 100")
    if rng is None:
        rng = np.random.default_rng(0)
    n = u.size

    def est(uu, vv):
        return float(np.mean(uu * vv) - uu.mean() * vv.mean())

    boots = np.empty(n_boot)
    for k in range(n_boot):
        idx = rng.integers(0, n, n)
        boots[k] = est(u[idx], v[idx])
    lo, hi = np.quantile(boots, [(1 - level) / 2, 1 - (1 - level) / 2])
    return CovEstimate(est(u, v), float(lo), float(hi), n)
