"""Power-law relaxation fits of intraday profiles and cross-sectional
statistics of the fitted exponents.

The profile is modeled as S(tau) = A * tau^-beta over a scaling range of
bins; the fit is ordinary least squares in log-log space, matching the
reported standard errors and t statistics.  Default ranges: bins 1..120
for market profiles, 1..80 for single stocks.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats

from .spread import IntradayProfile

MARKET_TAU_RANGE = (1, 120)
STOCK_TAU_RANGE = (1, 80)


@dataclass(frozen=True)
class PowerLawFit:
    beta: float
    amplitude: float          # CNY at tau = 1
    stderr: float
    t_stat: float
    dof: int
    tau_min: int
    tau_max: int
    residual_variance: float  # in log space
    stock_id: str = ""

    def to_dict(self) -> dict:
        return {"stock_id": self.stock_id, "beta": self.beta,
                "stderr": self.stderr, "t_stat": self.t_stat,
                "dof": self.dof, "tau_min": self.tau_min,
                "tau_max": self.tau_max, "amplitude": self.amplitude}


class Moments(NamedTuple):
    mu: float
    sigma: float       # sample standard deviation (n-1)
    skewness: float    # standardized third central moment
    kurtosis: float    # standardized fourth central moment, ~3 for normal


@dataclass(frozen=True)
class Chi2Result:
    chi2: float
    dof: int
    critical: float
    level: float
    bins: int
    rejected: bool

    @property
    def verdict(self) -> str:
        return "rejected" if self.rejected else "not_rejected"


@dataclass(frozen=True)
class ExponentSample:
    """Per-stock relaxation exponents with their distribution summary."""

    stock_ids: tuple[str, ...]
    betas: np.ndarray
    moments: Moments
    chi2: Chi2Result

    def to_dict(self) -> dict:
        return {"n": len(self.betas), "mu": self.moments.mu,
                "sigma": self.moments.sigma,
                "skewness": self.moments.skewness,
                "kurtosis": self.moments.kurtosis,
                "chi2": self.chi2.chi2, "dof": self.chi2.dof,
                "critical": self.chi2.critical, "level": self.chi2.level,
                "verdict": self.chi2.verdict}


@dataclass(frozen=True)
class RelaxationClass:
    beta: float
    theta_endogenous: float
    theta_exogenous: float
    label: str                # endogenous | exogenous | indeterminate
    theta_ref: float
    tolerance: float

    def to_dict(self) -> dict:
        return {"beta": self.beta, "theta_endogenous": self.theta_endogenous,
                "theta_exogenous": self.theta_exogenous, "label": self.label,
                "theta_ref": self.theta_ref, "tolerance": self.tolerance}


def fit_power_law(profile: IntradayProfile | np.ndarray,
                  tau_range: tuple[int, int] = STOCK_TAU_RANGE,
                  stock_id: str = "") -> PowerLawFit:
    """OLS of ln S(tau) on ln tau over tau_range (inclusive, 1-based).

    Every profile value inside the range must be strictly positive; the
    offending bins are listed otherwise.  beta is minus the slope, the
    amplitude is exp(intercept), and t_stat = beta / stderr (infinite for
    an exact power law, 0 for an exactly flat profile).
    """
    values = profile.values if isinstance(profile, IntradayProfile) else np.asarray(profile)
    if isinstance(profile, IntradayProfile) and not stock_id:
        stock_id = profile.source_id
    tau_min, tau_max = int(tau_range[0]), int(tau_range[1])
    if not 1 <= tau_min < tau_max <= len(values):
        raise ValueError(f"tau range [{tau_min}, {tau_max}] outside profile "
                         f"of {len(values)} bins")
    y = values[tau_min - 1:tau_max]
    n = len(y)
    if n < 3:
        raise ValueError("need at least 3 points in the scaling range")
    bad = np.flatnonzero(y <= 0) + tau_min
    if len(bad):
        raise ValueError(
            f"profile not positive in the scaling range at tau={bad.tolist()}")

    x = np.log(np.arange(tau_min, tau_max + 1, dtype=np.float64))
    ly = np.log(y)
    xbar, ybar = x.mean(), ly.mean()
    dx = x - xbar
    sxx = float(dx @ dx)
    slope = float(dx @ (ly - ybar)) / sxx
    intercept = ybar - slope * xbar
    resid = ly - intercept - slope * x
    dof = n - 2
    s2 = float(resid @ resid) / dof
    stderr = float(np.sqrt(s2 / sxx))
    beta = -slope
    if stderr > 0:
        t_stat = beta / stderr
    else:
        t_stat = np.inf if beta != 0 else 0.0
    return PowerLawFit(beta=beta, amplitude=float(np.exp(intercept)),
                       stderr=stderr, t_stat=float(t_stat), dof=dof,
                       tau_min=tau_min, tau_max=tau_max,
                       residual_variance=s2, stock_id=stock_id)


class TTestResult(NamedTuple):
    t_abs: float
    critical: float
    reject_zero_slope: bool
    quantile: float
    dof: int


def regression_t_test(fit: PowerLawFit,
                      confidence_quantile: float = 0.99995) -> TTestResult:
    """Compare |beta/stderr| against the Student-t quantile at the fit's
    degrees of freedom; rejecting means the slope is significantly
    nonzero."""
    if not 0.5 < confidence_quantile < 1.0:
        raise ValueError("confidence_quantile must lie in (0.5, 1)")
    if fit.dof < 1:
        raise ValueError("need dof >= 1")
    critical = float(stats.t.ppf(confidence_quantile, fit.dof))
    t_abs = abs(fit.t_stat)
    return TTestResult(t_abs, critical, bool(t_abs > critical),
                       confidence_quantile, fit.dof)


def exponent_moments(betas: Sequence[float]) -> Moments:
    """Sample mean, standard deviation (n-1), and the standardized third
    and fourth central moments (kurtosis non-excess).  Below four values
    the higher moments are degenerate but still well defined."""
    x = np.asarray(betas, dtype=np.float64)
    if len(x) < 2:
        raise ValueError("need at least 2 values")
    mu = float(x.mean())
    d = x - mu
    m2 = float(np.mean(d ** 2))
    if m2 == 0.0:
        raise ValueError("zero variance; skewness and kurtosis undefined")
    sigma = float(np.sqrt(float(d @ d) / (len(x) - 1)))
    skew = float(np.mean(d ** 3) / m2 ** 1.5)
    kurt = float(np.mean(d ** 4) / m2 ** 2)
    return Moments(mu, sigma, skew, kurt)


def chi2_normality(betas: Sequence[float], bins: int = 100,
                   level: float = 0.9999) -> Chi2Result:
    """Pearson chi-squared test of normality with moment-fitted parameters.

    The fitted N(mean, sd^2) is cut into ``bins`` equal-probability cells;
    dof = bins - 3 accounts for the two estimated parameters.  The null is
    rejected when the statistic reaches the chi-squared quantile at
    ``level``.
    """
    x = np.asarray(betas, dtype=np.float64)
    if bins < 4:
        raise ValueError("need at least 4 bins (dof = bins - 3)")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    n = len(x)
    if n < bins:
        raise ValueError(
            f"expected count {n}/{bins} per cell is below 1; use fewer bins")
    mu = float(x.mean())
    sd = float(x.std(ddof=1))
    if sd == 0.0:
        raise ValueError("zero variance sample")
    edges = mu + sd * stats.norm.ppf(np.arange(1, bins) / bins)
    observed = np.bincount(np.searchsorted(edges, x), minlength=bins)
    expected = n / bins
    chi2 = float(((observed - expected) ** 2 / expected).sum())
    dof = bins - 3
    critical = float(stats.chi2.ppf(level, dof))
    return Chi2Result(chi2, dof, critical, level, bins, bool(chi2 >= critical))


def exponent_sample(stock_ids: Sequence[str], betas: Sequence[float],
                    bins: int = 100, level: float = 0.9999) -> ExponentSample:
    """Bundle per-stock exponents with moments and the normality verdict."""
    if len(stock_ids) != len(betas):
        raise ValueError("stock_ids and betas must align")
    b = np.asarray(betas, dtype=np.float64)
    return ExponentSample(tuple(stock_ids), b, exponent_moments(b),
                          chi2_normality(b, bins=bins, level=level))


def histogram_table(sample: ExponentSample, n_bins: int = 30) -> list[tuple[float, int, float]]:
    """Equal-width histogram rows (bin_center, count, fitted_normal_density)
    for plotting; the density column is scaled to count units."""
    counts, edges = np.histogram(sample.betas, bins=n_bins)
    centers = 0.5 * (edges[:-1] + edges[1:])
    width = edges[1] - edges[0]
    dens = stats.norm.pdf(centers, sample.moments.mu, sample.moments.sigma)
    scale = len(sample.betas) * width
    return [(float(c), int(k), float(d * scale))
            for c, k, d in zip(centers, counts, dens)]


def classify_relaxation(beta: float, theta_ref: float = 0.4,
                        tolerance: float = 0.1) -> RelaxationClass:
    """Label the relaxation by which response exponent reading sits nearer
    the reference theta: theta = (1 - beta)/2 for an endogenous peak,
    theta = 1 - beta for an exogenous one.  Neither within tolerance, or a
    tie, yields "indeterminate"."""
    if not np.isfinite(beta):
        raise ValueError("beta must be finite")
    th_endo = (1.0 - beta) / 2.0
    th_exo = 1.0 - beta
    d_endo = abs(th_endo - theta_ref)
    d_exo = abs(th_exo - theta_ref)
    if d_endo < d_exo and d_endo <= tolerance:
        label = "endogenous"
    elif d_exo < d_endo and d_exo <= tolerance:
        label = "exogenous"
    else:
        label = "indeterminate"
    return RelaxationClass(beta, th_endo, th_exo, label, theta_ref, tolerance)
