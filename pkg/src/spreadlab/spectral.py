"""Normalized Lomb periodogram for unevenly sampled series, peak
significance, harmonic-ladder detection, and fundamental-frequency
estimation.

Power at frequency f is the least-squares sinusoid fit quality

    P(f) = 1/(2 sigma^2) * [ (sum dy cos w(t - tau))^2 / sum cos^2 w(t - tau)
                           + (sum dy sin w(t - tau))^2 / sum sin^2 w(t - tau) ]

with w = 2 pi f, dy the mean-removed values, sigma^2 the sample variance,
and the phase tau fixed per frequency by
tan(2 w tau) = sum sin(2 w t) / sum cos(2 w t).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Periodogram:
    """Normalized Lomb powers on a strictly increasing frequency grid."""

    frequency: np.ndarray
    power: np.ndarray
    n_samples: int
    oversample: float = 1.0
    m_independent: int = 1

    def __post_init__(self):
        if len(self.frequency) != len(self.power):
            raise ValueError("frequency and power lengths differ")


@dataclass(frozen=True)
class Peak:
    n: int | None        # harmonic number, None for a free peak
    frequency: float
    power: float
    p_value: float


@dataclass(frozen=True)
class PeakSet:
    """Detected peaks, strongest first; p-values are therefore ascending."""

    peaks: tuple[Peak, ...]
    window: float
    min_power: float = 0.0

    def __iter__(self):
        return iter(self.peaks)

    def __len__(self):
        return len(self.peaks)

    def harmonic_pairs(self) -> list[tuple[int, float]]:
        return [(p.n, p.frequency) for p in self.peaks if p.n is not None]

    def to_dicts(self) -> list[dict]:
        return [{"n": p.n, "frequency": p.frequency, "power": p.power,
                 "p_value": p.p_value} for p in self.peaks]


@dataclass(frozen=True)
class FundamentalFit:
    """Through-origin regression of harmonic frequencies on their order."""

    f0: float
    stderr: float
    harmonics: tuple[int, ...]
    residuals: np.ndarray
    intercept: float = 0.0

    @property
    def n_harmonics(self) -> int:
        return len(self.harmonics)


def series_to_samples(values: np.ndarray,
                      skip_zeros: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Turn a binned series into (t, y) samples with t = 1..len(values).

    Zero entries are the no-data sentinel; by default they are dropped,
    leaving an unevenly sampled series (exactly what the Lomb estimator is
    for).  Pass ``skip_zeros=False`` to keep them as literal observations.
    """
    values = np.asarray(values, dtype=np.float64)
    t = np.arange(1, len(values) + 1, dtype=np.float64)
    if skip_zeros:
        keep = values != 0
        return t[keep], values[keep]
    return t, values


def default_freq_grid(n_samples: int, time_span: float,
                      oversample: float = 4.0,
                      hi_factor: float = 1.0) -> np.ndarray:
    """Standard oversampled grid: multiples of 1/(oversample*span) up to
    hi_factor times the pseudo-Nyquist frequency n/(2*span)."""
    if n_samples < 2:
        raise ValueError("need at least 2 samples")
    if time_span <= 0 or oversample < 1 or hi_factor <= 0:
        raise ValueError("time_span > 0, oversample >= 1, hi_factor > 0 required")
    step = 1.0 / (oversample * time_span)
    fmax = hi_factor * n_samples / (2.0 * time_span)
    count = int(np.floor(fmax / step + 1e-9))
    if count < 1:
        raise ValueError("frequency grid is empty for these parameters")
    return np.arange(1, count + 1, dtype=np.float64) * step


def lomb_power(times: np.ndarray, values: np.ndarray, freqs: np.ndarray,
               oversample: float = 1.0,
               m_independent: int | None = None) -> Periodogram:
    """Evaluate the normalized Lomb power on a frequency grid.

    Direct evaluation, O(n_samples * n_freqs); each frequency is summed in
    fixed sample order, so results are deterministic and frequency chunks
    can be computed independently.

    Parameters
    ----------
    times, values : array
        Sample times (any real, uneven spacing fine) and observations.
    freqs : array
        Strictly increasing, strictly positive frequencies.
    oversample : float
        Grid oversampling factor, recorded for significance defaults.
    m_independent : int, optional
        Number of independent frequencies for p-values; defaults to
        ``len(freqs) / oversample`` (the classical convention).
    """
    t = np.asarray(times, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    f = np.asarray(freqs, dtype=np.float64)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError("times and values must be equal-length 1-d arrays")
    if len(t) < 2:
        raise ValueError("need at least 2 samples")
    if len(f) == 0:
        raise ValueError("empty frequency grid")
    if np.any(f <= 0) or np.any(np.diff(f) <= 0):
        raise ValueError("frequencies must be positive and strictly increasing")

    dy = y - y.mean()
    var = float(dy @ dy) / (len(y) - 1)
    if var == 0.0:
        raise ValueError("constant series has zero variance; power undefined")

    power = np.empty(len(f))
    n = len(t)
    # chunk so the (n_freqs x n_samples) trig workspaces stay modest
    chunk = max(1, int(4_000_000 // max(n, 1)))
    for lo in range(0, len(f), chunk):
        w = 2.0 * np.pi * f[lo:lo + chunk, None]
        wt = w * t[None, :]
        c = np.cos(wt)
        s = np.sin(wt)
        # sums of cos/sin(2wt) via double-angle products
        c2 = np.einsum("ij,ij->i", c, c) * 2.0 - n
        s2 = np.einsum("ij,ij->i", c, s) * 2.0
        r = np.hypot(c2, s2)
        phi = 0.5 * np.arctan2(s2, c2)      # = w * tau
        cosp, sinp = np.cos(phi), np.sin(phi)
        yc = c @ dy
        ys = s @ dy
        yc_rot = cosp * yc + sinp * ys      # sum dy cos(w(t - tau))
        ys_rot = cosp * ys - sinp * yc      # sum dy sin(w(t - tau))
        cc = 0.5 * (n + r)                  # sum cos^2(w(t - tau))
        ss = 0.5 * (n - r)                  # sum sin^2(w(t - tau))
        term_c = yc_rot ** 2 / cc
        term_s = np.where(ss > n * 1e-14, ys_rot ** 2 / np.where(ss > 0, ss, 1.0), 0.0)
        power[lo:lo + chunk] = (term_c + term_s) / (2.0 * var)

    m = m_independent if m_independent is not None else max(1, round(len(f) / oversample))
    return Periodogram(f, power, n_samples=n, oversample=oversample,
                       m_independent=int(m))


def peak_significance(power, m_independent: int):
    """False-alarm probability of a peak: 1 - (1 - e^-P)^M.

    Uses the tail form M e^-P once e^-P is far below double precision of
    the exact expression, so huge peaks keep meaningful tiny p-values.
    """
    if m_independent < 1:
        raise ValueError("m_independent must be >= 1")
    p = np.asarray(power, dtype=np.float64)
    if np.any(p < 0):
        raise ValueError("power must be nonnegative")
    with np.errstate(divide="ignore"):
        exact = -np.expm1(m_independent * np.log1p(-np.exp(-p)))
    tail = m_independent * np.exp(-p)
    out = np.where(p >= 50.0, tail, exact)
    if np.ndim(power) == 0:
        return float(out)
    return out


def power_for_p(p_value: float, m_independent: int) -> float:
    """Inverse of :func:`peak_significance`: the power whose false-alarm
    probability equals ``p_value``."""
    if not 0 < p_value < 1:
        raise ValueError("p_value must lie in (0, 1)")
    if m_independent < 1:
        raise ValueError("m_independent must be >= 1")
    inner = -np.expm1(np.log1p(-p_value) / m_independent)
    return float(-np.log(inner))


def detect_harmonic_peaks(pg: Periodogram, f0_guess: float, n_max: int = 23,
                          window: float = 0.02,
                          min_power: float = 0.0) -> PeakSet:
    """Find, for each n = 1..n_max, the strongest strict local maximum in
    the band n*f0_guess*(1 +/- window); orders without one are skipped."""
    f, p = pg.frequency, pg.power
    if len(f) == 0:
        raise ValueError("empty periodogram")
    if f0_guess <= 0:
        raise ValueError("f0_guess must be positive")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if f0_guess < f[0] or n_max * f0_guess > f[-1]:
        raise ValueError(
            f"harmonic ladder 1..{n_max} of f0={f0_guess} falls outside the "
            f"grid [{f[0]}, {f[-1]}]")
    if not 0 < window < 0.5:
        raise ValueError("window must be a relative tolerance in (0, 0.5)")

    local_max = np.zeros(len(p), dtype=bool)
    local_max[1:-1] = (p[1:-1] > p[:-2]) & (p[1:-1] > p[2:])

    peaks = []
    for order in range(1, n_max + 1):
        lo = np.searchsorted(f, order * f0_guess * (1 - window), side="left")
        hi = np.searchsorted(f, order * f0_guess * (1 + window), side="right")
        cand = np.flatnonzero(local_max[lo:hi] & (p[lo:hi] >= min_power)) + lo
        if len(cand) == 0:
            continue
        best = cand[np.argmax(p[cand])]
        peaks.append(Peak(order, float(f[best]), float(p[best]),
                          peak_significance(float(p[best]), pg.m_independent)))
    peaks.sort(key=lambda pk: -pk.power)
    return PeakSet(tuple(peaks), window=window, min_power=min_power)


def strongest_peak(pg: Periodogram) -> Peak:
    """Global maximum of the periodogram, as a free (n=None) peak."""
    if len(pg.power) == 0:
        raise ValueError("empty periodogram")
    i = int(np.argmax(pg.power))
    return Peak(None, float(pg.frequency[i]), float(pg.power[i]),
                peak_significance(float(pg.power[i]), pg.m_independent))


def estimate_fundamental(peaks: PeakSet | Sequence[tuple[int, float]],
                         with_intercept: bool = False) -> FundamentalFit:
    """Fit f_n = n * f0 by least squares over (n, f_n) pairs.

    The model has no intercept, so the default is the through-origin
    estimator f0 = sum(n f_n) / sum(n^2) with its regression standard
    error.  ``with_intercept=True`` switches to an ordinary straight-line
    fit for sensitivity checks; f0 is then the slope.
    """
    pairs = peaks.harmonic_pairs() if isinstance(peaks, PeakSet) else list(peaks)
    if len(pairs) < 2:
        raise ValueError("need at least 2 harmonics to fit a fundamental")
    n = np.array([int(k) for k, _ in pairs], dtype=np.float64)
    fn = np.array([float(v) for _, v in pairs], dtype=np.float64)
    if len(np.unique(n)) != len(n):
        raise ValueError("duplicate harmonic orders in input")

    if with_intercept:
        nbar, fbar = n.mean(), fn.mean()
        sxx = np.sum((n - nbar) ** 2)
        slope = np.sum((n - nbar) * (fn - fbar)) / sxx
        intercept = fbar - slope * nbar
        resid = fn - intercept - slope * n
        dof = len(n) - 2
        s2 = float(resid @ resid) / dof if dof > 0 else 0.0
        stderr = float(np.sqrt(s2 / sxx))
        return FundamentalFit(float(slope), stderr,
                              tuple(int(v) for v in n), resid, float(intercept))

    sn2 = np.sum(n * n)
    f0 = float(np.sum(n * fn) / sn2)
    resid = fn - f0 * n
    s2 = float(resid @ resid) / (len(n) - 1)
    stderr = float(np.sqrt(s2 / sn2))
    return FundamentalFit(f0, stderr, tuple(int(v) for v in n), resid)
