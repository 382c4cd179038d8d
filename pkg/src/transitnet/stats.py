"""Curve fitting and smoothing for the network's summary distributions.

Pure numerics, no transit semantics: a log-log power-law fit, a
Gaussian-kernel local-average smoother with explicit undefined markers,
leave-one-out bandwidth selection, and a percentile bootstrap band.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import stats as sps


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    prefactor: float
    r2: float
    exponent_stderr: float

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.prefactor * np.asarray(x, dtype=float) ** self.exponent


def fit_power_law(x, y) -> PowerLawFit:
    """Fit y = a * x**b by ordinary least squares in log10-log10 space.

    Both inputs must be strictly positive. r2 is 1.0 for a perfect fit even
    when the responses are all equal (zero total variation).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d arrays of equal length")
    if x.size < 3:
        raise ValueError("need at least three points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs strictly positive data")
    lx = np.log10(x)
    ly = np.log10(y)
    if np.ptp(lx) == 0:
        raise ValueError("all x values identical")
    res = sps.linregress(lx, ly)
    pred = res.intercept + res.slope * lx
    sst = float(np.sum((ly - ly.mean()) ** 2))
    ssr = float(np.sum((ly - pred) ** 2))
    if sst == 0.0:
        r2 = 1.0 if ssr <= 1e-24 else 0.0
    else:
        r2 = 1.0 - ssr / sst
    return PowerLawFit(float(res.slope), float(10.0 ** res.intercept), r2,
                       float(res.stderr))


def kernel_smooth(x, y, grid, bandwidth: float) -> np.ndarray:
    """Gaussian-kernel local average of y over x, evaluated on grid.

    Grid points carrying no kernel mass (all weights underflow to zero)
    come back as NaN rather than an extrapolated guess.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or x.size == 0:
        raise ValueError("x and y must be non-empty 1-d arrays of equal length")
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    z = (grid[:, None] - x[None, :]) / bandwidth
    w = np.exp(-0.5 * z * z)
    denom = w.sum(axis=1)
    out = np.full(grid.shape, np.nan)
    ok = denom > 0
    out[ok] = (w[ok] @ y) / denom[ok]
    return out


def _loo_predictions(x: np.ndarray, y: np.ndarray, bandwidth: float) -> np.ndarray:
    z = (x[:, None] - x[None, :]) / bandwidth
    w = np.exp(-0.5 * z * z)
    np.fill_diagonal(w, 0.0)
    denom = w.sum(axis=1)
    pred = np.full(x.shape, np.nan)
    ok = denom > 0
    pred[ok] = (w[ok] @ y) / denom[ok]
    return pred


def bandwidth_candidates(x, count: int = 30) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    span = float(np.ptp(x))
    if span <= 0:
        raise ValueError("x has zero range")
    return np.geomspace(span / x.size, span, count)


def select_bandwidth(x, y, count: int = 30) -> float:
    """Leave-one-out bandwidth over a geometric candidate ladder.

    Candidates run from range/n to range. A candidate is scored by the sum of
    squared leave-one-out errors; points whose left-out prediction is
    undefined count against it first, so any all-defined bandwidth beats any
    partially-defined one. Ties go to the smaller bandwidth.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d arrays of equal length")
    if x.size < 5:
        raise ValueError("need at least five points")
    best: Optional[Tuple[int, float, float]] = None
    for h in bandwidth_candidates(x, count):
        pred = _loo_predictions(x, y, float(h))
        bad = int(np.isnan(pred).sum())
        ok = ~np.isnan(pred)
        sse = float(np.sum((pred[ok] - y[ok]) ** 2)) if ok.any() else np.inf
        key = (bad, sse, float(h))
        if best is None or key < best:
            best = key
    return best[2]


def bootstrap_band(x, y, grid, bandwidth: float, n_boot: int = 500,
                   coverage: float = 0.95, seed: int = 0):
    """Percentile bootstrap band around the smoothed curve.

    Resamples (x, y) pairs with replacement, smooths each resample, and takes
    the percentile envelope. The band is widened where needed so it always
    contains the point estimate. Returns (lower, estimate, upper).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if not 0 < coverage < 1:
        raise ValueError("coverage must be in (0, 1)")
    if n_boot < 100:
        raise ValueError("need at least 100 resamples")
    est = kernel_smooth(x, y, grid, bandwidth)
    rng = np.random.default_rng(seed)
    samples = np.empty((n_boot, grid.size))
    for b in range(n_boot):
        idx = rng.integers(0, x.size, size=x.size)
        samples[b] = kernel_smooth(x[idx], y[idx], grid, bandwidth)
    tail = 100.0 * (1.0 - coverage) / 2.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)   # all-NaN columns
        lo = np.nanpercentile(samples, tail, axis=0)
        hi = np.nanpercentile(samples, 100.0 - tail, axis=0)
    # fmin/fmax drop NaN percentiles in favour of the estimate, which also
    # enforces the contains-the-estimate clamp
    lo = np.fmin(lo, est)
    hi = np.fmax(hi, est)
    undefined = np.isnan(est)
    lo[undefined] = np.nan
    hi[undefined] = np.nan
    return lo, est, hi
