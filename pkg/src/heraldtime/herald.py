"""Heralded (windowed conditional) analysis of event data and of the model.

Selecting coincidences whose heralding photon arrived inside a window
[center - width/2, center + width/2] narrows the partner photon's arrival
time distribution.  This module provides the selection itself, the heralded
width with a bootstrap error bar, and the two standard curves:

* narrowing ratio (heralded width / unconditional width) versus window width,
  which flattens to sqrt(1 - rho_t^2) for small windows;
* heralded mean arrival time versus window center, whose small-window slope
  is rho_t * tau1 / tau2.

Every curve function accepts either an :class:`~heraldtime.sampler.EventSet`
(empirical path, bootstrap error bars) or a
:class:`~heraldtime.params.TemporalCovariance` (analytic path, exact
conditional moments propagated through the truncated-normal window).
Statistics are always computed on raw counts; any display scaling is left to
presentation code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .params import HeraldtimeError, TemporalCovariance
from .sampler import EventSet

__all__ = [
    "TooFewEventsError",
    "HeraldWindow",
    "NarrowingCurve",
    "CentroidCurve",
    "select",
    "heralded_width",
    "conditional_moments",
    "narrowing_curve",
    "centroid_curve",
]

MIN_EVENTS = 30

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class TooFewEventsError(HeraldtimeError):
    """Raised when a window selects too few events for a stable estimate."""


@dataclass(frozen=True)
class HeraldWindow:
    """Detection-time window on the heralding photon.

    center:    window center, s.
    width:     full window width, s (may be inf for "no selection").
    herald_on: which channel heralds -- 2 (default) conditions on t2 and
               analyzes t1; 1 swaps the roles.
    """

    center: float
    width: float
    herald_on: int = 2

    def __post_init__(self):
        if not (isinstance(self.width, (int, float)) and self.width > 0):
            raise ValueError(f"width must be positive, got {self.width!r}")
        if not (isinstance(self.center, (int, float)) and math.isfinite(self.center)):
            raise ValueError(f"center must be finite, got {self.center!r}")
        if self.herald_on not in (1, 2):
            raise ValueError(f"herald_on must be 1 or 2, got {self.herald_on!r}")

    @property
    def bounds(self) -> tuple[float, float]:
        return (self.center - 0.5 * self.width, self.center + 0.5 * self.width)


def _oriented(events: EventSet, w: HeraldWindow) -> EventSet:
    """Events with channel 2 as the heralding coordinate."""
    return events.transposed() if w.herald_on == 1 else events


def select(events: EventSet, w: HeraldWindow) -> EventSet:
    """Events whose heralding coordinate lies inside the closed window.

    The returned set keeps the original channel order; the applied cut is
    recorded in the metadata.  An empty selection is flagged there, not
    raised.
    """
    oriented = _oriented(events, w)
    lo, hi = w.bounds
    mask = (oriented.t2 >= lo) & (oriented.t2 <= hi) if math.isfinite(w.width) \
        else np.ones(events.count, dtype=bool)
    meta = dict(events.metadata)
    meta["selection"] = {
        "herald_on": w.herald_on,
        "center": w.center,
        "width": w.width,
        "selected": int(mask.sum()),
        "total": events.count,
        "empty": not bool(mask.any()),
    }
    return EventSet(events.events[mask], meta)


def _bootstrap_std(x: np.ndarray, n_boot: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, x.size, size=(n_boot, x.size))
    return float(np.std(np.std(x[idx], axis=1, ddof=1), ddof=1))


def heralded_width(events: EventSet, w: HeraldWindow, n_boot: int = 200,
                   seed: int = 0, estimator: str = "std") -> tuple[float, float]:
    """Width of the heralded coordinate within the window, with its error.

    Returns (width, std_error) in seconds.  The primary estimator is the
    sample standard deviation (for which the narrowing limit is exact); a
    "gaussian" estimator fitting a Gaussian profile to the histogram is
    available for comparison and agrees within errors on Gaussian data.
    Raises :class:`TooFewEventsError` below 30 selected events.
    """
    selected = select(_oriented(events, w),
                      HeraldWindow(w.center, w.width, herald_on=2))
    x = selected.t1
    if x.size < MIN_EVENTS:
        raise TooFewEventsError(
            f"window (center={w.center!r}, width={w.width!r}) selected "
            f"{x.size} events; need at least {MIN_EVENTS}")
    if estimator == "std":
        width = float(np.std(x, ddof=1))
        err = _bootstrap_std(x, n_boot, seed)
        return width, err
    if estimator == "gaussian":
        return _gaussian_fit_width(x)
    raise ValueError(f"estimator must be 'std' or 'gaussian', got {estimator!r}")


def _gaussian_fit_width(x: np.ndarray) -> tuple[float, float]:
    from scipy.optimize import curve_fit

    counts, edges = np.histogram(x, bins=max(16, min(64, x.size // 20)))
    centers = 0.5 * (edges[:-1] + edges[1:])

    def profile(t, amp, mu, sd):
        return amp * np.exp(-0.5 * ((t - mu) / sd) ** 2)

    p0 = [counts.max(), float(np.mean(x)), float(np.std(x, ddof=1))]
    popt, pcov = curve_fit(profile, centers, counts, p0=p0,
                           sigma=np.sqrt(np.maximum(counts, 1.0)),
                           absolute_sigma=True, maxfev=10000)
    return abs(float(popt[2])), float(np.sqrt(pcov[2, 2]))


# --------------------------------------------------------------------------
# Exact conditional moments of the model
# --------------------------------------------------------------------------

def _truncated_normal_moments(mu: float, sd: float, lo: float,
                              hi: float) -> tuple[float, float]:
    """Mean and variance of N(mu, sd^2) restricted to [lo, hi]."""
    a = (lo - mu) / sd
    b = (hi - mu) / sd
    mass = ndtr(b) - ndtr(a)
    if mass <= 0.0:
        raise ValueError(
            f"window [{lo!r}, {hi!r}] carries no probability mass")
    pa = _INV_SQRT_2PI * math.exp(-0.5 * a * a) if math.isfinite(a) else 0.0
    pb = _INV_SQRT_2PI * math.exp(-0.5 * b * b) if math.isfinite(b) else 0.0
    ta = a * pa if pa > 0.0 else 0.0
    tb = b * pb if pb > 0.0 else 0.0
    mean_shift = (pa - pb) / mass
    var_factor = 1.0 + (ta - tb) / mass - mean_shift ** 2
    return mu + sd * mean_shift, sd * sd * var_factor


def conditional_moments(cov: TemporalCovariance, center: float,
                        width: float) -> tuple[float, float]:
    """Exact mean and standard deviation of t1 given t2 in the window.

    Decomposes t1 into its regression on t2 plus independent noise:

        E[t1 | t2 in W]   = mu1 + rho_t (tau1/tau2) (E[t2 | W] - mu2)
        Var[t1 | t2 in W] = tau1^2 (1 - rho_t^2)
                            + rho_t^2 (tau1/tau2)^2 Var[t2 | W]

    with the window moments of t2 those of a truncated normal.  Exact for
    any window, including width=inf (the unconditional moments).
    """
    if not width > 0:
        raise ValueError(f"window width must be positive, got {width!r}")
    lo = center - 0.5 * width
    hi = center + 0.5 * width
    m2, v2 = _truncated_normal_moments(cov.mu2, cov.tau2, lo, hi)
    slope = cov.rho_t * cov.tau1 / cov.tau2
    mean = cov.mu1 + slope * (m2 - cov.mu2)
    var = cov.tau1 ** 2 * (1.0 - cov.rho_t ** 2) + slope ** 2 * v2
    return mean, math.sqrt(var)


# --------------------------------------------------------------------------
# Curves
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NarrowingCurve:
    """Heralded-to-unconditional width ratio versus window width.

    widths:     window widths, s.
    ratios:     heralded width / unconditional width (sampling noise may push
                empirical values slightly above 1).
    std_errors: bootstrap errors per point; None on the analytic path.
    asymptote:  the small-window limit sqrt(1 - rho_t^2) (empirical curves
                carry the value from the moment estimate of rho_t).
    """

    widths: np.ndarray
    ratios: np.ndarray
    std_errors: np.ndarray | None
    asymptote: float


@dataclass(frozen=True)
class CentroidCurve:
    """Heralded mean arrival time versus window center.

    centers, means in s; std_errors per point, None on the analytic path.
    """

    centers: np.ndarray
    means: np.ndarray
    std_errors: np.ndarray | None

    def slope(self) -> float:
        """Least-squares slope of means versus centers."""
        return float(np.polyfit(self.centers, self.means, 1)[0])


def _as_grid(values, minimum: int, name: str) -> np.ndarray:
    grid = np.asarray(values, dtype=float)
    if grid.ndim != 1 or grid.size < minimum:
        raise ValueError(f"{name} must be a 1-D grid of at least {minimum} values")
    return grid


def narrowing_curve(source, center: float, widths, herald_on: int = 2,
                    n_boot: int = 200, seed: int = 0) -> NarrowingCurve:
    """Narrowing-ratio curve over a grid of window widths.

    ``source`` is an EventSet (empirical ratios, joint bootstrap errors) or a
    TemporalCovariance (exact ratios, monotone non-increasing in the width).
    The empirical ratio at width=inf equals 1 by construction: numerator and
    denominator are the same estimator on the same events.
    """
    grid = _as_grid(widths, 3, "widths")
    if isinstance(source, TemporalCovariance):
        cov = source if herald_on == 2 else source.swapped()
        full = cov.tau1
        ratios = np.array([conditional_moments(cov, center, w)[1] / full
                           for w in grid])
        return NarrowingCurve(widths=grid, ratios=ratios, std_errors=None,
                              asymptote=math.sqrt(1.0 - cov.rho_t ** 2))
    if not isinstance(source, EventSet):
        raise TypeError(f"source must be an EventSet or TemporalCovariance, "
                        f"got {type(source).__name__}")

    oriented = _oriented(source, HeraldWindow(center, math.inf, herald_on))
    t1 = oriented.t1
    t2 = oriented.t2
    for w in grid:
        n_sel = int(np.count_nonzero(np.abs(t2 - center) <= 0.5 * w)) \
            if math.isfinite(w) else t1.size
        if n_sel < MIN_EVENTS:
            raise TooFewEventsError(
                f"window width {w!r} selects {n_sel} events; need at least "
                f"{MIN_EVENTS}")

    def ratios_of(tt1, tt2):
        full = np.std(tt1, ddof=1)
        out = np.empty(grid.size)
        for i, w in enumerate(grid):
            sel = tt1 if not math.isfinite(w) \
                else tt1[np.abs(tt2 - center) <= 0.5 * w]
            out[i] = np.std(sel, ddof=1) / full
        return out

    ratios = ratios_of(t1, t2)
    rng = np.random.default_rng(seed)
    boot = np.empty((n_boot, grid.size))
    for k in range(n_boot):
        idx = rng.integers(0, t1.size, size=t1.size)
        boot[k] = ratios_of(t1[idx], t2[idx])
    r_hat = np.clip(np.corrcoef(t1, t2)[0, 1], -0.999999, 0.999999)
    return NarrowingCurve(widths=grid, ratios=ratios,
                          std_errors=np.std(boot, axis=0, ddof=1),
                          asymptote=math.sqrt(1.0 - r_hat ** 2))


def centroid_curve(source, width: float, centers, herald_on: int = 2,
                   n_boot: int = 200, seed: int = 0) -> CentroidCurve:
    """Heralded mean arrival time over a grid of window centers.

    For small windows the curve is linear with slope rho_t * tau1 / tau2; at
    finite widths the exact conditional mean is reported without any
    linearity assumption.
    """
    grid = _as_grid(centers, 3, "centers")
    if isinstance(source, TemporalCovariance):
        cov = source if herald_on == 2 else source.swapped()
        means = np.array([conditional_moments(cov, c, width)[0] for c in grid])
        return CentroidCurve(centers=grid, means=means, std_errors=None)
    if not isinstance(source, EventSet):
        raise TypeError(f"source must be an EventSet or TemporalCovariance, "
                        f"got {type(source).__name__}")

    oriented = _oriented(source, HeraldWindow(0.0, width, herald_on))
    t1 = oriented.t1
    t2 = oriented.t2
    means = np.empty(grid.size)
    errs = np.empty(grid.size)
    rng = np.random.default_rng(seed)
    for i, c in enumerate(grid):
        sel = t1 if not math.isfinite(width) \
            else t1[np.abs(t2 - c) <= 0.5 * width]
        if sel.size < MIN_EVENTS:
            raise TooFewEventsError(
                f"window center {c!r} selects {sel.size} events; need at "
                f"least {MIN_EVENTS}")
        means[i] = np.mean(sel)
        idx = rng.integers(0, sel.size, size=(n_boot, sel.size))
        errs[i] = np.std(np.mean(sel[idx], axis=1), ddof=1)
    return CentroidCurve(centers=grid, means=means, std_errors=errs)
