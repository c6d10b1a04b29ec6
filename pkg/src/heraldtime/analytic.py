"""Closed-form temporal statistics of a photon pair after dispersive propagation.

The joint arrival-time distribution of the two photons is a normalized
bivariate Gaussian with correlation ``rho_t`` and standard deviations
``tau1``, ``tau2``.  Conditioning on the partner photon landing inside a
finite detection window narrows the remaining photon's wavepacket; the
narrowing ratio approaches sqrt(1 - rho_t^2) as the window shrinks.

The observable-level parameters follow from the source and link settings:
with sigma the effective phase-matching width, tau_p the pump duration and
(beta, L) the per-arm dispersion coefficient and fiber length,

    tau1^2        = [sigma^2 tau_p^4 + (beta^2 L^2 sigma^4 + 4) tau_p^2
                     + 4 beta^2 L^2 sigma^2] / (4 sigma^2 tau_p^2)
    tau1h(0)^2    = (beta^2 L^2 sigma^4 + 4)(tau_p^4 + 4 beta^2 L^2)
                     / (4 sigma^2 tau_p^2 tau1^2)
    tau1h_dt(0)   = sqrt(beta^2 L^2 sigma^4 + 4) / sigma
    rho_t         = (sigma^2 tau_p^2 - 4)(tau_p^2 - beta^2 L^2 sigma^2)
                     / [(sigma^2 tau_p^2 + 4)(tau_p^2 + beta^2 L^2 sigma^2)]

``tau1`` is the unconditional width, ``tau1h(0)`` the heralded width when the
partner's arrival time is known exactly, and ``tau1h_dt(0)`` the heralded
width when the pair emission time is unknown (only the partner's arrival time
is available).  The last one does not depend on the pump at all.

Both tau1 and tau1h(0) are minimized at tau_p = sqrt(2 |beta| L); freeing the
crystal as well, the absolute minima sit at sigma = sqrt(2 / (|beta| L)) where
the two minima coincide at sqrt(2 |beta| L) and the pair is spectrally
decorrelated.

Note on normalization: the density here integrates to one (standard bivariate
normal prefactor 1 / (2 pi tau1 tau2 sqrt(1 - rho_t^2))); amplitude scaling is
left to the fitting layer where it is a free parameter anyway.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .params import (
    CWPumpError,
    HeraldtimeError,
    LinkParams,
    SourceParams,
    TemporalCovariance,
)

__all__ = [
    "WidthDivergesError",
    "NoDispersionError",
    "WidthReport",
    "OptimumReport",
    "joint_density",
    "conditional_density",
    "conditional_limit_density",
    "narrowing_ratio_limit",
    "tau1",
    "tau1h_0",
    "tau1h_dt_0",
    "rho_t_of",
    "temporal_covariance",
    "width_report",
    "optimum",
    "landscape",
]

_SQRT2 = math.sqrt(2.0)


class WidthDivergesError(CWPumpError):
    """The requested temporal width is infinite for a CW pump."""


class NoDispersionError(HeraldtimeError):
    """Optimization over the pump is degenerate when the link has no dispersion."""


# --------------------------------------------------------------------------
# Densities
# --------------------------------------------------------------------------

def joint_density(t1, t2, cov: TemporalCovariance):
    """Normalized joint probability density of the two arrival times, 1/s^2.

    Accepts scalars or broadcastable arrays for ``t1`` and ``t2``.
    """
    x = (np.asarray(t1, dtype=float) - cov.mu1) / cov.tau1
    y = (np.asarray(t2, dtype=float) - cov.mu2) / cov.tau2
    r = cov.rho_t
    one_m_r2 = 1.0 - r * r
    norm = 1.0 / (2.0 * math.pi * cov.tau1 * cov.tau2 * math.sqrt(one_m_r2))
    q = (x * x + y * y - 2.0 * r * x * y) / one_m_r2
    return norm * np.exp(-0.5 * q)


def conditional_density(t1, center: float, width: float, cov: TemporalCovariance):
    """Arrival-time density of photon one given photon two landed in a window.

    The window is the closed interval [center - width/2, center + width/2] on
    the partner's arrival time; ``width=inf`` selects everything and returns
    the plain tau1 marginal.  Defined as the ratio of the joint density
    integrated over the window to the total mass in the window; the t2
    integral has the closed form

        pdf(t1; tau1) * [erf((b - m)/(sqrt(2) s)) - erf((a - m)/(sqrt(2) s))] / 2

    with m = rho_t (tau2/tau1) (t1 - mu1) + mu2 and s = tau2 sqrt(1 - rho_t^2).

    Raises ValueError for a degenerate window (width <= 0) and for windows so
    deep in the tail that the window mass underflows to zero.
    """
    if not width > 0:
        raise ValueError(f"window width must be positive, got {width!r}")
    x1 = np.asarray(t1, dtype=float) - cov.mu1
    marginal = np.exp(-0.5 * (x1 / cov.tau1) ** 2) / (math.sqrt(2.0 * math.pi) * cov.tau1)
    if math.isinf(width):
        return marginal

    r = cov.rho_t
    a = center - 0.5 * width - cov.mu2
    b = center + 0.5 * width - cov.mu2
    m = r * (cov.tau2 / cov.tau1) * x1
    s = cov.tau2 * math.sqrt(1.0 - r * r)
    window_factor = 0.5 * (erf((b - m) / (_SQRT2 * s)) - erf((a - m) / (_SQRT2 * s)))
    mass = 0.5 * (erf(b / (_SQRT2 * cov.tau2)) - erf(a / (_SQRT2 * cov.tau2)))
    if mass <= 0.0:
        raise ValueError(
            "window mass underflows to zero; the window lies too far in the "
            f"tail (center={center!r}, width={width!r})")
    return marginal * window_factor / mass


def conditional_limit_density(t1, center: float, cov: TemporalCovariance):
    """Zero-window limit of :func:`conditional_density`.

    A Gaussian with mean mu1 + rho_t (tau1/tau2) (center - mu2) and standard
    deviation tau1 sqrt(1 - rho_t^2).
    """
    mean = cov.mu1 + cov.rho_t * (cov.tau1 / cov.tau2) * (center - cov.mu2)
    std = cov.tau1 * math.sqrt(1.0 - cov.rho_t ** 2)
    x = (np.asarray(t1, dtype=float) - mean) / std
    return np.exp(-0.5 * x * x) / (math.sqrt(2.0 * math.pi) * std)


def narrowing_ratio_limit(cov: TemporalCovariance) -> float:
    """Limiting ratio of heralded to unconditional width: sqrt(1 - rho_t^2)."""
    return math.sqrt(1.0 - cov.rho_t ** 2)


# --------------------------------------------------------------------------
# Widths from source and link settings
# --------------------------------------------------------------------------
# The kernels below work element-wise on arrays so that the landscape scan
# and the property tests can evaluate them in bulk.

def _tau1_sq(sigma, tau_p, beta_l):
    b2l2 = beta_l * beta_l
    s2 = sigma * sigma
    tp2 = tau_p * tau_p
    num = s2 * tp2 * tp2 + (b2l2 * s2 * s2 + 4.0) * tp2 + 4.0 * b2l2 * s2
    return num / (4.0 * s2 * tp2)


def _tau1h_0_sq(sigma, tau_p, beta_l):
    b2l2 = beta_l * beta_l
    s2 = sigma * sigma
    tp2 = tau_p * tau_p
    num = (b2l2 * s2 * s2 + 4.0) * (tp2 * tp2 + 4.0 * b2l2)
    den = s2 * tp2 * tp2 + (b2l2 * s2 * s2 + 4.0) * tp2 + 4.0 * b2l2 * s2
    return num / den


def _tau1h_dt_0(sigma, beta_l):
    s2 = sigma * sigma
    return np.sqrt((beta_l * s2) ** 2 + 4.0) / sigma


def _rho_t(sigma, tau_p, beta_l):
    st2 = (sigma * tau_p) ** 2
    bls = beta_l * sigma
    tp2 = tau_p * tau_p
    return (st2 - 4.0) * (tp2 - bls * bls) / ((st2 + 4.0) * (tp2 + bls * bls))


def tau1(src: SourceParams, link: LinkParams) -> float:
    """Unconditional temporal width of one photon after the link, s.

    Diverges for a CW pump (the emission time is completely undetermined),
    which raises :class:`WidthDivergesError`.
    """
    if src.cw:
        raise WidthDivergesError(
            "the unconditional width diverges for a CW pump")
    return float(np.sqrt(_tau1_sq(src.sigma, src.tau_p, link.beta * link.length)))


def tau1h_0(src: SourceParams, link: LinkParams) -> float:
    """Heralded width when the partner's arrival time is known exactly, s.

    Finite for a CW pump, where it coincides with :func:`tau1h_dt_0` (the
    pump carries no timing information in that limit).
    """
    if src.cw:
        return tau1h_dt_0(src, link)
    return float(np.sqrt(_tau1h_0_sq(src.sigma, src.tau_p, link.beta * link.length)))


def tau1h_dt_0(src: SourceParams, link: LinkParams) -> float:
    """Heralded width when the pair emission time is unknown, s.

    Independent of the pump settings: sqrt(beta^2 L^2 sigma^4 + 4) / sigma.
    """
    return float(_tau1h_dt_0(src.sigma, link.beta * link.length))


def rho_t_of(src: SourceParams, link: LinkParams) -> float:
    """Temporal correlation coefficient of the two arrival times.

    Signed closed form with zeros exactly at tau_p = 2/sigma (spectrally
    decorrelated pairs) and tau_p = |beta| L sigma (dispersion has undone the
    temporal correlation); validated against a Monte-Carlo phase-space oracle
    in the test suite.  Returns the boundary value 1.0 for a CW pump, where
    the joint distribution degenerates (the common emission time dominates
    both arrivals).
    """
    if src.cw:
        return 1.0
    return float(_rho_t(src.sigma, src.tau_p, link.beta * link.length))


def temporal_covariance(src: SourceParams, link: LinkParams) -> TemporalCovariance:
    """Observable-level statistics for a symmetric link (tau1 = tau2)."""
    width = tau1(src, link)
    return TemporalCovariance(rho_t=rho_t_of(src, link), tau1=width, tau2=width)


# --------------------------------------------------------------------------
# Width report and optima
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class WidthReport:
    """The three temporal widths for one source/link setting.

    tau1:        unconditional width, s.
    tau1h_0:     heralded width, partner time known exactly, s.
    tau1h_dt_0:  heralded width, emission time unknown, s.
    ratio:       tau1h_0 / tau1, in (0, 1].
    """

    tau1: float
    tau1h_0: float
    tau1h_dt_0: float
    ratio: float


def width_report(src: SourceParams, link: LinkParams) -> WidthReport:
    """Evaluate all three widths at once; raises for a CW pump (tau1 diverges)."""
    t1 = tau1(src, link)
    t1h = tau1h_0(src, link)
    return WidthReport(tau1=t1, tau1h_0=t1h,
                       tau1h_dt_0=tau1h_dt_0(src, link), ratio=t1h / t1)


@dataclass(frozen=True)
class OptimumReport:
    """Pump (and optionally crystal) settings minimizing the temporal widths.

    tau_p_opt:    optimal pump duration sqrt(2 |beta| L), s.
    sigma_opt:    optimal phase-matching width sqrt(2 / (|beta| L)), 1/s;
                  None when the crystal was held fixed.
    rho_opt:      spectral correlation at the optimum pump,
                  (2 - |beta| L sigma^2) / (2 + |beta| L sigma^2).
    tau1_min:     minimum unconditional width at tau_p_opt, s.
    tau1h_min:    minimum heralded width at tau_p_opt, s.
    tau1_abs:     absolute minimum over (tau_p, sigma), s; None for fixed sigma.
    tau1h_dt_abs: emission-time-unknown width, s: the (pump-independent) value
                  at the fixed sigma, or its absolute minimum 2 sqrt(|beta| L).
    """

    tau_p_opt: float
    sigma_opt: float | None
    rho_opt: float
    tau1_min: float
    tau1h_min: float
    tau1_abs: float | None
    tau1h_dt_abs: float


def optimum(link: LinkParams, sigma_fixed: float | None = None) -> OptimumReport:
    """Source settings minimizing the widths for a given link.

    With ``sigma_fixed`` the crystal is held fixed and only the pump duration
    is optimized; otherwise both knobs are free and the absolute minima are
    reported (the two minima coincide and the optimal pair is spectrally
    decorrelated).  Raises :class:`NoDispersionError` when beta*L == 0: the
    widths are then monotone in the pump duration and no optimum exists.
    """
    bl = link.abs_beta_length
    if bl == 0.0:
        raise NoDispersionError(
            "link has no dispersion (beta * length == 0); pump optimization "
            "is degenerate")
    tau_p_opt = math.sqrt(2.0 * bl)
    if sigma_fixed is not None:
        if not (isinstance(sigma_fixed, (int, float)) and sigma_fixed > 0):
            raise ValueError(f"sigma_fixed must be positive, got {sigma_fixed!r}")
        s = float(sigma_fixed)
        bls2 = bl * s * s
        tau1_min = (bls2 + 2.0) / (2.0 * s)
        tau1h_min = 2.0 * math.sqrt(bl * (bls2 * bls2 + 4.0)) / (bls2 + 2.0)
        return OptimumReport(
            tau_p_opt=tau_p_opt,
            sigma_opt=None,
            rho_opt=(2.0 - bls2) / (2.0 + bls2),
            tau1_min=tau1_min,
            tau1h_min=tau1h_min,
            tau1_abs=None,
            tau1h_dt_abs=float(_tau1h_dt_0(s, bl)),
        )
    abs_min = math.sqrt(2.0 * bl)
    return OptimumReport(
        tau_p_opt=tau_p_opt,
        sigma_opt=math.sqrt(2.0 / bl),
        rho_opt=0.0,
        tau1_min=abs_min,
        tau1h_min=abs_min,
        tau1_abs=abs_min,
        tau1h_dt_abs=2.0 * math.sqrt(bl),
    )


_LANDSCAPE_KERNELS = {
    "tau1": lambda sig, tp, bl: np.sqrt(_tau1_sq(sig, tp, bl)),
    "tau1h_0": lambda sig, tp, bl: np.sqrt(_tau1h_0_sq(sig, tp, bl)),
    "tau1h_dt_0": lambda sig, tp, bl: np.broadcast_to(
        _tau1h_dt_0(sig, bl), np.broadcast_shapes(np.shape(sig), np.shape(tp))).copy(),
}


def landscape(tau_p_grid, sigma_grid, link: LinkParams, which: str) -> np.ndarray:
    """Evaluate one width on a (tau_p, sigma) grid.

    Returns an array of shape (len(sigma_grid), len(tau_p_grid)); row i holds
    the width at sigma_grid[i] for every pump duration, so the
    emission-time-unknown width produces constant rows.  ``which`` is one of
    "tau1", "tau1h_0", "tau1h_dt_0".
    """
    try:
        kernel = _LANDSCAPE_KERNELS[which]
    except KeyError:
        raise ValueError(
            f"which must be one of {sorted(_LANDSCAPE_KERNELS)}, got {which!r}"
        ) from None
    tp = np.asarray(tau_p_grid, dtype=float)
    sig = np.asarray(sigma_grid, dtype=float)
    if tp.ndim != 1 or sig.ndim != 1 or tp.size == 0 or sig.size == 0:
        raise ValueError("tau_p_grid and sigma_grid must be non-empty 1-D arrays")
    if not (np.all(tp > 0) and np.all(sig > 0)):
        raise ValueError("grid values must be positive")
    return kernel(sig[:, None], tp[None, :], link.beta * link.length)
