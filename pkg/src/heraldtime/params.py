"""Parameter types and conversions between source-level and observable-level views.

All quantities are SI: seconds, meters, s^2/m for the dispersion coefficient
and 1/s for spectral widths.  Human-friendly units (ps, km, GHz, ...) are
handled at the I/O boundary only, see :mod:`heraldtime.dataio`.

Two equivalent descriptions of the photon-pair source are supported:

* ``SourceParams``    -- effective phase-matching width ``sigma`` plus pump
  pulse duration ``tau_p`` (the experimental knobs);
* ``SourceParamsRho`` -- single-photon spectral width ``sigma0`` plus the
  spectral correlation coefficient ``rho``.

``to_rho_form`` / ``from_rho_form`` convert between them.  The decorrelated
source (``rho = 0``) sits exactly on the locus ``sigma * tau_p = 2``.

A continuous-wave pump is a genuine limit of the model (pulse duration going
to infinity) and is represented by an explicit flag instead of an infinite
``tau_p`` so that downstream code can dispatch on it without floating-point
infinity tricks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "HeraldtimeError",
    "CWPumpError",
    "SourceParams",
    "SourceParamsRho",
    "LinkParams",
    "TemporalCovariance",
    "to_rho_form",
    "from_rho_form",
]


class HeraldtimeError(Exception):
    """Base class for errors raised by this package."""


class CWPumpError(HeraldtimeError):
    """Raised when an operation is undefined for a continuous-wave pump."""


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(msg)


def _finite_positive(x, name: str) -> None:
    _require(isinstance(x, (int, float)) and math.isfinite(x) and x > 0,
             f"{name} must be a finite positive number, got {x!r}")


@dataclass(frozen=True)
class SourceParams:
    """Photon-pair source described by crystal and pump-pulse settings.

    sigma:  effective phase-matching width, 1/s.  The convention is "formula
            units": a value quoted as N GHz enters as N*1e9 1/s (whether the
            published convention was Hz or rad/s is not fixed by the model;
            every formula here is consistent under this single reading).
    tau_p:  pump pulse duration, s.  ``None`` if and only if ``cw`` is set.
    cw:     continuous-wave pump flag.  Analytic operations evaluate the
            infinite-pulse-duration limit for such a source; quantities that
            diverge in that limit raise :class:`CWPumpError`.
    """

    sigma: float
    tau_p: float | None = None
    cw: bool = False

    def __post_init__(self):
        _finite_positive(self.sigma, "sigma")
        if self.cw:
            _require(self.tau_p is None,
                     "a CW source must not carry a pulse duration; got "
                     f"tau_p={self.tau_p!r}")
        else:
            _require(self.tau_p is not None, "tau_p is required unless cw=True")
            _finite_positive(self.tau_p, "tau_p")

    @classmethod
    def cw_pump(cls, sigma: float) -> "SourceParams":
        """Source driven by a continuous-wave pump."""
        return cls(sigma=sigma, tau_p=None, cw=True)


@dataclass(frozen=True)
class SourceParamsRho:
    """Source described by single-photon spectral width and spectral correlation.

    sigma0: spectral width of each emitted photon, 1/s.
    rho:    spectral correlation coefficient, strictly inside (-1, 1).
    """

    sigma0: float
    rho: float

    def __post_init__(self):
        _finite_positive(self.sigma0, "sigma0")
        _require(math.isfinite(self.rho) and -1.0 < self.rho < 1.0,
                 f"rho must lie strictly inside (-1, 1), got {self.rho!r}")


@dataclass(frozen=True)
class LinkParams:
    """A pair of identical fiber arms.

    beta:   group-velocity-dispersion coefficient, s^2/m, sign preserved.
            Beware the factor-of-two trap: data sheets sometimes quote the
            combined value 2*beta; configs accept a ``two_beta`` key for that.
    length: fiber length per arm, m.
    """

    beta: float
    length: float

    def __post_init__(self):
        _require(isinstance(self.beta, (int, float)) and math.isfinite(self.beta),
                 f"beta must be finite, got {self.beta!r}")
        _require(isinstance(self.length, (int, float))
                 and math.isfinite(self.length) and self.length >= 0,
                 f"length must be finite and >= 0, got {self.length!r}")

    @property
    def abs_beta_length(self) -> float:
        """|beta| * L, the dispersion scale of the link in s^2."""
        return abs(self.beta) * self.length


@dataclass(frozen=True)
class TemporalCovariance:
    """Joint Gaussian statistics of the two arrival times.

    rho_t:      temporal correlation coefficient, strictly inside (-1, 1).
    tau1, tau2: standard deviations of the two arrival times, s.
    mu1, mu2:   centroid offsets, s.

    The sign convention is plain: positive ``rho_t`` means positive
    covariance of (t1, t2).
    """

    rho_t: float
    tau1: float
    tau2: float
    mu1: float = 0.0
    mu2: float = 0.0

    def __post_init__(self):
        _require(math.isfinite(self.rho_t) and -1.0 < self.rho_t < 1.0,
                 f"rho_t must lie strictly inside (-1, 1), got {self.rho_t!r}")
        _finite_positive(self.tau1, "tau1")
        _finite_positive(self.tau2, "tau2")
        for name in ("mu1", "mu2"):
            v = getattr(self, name)
            _require(isinstance(v, (int, float)) and math.isfinite(v),
                     f"{name} must be finite, got {v!r}")

    @property
    def covariance_matrix(self) -> np.ndarray:
        """The 2x2 covariance matrix (positive definite for valid parameters)."""
        off = self.rho_t * self.tau1 * self.tau2
        return np.array([[self.tau1 ** 2, off], [off, self.tau2 ** 2]])

    def swapped(self) -> "TemporalCovariance":
        """Statistics with the roles of the two photons exchanged."""
        return replace(self, tau1=self.tau2, tau2=self.tau1,
                       mu1=self.mu2, mu2=self.mu1)


def to_rho_form(p: SourceParams) -> SourceParamsRho:
    """Convert crystal/pump settings to the spectral-correlation description.

    Inverts the forward map of :func:`from_rho_form`:

        rho    = (4 - sigma^2 tau_p^2) / (4 + sigma^2 tau_p^2)
        sigma0 = sigma / (2 sqrt(1 - rho))

    The decorrelation locus sigma*tau_p = 2 maps to rho = 0 exactly.  A CW
    pump corresponds to the boundary rho -> -1 and is therefore not
    representable; it is rejected.

    Precision note: sigma0 is evaluated from sigma*tau_p directly (with
    g = (sigma tau_p / 2)^2, 1 - rho equals 2g/(1+g) exactly, giving
    sigma0 = sqrt(1+g) / (sqrt(2) tau_p)) instead of re-deriving 1 - rho
    from the rounded correlation.  The stored rho itself still resolves
    1 -+ rho only down to the floating-point spacing around one, so extreme
    products sigma*tau_p far outside [1e-2, 1e2] round-trip at reduced
    precision; the (sigma, tau_p) description has no such limit.
    """
    if p.cw:
        raise CWPumpError(
            "a CW pump corresponds to the boundary rho -> -1 and has no "
            "valid spectral-correlation representation")
    g = (0.5 * p.sigma * p.tau_p) ** 2
    rho = (1.0 - g) / (1.0 + g)
    sigma0 = math.sqrt(1.0 + g) / (math.sqrt(2.0) * p.tau_p)
    return SourceParamsRho(sigma0=sigma0, rho=rho)


def from_rho_form(p: SourceParamsRho) -> SourceParams:
    """Convert the spectral-correlation description to crystal/pump settings.

        tau_p = 1 / (sigma0 sqrt(1 + rho))
        sigma = 2 sigma0 sqrt(1 - rho)
    """
    if not -1.0 < p.rho < 1.0:
        raise ValueError(f"rho must lie strictly inside (-1, 1), got {p.rho!r}")
    tau_p = 1.0 / (p.sigma0 * math.sqrt(1.0 + p.rho))
    sigma = 2.0 * p.sigma0 * math.sqrt(1.0 - p.rho)
    return SourceParams(sigma=sigma, tau_p=tau_p)
