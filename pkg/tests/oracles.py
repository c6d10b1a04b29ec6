"""Independent numerical oracles used to validate the closed forms.

Nothing in here reuses the closed-form widths or correlation from the
package; each oracle goes back to a defining integral or to first-principles
phase-space sampling so the tests genuinely cross-check the implementation.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import dblquad, quad

from heraldtime.params import TemporalCovariance

trapezoid = getattr(np, "trapezoid", None) or np.trapz


# --------------------------------------------------------------------------
# Quadrature oracles for the joint / conditional densities
# --------------------------------------------------------------------------

def joint_total_mass(cov: TemporalCovariance, half_span: float = 8.0) -> float:
    """Integral of the joint density over +/- half_span standard deviations.

    Integrates in standardized coordinates so the integrand is O(1).
    """
    from heraldtime.analytic import joint_density

    def integrand(z2, z1):
        return float(joint_density(cov.mu1 + cov.tau1 * z1,
                                   cov.mu2 + cov.tau2 * z2, cov)) \
            * cov.tau1 * cov.tau2

    value, _ = dblquad(integrand, -half_span, half_span,
                       lambda _: -half_span, lambda _: half_span,
                       epsabs=1e-10, epsrel=1e-10)
    return value


def conditional_pdf_quad(t1_grid, center: float, width: float,
                         cov: TemporalCovariance,
                         half_span: float = 8.0) -> np.ndarray:
    """Windowed conditional density from the defining ratio of integrals.

    numerator(t1)  = integral of the joint density over the window in t2
    denominator    = integral of the numerator over all t1

    evaluated by adaptive quadrature on the joint density alone.
    """
    from heraldtime.analytic import joint_density

    lo = center - 0.5 * width
    hi = center + 0.5 * width

    def numerator(t1):
        def integrand(z2):
            return float(joint_density(t1, cov.mu2 + cov.tau2 * z2, cov)) \
                * cov.tau2
        a = (lo - cov.mu2) / cov.tau2
        b = (hi - cov.mu2) / cov.tau2
        value, _ = quad(integrand, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)
        return value

    def denominator():
        def integrand(z1):
            return numerator(cov.mu1 + cov.tau1 * z1) * cov.tau1
        value, _ = quad(integrand, -half_span, half_span, epsabs=1e-12,
                        epsrel=1e-10, limit=200)
        return value

    den = denominator()
    return np.array([numerator(t) for t in np.asarray(t1_grid)]) / den


def conditional_moments_quad(cov: TemporalCovariance, center: float,
                             width: float, half_span: float = 8.0):
    """Mean and standard deviation of the windowed conditional by quadrature."""
    from heraldtime.analytic import conditional_density

    def moment(k):
        def integrand(z1):
            t1 = cov.mu1 + cov.tau1 * z1
            return (t1 ** k) * float(conditional_density(t1, center, width,
                                                         cov)) * cov.tau1
        value, _ = quad(integrand, -half_span, half_span, epsabs=1e-12,
                        epsrel=1e-10, limit=400)
        return value

    m0 = moment(0)
    m1 = moment(1) / m0
    m2 = moment(2) / m0
    return m1, math.sqrt(m2 - m1 * m1)


# --------------------------------------------------------------------------
# Spectral-intensity moments of the two-photon Gaussian amplitude
# --------------------------------------------------------------------------

def spectral_intensity_moments(sigma: float, tau_p: float):
    """(Var(nu1), Cov(nu1, nu2)) of |phi|^2 by 2-D quadrature.

    phi(nu1, nu2) ~ exp(-(nu1 - nu2)^2 / sigma^2 - (nu1 + nu2)^2 tau_p^2 / 4)
    evaluated in scaled coordinates for a well-conditioned integrand.
    """
    # scale each axis by a conservative width estimate
    s_minus = sigma / 2.0
    s_plus = 1.0 / tau_p
    scale = math.sqrt(s_minus ** 2 + s_plus ** 2)

    def intensity(x1, x2):
        n1 = x1 * scale
        n2 = x2 * scale
        return math.exp(-2.0 * (n1 - n2) ** 2 / sigma ** 2
                        - (n1 + n2) ** 2 * tau_p ** 2 / 2.0)

    span = 10.0

    def integrate(f):
        value, _ = dblquad(f, -span, span, lambda _: -span, lambda _: span,
                           epsabs=1e-12, epsrel=1e-10)
        return value

    mass = integrate(intensity)
    var = integrate(lambda x1, x2: x1 * x1 * intensity(x1, x2)) / mass
    cov = integrate(lambda x1, x2: x1 * x2 * intensity(x1, x2)) / mass
    return var * scale ** 2, cov * scale ** 2


# --------------------------------------------------------------------------
# Phase-space (Wigner) Monte-Carlo oracle for dispersed arrival times
# --------------------------------------------------------------------------

def wigner_pairs(sigma: float, tau_p: float, beta: float, length: float,
                 n: int, rng: np.random.Generator) -> np.ndarray:
    """Sample dispersed arrival-time pairs from first principles.

    The chronocyclic (Wigner) distribution of a real Gaussian amplitude
    exp(-nu^T A nu / 2) is a product of two independent Gaussians: frequency
    covariance A^{-1}/2 (the spectral intensity moments) and emission-time
    covariance A/2 (the transform-limited envelope).  Propagation through a
    fiber with quadratic spectral phase beta*L*nu^2 shears the distribution:
    each frequency component acquires the group delay 2*beta*L*nu.  Arrival
    times are therefore t = t0 + 2*beta*L*nu with (t0, nu) drawn from the
    initial Wigner product.  For Gaussian states the Wigner function is a
    true probability density, so this sampling is exact.

    For the amplitude exp(-(nu1-nu2)^2/sigma^2 - (nu1+nu2)^2 tau_p^2/4) the
    matrix A/2 is [[c, d], [d, c]] with c = 1/sigma^2 + tau_p^2/4 and
    d = tau_p^2/4 - 1/sigma^2, and A^{-1}/2 = [[c, -d], [-d, c]] * sigma^2 /
    (4 tau_p^2).
    """
    c = 1.0 / sigma ** 2 + tau_p ** 2 / 4.0
    d = tau_p ** 2 / 4.0 - 1.0 / sigma ** 2
    cov_t0 = np.array([[c, d], [d, c]])
    cov_nu = np.array([[c, -d], [-d, c]]) * sigma ** 2 / (4.0 * tau_p ** 2)
    t0 = rng.multivariate_normal([0.0, 0.0], cov_t0, size=n, method="cholesky")
    nu = rng.multivariate_normal([0.0, 0.0], cov_nu, size=n, method="cholesky")
    return t0 + 2.0 * beta * length * nu


# --------------------------------------------------------------------------
# Brute-force Fourier oracle (validates the Wigner construction itself)
# --------------------------------------------------------------------------

def _chirped_profile_var(env_width: float, chirp: float,
                         n_t: int = 801) -> float:
    """Variance of |integral of exp(-nu^2/env_width^2 + i chirp nu^2 - i nu t)|^2.

    Direct numerical Fourier transform on dense grids; no Gaussian-integral
    shortcuts.  env_width is the 1/e half-width of the *amplitude* envelope.
    The frequency grid is refined until the trapezoid sum resolves the
    oscillations of the kernel over the whole time span (dnu * t_max << pi).
    """
    nu_max = 8.0 * env_width
    # conservative time span: transform-limited core plus group-delay sweep
    t_half = 10.0 * (1.0 / env_width + 2.0 * abs(chirp) * env_width)
    n_nu = 1 << max(12, math.ceil(math.log2(4.0 * nu_max * t_half / math.pi)))
    nu = np.linspace(-nu_max, nu_max, n_nu)
    dn = nu[1] - nu[0]
    assert dn * t_half < math.pi / 2.0, "frequency grid too coarse"
    amp = np.exp(-(nu / env_width) ** 2 + 1j * chirp * nu ** 2)
    t = np.linspace(-t_half, t_half, n_t)
    profile = np.empty(n_t)
    for i in range(0, n_t, 128):
        block = t[i:i + 128]
        kernel = np.exp(-1j * np.outer(block, nu))
        profile[i:i + 128] = np.abs(kernel @ amp * dn) ** 2
    mass = trapezoid(profile, t)
    mean = trapezoid(t * profile, t) / mass
    var = trapezoid((t - mean) ** 2 * profile, t) / mass
    # the profile must have decayed at the grid edges for the result to hold
    assert profile[0] < 1e-10 * profile.max()
    assert profile[-1] < 1e-10 * profile.max()
    return float(var)


def fourier_time_moments(sigma: float, tau_p: float, beta: float,
                         length: float):
    """(Var(t1), Cov(t1, t2)) from the dispersed two-photon amplitude.

    In sum/difference coordinates nu_pm = nu1 +/- nu2 the amplitude
    factorizes into exp(-nu_-^2/sigma^2) * exp(-nu_+^2 tau_p^2/4), the
    quadratic phase splits as beta*L*(nu1^2 + nu2^2) = beta*L*(nu_+^2 +
    nu_-^2)/2, and the transform kernel exp(-i(nu1 t1 + nu2 t2)) becomes
    exp(-i nu_+ s_+) exp(-i nu_- s_-) with s_pm = (t1 +/- t2)/2.  The joint
    time profile is therefore a product of two 1-D chirped transforms in the
    half-coordinates; since t1 = s_+ + s_- and t2 = s_+ - s_-,

        Var(t1) = Var(s_+) + Var(s_-)
        Cov(t1, t2) = Var(s_+) - Var(s_-).

    Each 1-D profile is evaluated by brute-force numerical Fourier
    integration with no Gaussian-integral shortcuts.
    """
    chirp = beta * length / 2.0
    # s_- transform: envelope exp(-nu^2/sigma^2); s_+ : exp(-nu^2 tau_p^2/4)
    var_minus = _chirped_profile_var(sigma, chirp)
    var_plus = _chirped_profile_var(2.0 / tau_p, chirp)
    return (var_plus + var_minus, var_plus - var_minus)
