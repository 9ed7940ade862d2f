"""Tail probabilities of Gaussian quadratic forms ``Q = sum alpha_i Z_i^2``.

Four moment-based approximations plus exact numerical inversion of the
characteristic function for a known (finite) spectrum.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.optimize import brentq
from scipy.special import gammainc, gammaincc, ndtr

# Smallest x/E[Q] at which P(Y_1 >= x/E[Q]) bounds every quadratic form tail.
CLASSICAL_THRESHOLD = 1.5365


class NumericalError(RuntimeError):
    """Inversion could not reach the requested accuracy."""


class DegenerateError(ValueError):
    """A normal or Pearson tail was asked for with non-positive variance."""


@dataclass(frozen=True)
class QFormMoments:
    mean: float
    variance: float
    skewness: float
    central3: float
    central4: float
    excess_kurtosis: float


def qform_moments(alphas):
    """Moments of ``sum alpha_i Z_i^2`` for i.i.d. standard normal ``Z_i``."""
    a = np.asarray(alphas, dtype=np.float64)
    if a.ndim != 1 or a.size == 0 or np.any(a < 0):
        raise ValueError("alphas must be a non-empty vector of non-negative numbers")
    mean = a.sum()
    var = 2 * (a**2).sum()
    c3 = 8 * (a**3).sum()
    c4 = 48 * (a**4).sum() + 3 * var**2
    if var == 0:
        return QFormMoments(mean, 0.0, 0.0, c3, c4, 0.0)
    return QFormMoments(mean, var, c3 / var**1.5, c3, c4, c4 / var**2 - 3)


def chi2_upper_tail(df, x):
    """``P(Y_df >= x)`` for real ``df > 0``."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if x <= 0:
        return 1.0
    return float(gammaincc(0.5 * df, 0.5 * x))


@dataclass(frozen=True)
class PValue:
    p: float
    valid: bool = True
    method: str = ""
    note: str = ""


def _degenerate(x, mean, method):
    if mean <= 0:
        return PValue(1.0, True, method, "degenerate null distribution (zero mean)")
    return None


def pvalue_classical(x, mean):
    """``P(Y_1 >= x / E)``: conservative for every quadratic form once valid."""
    hit = _degenerate(x, mean, "classical")
    if hit:
        return hit
    ratio = x / mean
    return PValue(chi2_upper_tail(1.0, ratio), ratio >= CLASSICAL_THRESHOLD, "classical")


def variance_alpha(mean, variance):
    return min(1.0, math.sqrt(variance / (2.0 * mean**2)))


def pvalue_variance(x, mean, variance):
    """``P(alpha Y_{1/alpha} >= x / E)`` with ``alpha = min(1, sqrt(Var / 2E^2))``."""
    hit = _degenerate(x, mean, "variance")
    if hit:
        return hit
    a = variance_alpha(mean, variance)
    ratio = x / mean
    p = chi2_upper_tail(1.0 / a, ratio / a) if a > 0 else float(ratio <= 1.0)
    return PValue(p, ratio >= CLASSICAL_THRESHOLD, "variance")


def pvalue_clt(x, mean, variance):
    """Normal upper tail of the standardized value."""
    hit = _degenerate(x, mean, "clt")
    if hit:
        return hit
    if variance <= 0:
        raise DegenerateError(f"variance must be positive, got {variance}")
    return PValue(float(ndtr(-(x - mean) / math.sqrt(variance))), True, "clt")


def pvalue_pearson(x, mean, variance, skewness):
    """Shifted and scaled chi-squared matching mean, variance and skewness.

    With ``beta = skew / sqrt(8)`` the tail is
    ``P(beta Y_{1/beta^2} - 1/beta >= sqrt(2) (x - E) / sqrt(Var))``.
    Non-positive skewness falls back to the normal tail.
    """
    hit = _degenerate(x, mean, "pearson")
    if hit:
        return hit
    if variance <= 0:
        raise DegenerateError(f"variance must be positive, got {variance}")
    if skewness is None or not skewness > 0 or not math.isfinite(skewness):
        res = pvalue_clt(x, mean, variance)
        return PValue(res.p, True, "pearson", "non-positive skewness, normal tail used")
    beta = skewness / math.sqrt(8.0)
    z = math.sqrt(2.0) * (x - mean) / math.sqrt(variance)
    return PValue(chi2_upper_tail(1.0 / beta**2, (z + 1.0 / beta) / beta), True, "pearson")


def x0(alpha):
    """Crossing point of the ``Y_m/m`` and ``Y_{m+1}/(m+1)`` distribution functions.

    ``m = ceil(1/alpha)``. Beyond this point ``alpha Y_{1/alpha}`` dominates the
    tail of any quadratic form with mean 1 and the matching variance.
    """
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    m = math.ceil(1.0 / alpha - 1e-12)

    def gap(x):
        return gammainc(0.5 * m, 0.5 * m * x) - gammainc(0.5 * (m + 1), 0.5 * (m + 1) * x)

    xs = np.linspace(0.01, 5.0, 5000)
    vals = gap(xs)
    for i in range(len(xs) - 1):
        if vals[i] > 0 and vals[i + 1] <= 0:
            return brentq(gap, xs[i], xs[i + 1], xtol=1e-13)
    raise NumericalError(f"no crossing found for alpha={alpha}")


# ---------------------------------------------------------------------------
# exact tail by numerical inversion

_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


def _truncation_point(a, tol):
    """Smallest ``U`` such that the integrand's envelope beyond ``U`` is below ``tol``.

    Uses ``(1 + a^2 u^2)^(1/4) >= sqrt(a u)`` for the ``k`` largest weights and
    picks the best ``k``.
    """
    top = np.sort(a)[::-1]
    half_logs = 0.5 * np.cumsum(np.log(top))
    k = np.arange(1, top.size + 1)
    log_u = -(np.log(math.pi * (k / 2.0) * tol) + half_logs) / (k / 2.0)
    return float(np.exp(log_u.min()))


def _integrand(u, a, x):
    au = np.outer(u, a)
    theta = 0.5 * np.arctan(au).sum(axis=1) - 0.5 * x * u
    log_rho = 0.25 * np.log1p(au * au).sum(axis=1)
    return np.sin(theta) / (u * np.exp(log_rho))


def _phase_amplitude(u, a):
    au = a * u
    return 0.5 * np.arctan(au).sum(), u * math.exp(0.25 * np.log1p(au * au).sum())


def tail_exact(alphas, x, tol=1e-9, max_panels=4_000_000):
    """``P(sum alpha_i Z_i^2 >= x)`` by inverting the characteristic function.

    The oscillatory integral is split into half-period Gauss-Legendre panels
    up to a point where either the remainder is provably below ``tol`` or the
    phase has flattened; in the latter case the remaining Fourier-type
    integral is handed to QUADPACK's oscillatory routine.
    """
    a = np.asarray(alphas, dtype=np.float64)
    if a.ndim != 1 or np.any(a < 0):
        raise ValueError("alphas must be a vector of non-negative numbers")
    a = a[a > 0]
    if a.size == 0 or x <= 0:
        return 1.0
    if a.size == 1:
        return chi2_upper_tail(1.0, x / a[0])
    scale = a.sum()
    a = a / scale
    x = x / scale

    u_trunc = _truncation_point(a, tol)
    u_flat = 50.0 / a.min()
    upper = min(u_trunc, u_flat)
    width = 0.5 * min(2 * math.pi / x, 1.0)
    panels = int(math.ceil(upper / width))
    if panels > max_panels:
        raise NumericalError(f"inversion needs {panels} panels; spectrum too spread")
    edges = np.linspace(0.0, upper, panels + 1)
    total = 0.0
    step = max(1, 200_000 // (a.size * _GL_X.size))
    for i in range(0, panels, step):
        lo, hi = edges[i:min(i + step, panels)], edges[i + 1:min(i + step, panels) + 1]
        half = 0.5 * (hi - lo)
        nodes = (half[:, None] * (_GL_X[None, :] + 1.0) + lo[:, None]).ravel()
        weights = (half[:, None] * _GL_W[None, :]).ravel()
        total += weights @ _integrand(nodes, a, x)

    if upper < u_trunc:
        # sin(phi - xu/2) = sin(phi) cos(xu/2) - cos(phi) sin(xu/2), phi slowly varying
        def amp_sin(u):
            phi, den = _phase_amplitude(u, a)
            return math.sin(phi) / den

        def amp_cos(u):
            phi, den = _phase_amplitude(u, a)
            return math.cos(phi) / den

        omega = 0.5 * x
        part1 = integrate.quad(amp_sin, upper, np.inf, weight="cos", wvar=omega, limlst=200)[0]
        part2 = integrate.quad(amp_cos, upper, np.inf, weight="sin", wvar=omega, limlst=200)[0]
        total += part1 - part2
    p = 0.5 + total / math.pi
    return float(min(1.0, max(0.0, p)))


def pvalue_exact(x, alphas):
    return PValue(tail_exact(alphas, x), True, "eigenvalue")
