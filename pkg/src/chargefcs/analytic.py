"""Closed-form large-time predictions for the transferred-charge CGF.

The central object is the scaling form chi(lambda, t) ~ sqrt(t) F(w)
with w a lambda- and density-dependent combination and

    F(w) = (1/sqrt(pi)) sum_{n>=1} (-1)^(n+1) w^n / n^(3/2),

a rescaled polylogarithm, F(w) = -Li_{3/2}(-w)/sqrt(pi).  The series
converges on |w| <= 1; beyond that F is continued with the integral
representation of the polylogarithm, which is analytic off the branch
cut -w in [1, inf).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad

from .core import interchain_coupling

__all__ = [
    "ContinuationError",
    "cgf_argument",
    "sep_scaling_function",
    "sep_cgf",
    "sep_cumulant",
    "excess_kurtosis_halffilling",
    "variance_deficit_prediction",
    "third_cumulant_deficit_prediction",
    "DEFAULT_LAMBDA_GRID",
]

# CLI default counting-field grid.
DEFAULT_LAMBDA_GRID = np.linspace(-3.0, 3.0, 101)

_SQRT_PI = math.sqrt(math.pi)
_SERIES_RADIUS = 0.9
_CUT_PAD = 1e-12


class ContinuationError(RuntimeError):
    """The polylogarithm continuation hit its branch cut or failed to converge."""


def cgf_argument(lam: float, rho_l: float, rho_r: float) -> complex:
    """Argument w(lambda) of the CGF scaling function for bath densities rho_l/r."""
    ep = np.exp(1j * lam) - 1.0
    em = np.exp(-1j * lam) - 1.0
    return rho_l * ep + rho_r * em + rho_l * rho_r * ep * em


def _series(w: complex) -> complex:
    total = 0.0 + 0.0j
    term = 1.0 + 0.0j
    for n in range(1, 500):
        term *= -w if n > 1 else w
        inc = term / n**1.5
        total += inc
        if abs(inc) < 1e-18:
            break
    return total / _SQRT_PI


def _continued(w: complex) -> complex:
    # F(w) = -Li_{3/2}(z)/sqrt(pi) at z = -w, with
    # Li_s(z) = z/Gamma(s) Integral_0^inf u^(s-1)/(e^u - z) du.
    # Substituting u = v^2 removes the sqrt kink at the origin:
    # Li_{3/2}(z) = (4 z / sqrt(pi)) Integral_0^inf v^2/(e^{v^2} - z) dv.
    z = complex(-w)
    if abs(z.imag) < _CUT_PAD and z.real >= 1.0 - _CUT_PAD:
        raise ContinuationError(f"argument {z} lies on the branch cut [1, inf)")

    def integrand(v: float) -> complex:
        return v * v / (np.exp(v * v) - z)

    pts = []
    if abs(z) > 1.0:
        pts.append(math.sqrt(math.log(abs(z))))
    val, err = quad(
        integrand, 0.0, 9.0, points=pts or None,
        limit=400, epsabs=1e-13, epsrel=1e-12, complex_func=True,
    )
    if abs(err) > 1e-9:
        raise ContinuationError(f"continuation quadrature error {abs(err):g} too large")
    li = 4.0 * z / _SQRT_PI * val
    return -li / _SQRT_PI


def sep_scaling_function(w: complex) -> complex:
    """F(w): alternating series inside |w| <= 0.9, integral continuation outside."""
    w = complex(w)
    if abs(w) <= _SERIES_RADIUS:
        return _series(w)
    return _continued(w)


def sep_cgf(
    lam: np.ndarray | float, t: float, rho_l: float, rho_r: float
) -> np.ndarray | complex:
    """Asymptotic CGF sqrt(t) F(w(lambda)) of the transferred charge.

    Valid as the large-t limit; engines are compared against it only
    within their statistical windows at t >= O(10^2).
    """
    if t <= 0:
        raise ValueError(f"t must be > 0, got {t}")
    scalar = np.isscalar(lam)
    lams = np.atleast_1d(np.asarray(lam, dtype=float))
    out = np.array(
        [math.sqrt(t) * sep_scaling_function(cgf_argument(x, rho_l, rho_r)) for x in lams]
    )
    return complex(out[0]) if scalar else out


# Taylor coefficients of exp(+-i lambda) - 1 around 0, through order 4.
_EXP_PLUS = np.array([0, 1j, -0.5, -1j / 6, 1 / 24], dtype=complex)
_EXP_MINUS = _EXP_PLUS.conjugate()


def _w_poly(rho_l: float, rho_r: float) -> np.ndarray:
    """Degree-4 Taylor polynomial of w(lambda) at lambda = 0."""
    cross = np.convolve(_EXP_PLUS, _EXP_MINUS)[:5]
    return rho_l * _EXP_PLUS + rho_r * _EXP_MINUS + rho_l * rho_r * cross


def sep_cumulant(order: int, t: float, rho_l: float, rho_r: float) -> float:
    """Exact lambda-derivative cumulant C_order of the asymptotic CGF.

    Composes the degree-4 Taylor polynomial of w with the series for F
    and reads off C_m = (-i)^m m! [lambda^m] chi.  No finite
    differences are involved.
    """
    if order not in (1, 2, 3, 4):
        raise ValueError(f"order must be in 1..4, got {order}")
    if t <= 0:
        raise ValueError(f"t must be > 0, got {t}")
    wp = _w_poly(rho_l, rho_r)
    chi = np.zeros(5, dtype=complex)
    power = np.zeros(5, dtype=complex)
    power[0] = 1.0
    for n in range(1, 5):
        power = np.convolve(power, wp)[:5]
        chi += (-1) ** (n + 1) / (n**1.5 * _SQRT_PI) * power
    val = (-1j) ** order * math.factorial(order) * chi[order] * math.sqrt(t)
    if abs(val.imag) > 1e-12 * max(1.0, abs(val.real)):
        raise AssertionError(f"cumulant came out complex: {val}")
    return float(val.real)


def excess_kurtosis_halffilling(t: float) -> float:
    """Predicted C4/C2^2 = (4 - 3 sqrt(2)) sqrt(pi) / (2 sqrt(t)) at half filling."""
    if t <= 0:
        raise ValueError(f"t must be > 0, got {t}")
    return (4.0 - 3.0 * math.sqrt(2.0)) * _SQRT_PI / (2.0 * math.sqrt(t))


def _tanh_half(mu: float) -> float:
    if mu == math.inf:
        return 1.0
    if mu == -math.inf:
        return -1.0
    return math.tanh(mu / 2.0)


def variance_deficit_prediction(mu: float, t: float, d: float) -> float:
    """Leading ensemble variance reduction a(d) tanh^2(mu/2) / (16 sqrt(pi t))."""
    if t <= 0:
        raise ValueError(f"t must be > 0, got {t}")
    a = interchain_coupling(d)
    return a * _tanh_half(mu) ** 2 / (16.0 * math.sqrt(math.pi * t))


def third_cumulant_deficit_prediction(mu: float, t: float, d: float) -> float:
    """Linear-response third-cumulant reduction 3 a(d) mu / (64 sqrt(pi t))."""
    if t <= 0:
        raise ValueError(f"t must be > 0, got {t}")
    if not math.isfinite(mu):
        raise ValueError("linear-response formula needs finite mu")
    a = interchain_coupling(d)
    return 3.0 * a * mu / (64.0 * math.sqrt(math.pi * t))
