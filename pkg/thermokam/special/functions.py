"""Special functions: complete elliptic integrals, erfc and the zeta_l family.

Everything here is pure and vectorised over numpy arrays where the argument
allows it. The zeta_l polynomials are the n-th Maclaurin polynomials of
(2T)^n n! exp(x) evaluated at x = xi^2/(2T), with l = 2n + 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np

from ..errors import DomainError

_AGM_RTOL = 1e-15
_AGM_MAX_ITER = 40
_ERFC_SERIES_CUTOFF = 2.0
_ERFC_CF_TERMS = 220
_SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class EllipticPair:
    K: float
    E: float
    k: float


# -----------------------------
# Complete elliptic integrals
# -----------------------------

def elliptic_KE(k: float) -> EllipticPair:
    """K(k) and E(k) for modulus 0 <= k < 1 by the arithmetic-geometric mean."""
    k = float(k)
    if not (0.0 <= k < 1.0) or math.isnan(k):
        raise DomainError(f"elliptic modulus must lie in [0, 1), got k={k!r}")
    a = 1.0
    b = math.sqrt((1.0 - k) * (1.0 + k))
    c = k
    # E/K = 1 - sum 2^(n-1) c_n^2 with c_0 = k
    acc = 0.5 * c * c
    power = 0.5
    for _ in range(_AGM_MAX_ITER):
        if abs(a - b) <= _AGM_RTOL * a:
            break
        c = 0.5 * (a - b)
        a, b = 0.5 * (a + b), math.sqrt(a * b)
        power *= 2.0
        acc += power * c * c
    K = math.pi / (2.0 * a)
    E = K * (1.0 - acc)
    return EllipticPair(K=K, E=E, k=k)


def elliptic_K_derivative(k: float) -> float:
    """dK/dk = E/(k k'^2) - K/k, continuous with value 0 at k = 0."""
    pair = elliptic_KE(k)
    if k < 1e-4:
        # series: K = pi/2 (1 + k^2/4 + 9k^4/64 + ...)
        return 0.5 * math.pi * (k / 2.0 + 9.0 * k ** 3 / 16.0)
    kp2 = (1.0 - k) * (1.0 + k)
    return pair.E / (k * kp2) - pair.K / k


def elliptic_E_derivative(k: float) -> float:
    """dE/dk = (E - K)/k, continuous with value 0 at k = 0."""
    pair = elliptic_KE(k)
    if k < 1e-4:
        # series: E = pi/2 (1 - k^2/4 - 3k^4/64 - ...)
        return -0.5 * math.pi * (k / 2.0 + 3.0 * k ** 3 / 16.0)
    return (pair.E - pair.K) / k


def complementary_K(k: float) -> float:
    """K(k') with k' = sqrt(1 - k^2); defined for 0 < k < 1."""
    if not (0.0 < k < 1.0):
        raise DomainError(f"complementary modulus needs 0 < k < 1, got k={k!r}")
    return elliptic_KE(math.sqrt((1.0 - k) * (1.0 + k))).K


# -----------------------------
# Complementary error function
# -----------------------------

def _erf_series(x: float) -> float:
    # erf(x) = 2x/sqrt(pi) e^{-x^2} sum (2x^2)^n / (1*3*...*(2n+1)); all terms positive
    x2 = x * x
    term = 1.0
    total = 1.0
    n = 0
    while term > 1e-17 * total:
        n += 1
        term *= 2.0 * x2 / (2 * n + 1)
        total += term
    return 2.0 * x / _SQRT_PI * math.exp(-x2) * total


def _erfcx_continued_fraction(x: float) -> float:
    # e^{x^2} erfc(x) = 1/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    f = x
    for n in range(_ERFC_CF_TERMS, 0, -1):
        f = x + 0.5 * n / f
    return 1.0 / (_SQRT_PI * f)


def _erfc_scalar(x: float) -> float:
    if math.isnan(x):
        return math.nan
    if x < 0.0:
        return 2.0 - _erfc_scalar(-x)
    if x < _ERFC_SERIES_CUTOFF:
        return 1.0 - _erf_series(x)
    if x * x > 745.0:
        return 0.0
    return math.exp(-x * x) * _erfcx_continued_fraction(x)


def _erfcx_scalar(x: float) -> float:
    if math.isnan(x):
        return math.nan
    if x >= _ERFC_SERIES_CUTOFF:
        return _erfcx_continued_fraction(x)
    if x < -26.0:
        return math.inf
    return math.exp(x * x) * _erfc_scalar(x)


def erfc(x):
    """Complementary error function; scalar or array input."""
    if np.ndim(x) == 0:
        return _erfc_scalar(float(x))
    arr = np.asarray(x, dtype=float)
    return np.vectorize(_erfc_scalar, otypes=[float])(arr)


def erfcx(x):
    """Scaled complementary error function e^{x^2} erfc(x)."""
    if np.ndim(x) == 0:
        return _erfcx_scalar(float(x))
    arr = np.asarray(x, dtype=float)
    return np.vectorize(_erfcx_scalar, otypes=[float])(arr)


# -----------------------------
# zeta_l family
# -----------------------------

def _check_l(l: int, T: float) -> int:
    if int(l) != l or l < 1 or l % 2 == 0:
        raise DomainError(f"l must be an odd positive integer, got l={l!r}")
    if not T > 0.0:
        raise DomainError(f"temperature must be positive, got T={T!r}")
    return int(l)


@lru_cache(maxsize=64)
def zeta_coefficients(l: int, T: float) -> Tuple[float, ...]:
    """Coefficients c_j of zeta_l in powers of xi^2: c_j = n!/j! (2T)^(n-j)."""
    l = _check_l(l, T)
    n = (l - 1) // 2
    return tuple(math.factorial(n) / math.factorial(j) * (2.0 * T) ** (n - j) for j in range(n + 1))


def _poly_xi2(coeffs, xi, *, derivative: int = 0):
    # evaluate sum c_j xi^(2j) (or its xi-derivatives) by Horner in xi^2
    xi = np.asarray(xi, dtype=float)
    x2 = xi * xi
    if derivative == 0:
        out = np.zeros_like(x2)
        for c in reversed(coeffs):
            out = out * x2 + c
        return out
    if derivative == 1:
        # d/dxi sum c_j xi^(2j) = xi * sum 2j c_j xi^(2j-2)
        out = np.zeros_like(x2)
        for j in range(len(coeffs) - 1, 0, -1):
            out = out * x2 + 2 * j * coeffs[j]
        return xi * out
    if derivative == 2:
        out = np.zeros_like(x2)
        for j in range(len(coeffs) - 1, 0, -1):
            out = out * x2 + 2 * j * (2 * j - 1) * coeffs[j]
        return out
    raise ValueError("derivative order must be 0, 1 or 2")


def _maybe_scalar(value, xi):
    return float(value) if np.ndim(xi) == 0 else value


def zeta_l(xi, l: int, T: float):
    """zeta_l(xi) > 0; zeta_1 == 1."""
    return _maybe_scalar(_poly_xi2(zeta_coefficients(l, T), xi), xi)


def zeta_l_prime(xi, l: int, T: float):
    return _maybe_scalar(_poly_xi2(zeta_coefficients(l, T), xi, derivative=1), xi)


def zeta_l_second(xi, l: int, T: float):
    return _maybe_scalar(_poly_xi2(zeta_coefficients(l, T), xi, derivative=2), xi)


def Zeta_l(xi, l: int, T: float):
    """Zeta_l(xi) = xi^2/2 - T ln(zeta_l(xi)/zeta_l(0)); Zeta_1 = xi^2/2."""
    coeffs = zeta_coefficients(l, T)
    xi_arr = np.asarray(xi, dtype=float)
    value = 0.5 * xi_arr * xi_arr - T * np.log(_poly_xi2(coeffs, xi_arr) / coeffs[0])
    return _maybe_scalar(value, xi)


def Zeta_l_prime(xi, l: int, T: float):
    """Zeta_l'(xi) = xi^l / zeta_l(xi)."""
    coeffs = zeta_coefficients(l, T)
    xi_arr = np.asarray(xi, dtype=float)
    return _maybe_scalar(xi_arr ** l / _poly_xi2(coeffs, xi_arr), xi)


def Zeta_l_second(xi, l: int, T: float):
    coeffs = zeta_coefficients(l, T)
    xi_arr = np.asarray(xi, dtype=float)
    z = _poly_xi2(coeffs, xi_arr)
    dz = _poly_xi2(coeffs, xi_arr, derivative=1)
    value = (l * xi_arr ** (l - 1) * z - xi_arr ** l * dz) / (z * z)
    return _maybe_scalar(value, xi)
