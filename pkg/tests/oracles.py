"""Independent oracles for the test suite.

These deliberately avoid the package's special-function and quadrature code:
Bessel/Hankel values come from their ascending power series and asymptotic
expansions written out directly, brute-force integrals go through
scipy.integrate.quad on real and imaginary parts.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad

EULER_GAMMA = 0.5772156649015328606


def _harmonic(m: int) -> float:
    return sum(1.0 / i for i in range(1, m + 1))


def series_j0(z: complex, terms: int = 60) -> complex:
    q = -(z * z) / 4.0
    term, total = 1.0 + 0j, 1.0 + 0j
    for m in range(1, terms):
        term *= q / (m * m)
        total += term
    return total


def series_j1(z: complex, terms: int = 60) -> complex:
    q = -(z * z) / 4.0
    term = z / 2.0
    total = term
    for m in range(1, terms):
        term *= q / (m * (m + 1))
        total += term
    return total


def series_y0(z: complex, terms: int = 60) -> complex:
    q = -(z * z) / 4.0
    term = 1.0 + 0j
    total = 0.0 + 0j
    for m in range(1, terms):
        term *= q / (m * m)
        total += -_harmonic(m) * term
    log_part = (np.log(z / 2.0) + EULER_GAMMA) * series_j0(z, terms)
    return (2.0 / np.pi) * (log_part + total)


def series_y1(z: complex, terms: int = 60) -> complex:
    # A&S 9.1.11 with psi(m+1) = -gamma + H_m
    q = -(z * z) / 4.0
    term = z / 2.0
    total = (_harmonic(0) + _harmonic(1)) * term
    for m in range(1, terms):
        term *= q / (m * (m + 1))
        total += (_harmonic(m) + _harmonic(m + 1)) * term
    log_part = (np.log(z / 2.0) + EULER_GAMMA) * series_j1(z, terms)
    return (2.0 / np.pi) * log_part - 2.0 / (np.pi * z) - total / np.pi


def series_h0(z: complex) -> complex:
    return series_j0(z) + 1j * series_y0(z)


def series_h1(z: complex) -> complex:
    return series_j1(z) + 1j * series_y1(z)


def series_k0(x: float, terms: int = 60) -> float:
    q = (x * x) / 4.0
    term, i0, ksum = 1.0, 1.0, 0.0
    for m in range(1, terms):
        term *= q / (m * m)
        i0 += term
        ksum += _harmonic(m) * term
    return -(math.log(x / 2.0) + EULER_GAMMA) * i0 + ksum


def series_k1(x: float, terms: int = 60) -> float:
    q = (x * x) / 4.0
    term = x / 2.0
    i1, ksum = term, (_harmonic(0) + _harmonic(1)) * term / 2.0
    for m in range(1, terms):
        term *= q / (m * (m + 1))
        i1 += term
        ksum += (_harmonic(m) + _harmonic(m + 1)) * term / 2.0
    return (math.log(x / 2.0) + EULER_GAMMA) * i1 + 1.0 / x - ksum


def asymptotic_h(nu: int, z: complex, terms: int = 12) -> complex:
    """Large-argument Hankel expansion (A&S 9.2.7-9.2.10)."""
    total = 0.0 + 0j
    coeff = 1.0 + 0j
    for m in range(terms):
        if m > 0:
            coeff *= (4.0 * nu * nu - (2 * m - 1) ** 2) / (8.0 * m)
        total += coeff * (1j / z) ** m
    pref = np.sqrt(2.0 / (np.pi * z)) * np.exp(1j * (z - nu * np.pi / 2.0 - np.pi / 4.0))
    return pref * total


def complex_quad(f, a: float, b: float, limit: int = 2000, tol: float = 1e-12) -> complex:
    re, _ = quad(lambda t: f(t).real, a, b, limit=limit, epsabs=tol, epsrel=tol)
    im, _ = quad(lambda t: f(t).imag, a, b, limit=limit, epsabs=tol, epsrel=tol)
    return re + 1j * im


def fundamental_solution(k: complex, x, y) -> complex:
    """(i/4) H_0^(1)(k |x-y|) through the series / asymptotic oracles."""
    d = float(np.hypot(x[0] - y[0], x[1] - y[1]))
    z = k * d
    h0 = series_h0(z) if abs(z) <= 12 else asymptotic_h(0, z)
    return 0.25j * h0
