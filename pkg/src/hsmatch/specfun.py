"""Hankel functions of the first kind, orders 0 and 1, on the closed upper
half plane (Im z >= 0, z != 0).

These two functions are the only special functions the half-plane kernels
need.  Evaluation is delegated to scipy's AMOS-based ``hankel1``, which is
accurate to near machine precision over the whole argument range used here
(|z| in [1e-8, 1e4], Im z >= 0); the test suite cross-checks it against an
independent power-series / asymptotic-expansion oracle.

All functions are vectorized over numpy arrays and are pure (no state), so
they are safe to call concurrently.
"""

from __future__ import annotations

import numpy as np
from scipy.special import hankel1

from .errors import DomainError

__all__ = ["hankel_h0", "hankel_h1", "hankel_h0_h1"]


def _validate(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.complex128)
    if np.any(z == 0):
        raise DomainError("Hankel functions are singular at z = 0")
    # Tolerate tiny negative imaginary parts from rounding in |x| arithmetic.
    im = z.imag
    if np.any(im < -1e-14 * np.maximum(np.abs(z), 1.0)):
        worst = z.flat[int(np.argmin(im))]
        raise DomainError(f"argument {worst} has Im(z) < 0; lower half plane unsupported")
    return z


def hankel_h0(z):
    """H_0^(1)(z) for complex z with Im(z) >= 0, z != 0.

    Parameters
    ----------
    z : array_like, complex
        Argument(s); scalars return a complex scalar.

    Returns
    -------
    complex or np.ndarray of complex128
    """
    z = _validate(z)
    out = hankel1(0, z)
    return complex(out) if np.isscalar(out) or out.shape == () else out


def hankel_h1(z):
    """H_1^(1)(z) for complex z with Im(z) >= 0, z != 0."""
    z = _validate(z)
    out = hankel1(1, z)
    return complex(out) if np.isscalar(out) or out.shape == () else out


def hankel_h0_h1(z):
    """Both H_0^(1)(z) and H_1^(1)(z) in one call.

    The gradient kernels need both orders at the same points; bundling the
    two evaluations keeps call sites compact.
    """
    z = _validate(z)
    return hankel1(0, z), hankel1(1, z)
