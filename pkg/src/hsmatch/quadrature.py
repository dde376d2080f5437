"""Quadrature machinery for the half-plane propagator.

Three ingredients:

* composite Gauss-Legendre panels over the trace grid (smooth core integrals),
* graded dyadic refinement toward the kernel concentration point when the
  evaluation point sits close to the source line,
* a Filon-type rule for the radiating-tail integrals

      int_A^inf  W(k; X1, X2 -+ t) * e^{ikt} * t^{-p} dt ,

  where W is the half-plane kernel (or a gradient component).  The kernel's
  own oscillation e^{ik r(t)} is peeled off analytically, the combined phase
  k*(t + r(t)) is linearized per panel, and the remaining slowly varying
  amplitude is projected on Legendre polynomials whose oscillatory moments
  are spherical Bessel values:  int_-1^1 P_n(x) e^{i theta x} dx = 2 i^n j_n(theta).
  Panels grow geometrically; truncation is driven by an integration-by-parts
  bound of the remainder (exponential early stop when Im k > 0).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.special import spherical_jn

from .errors import QuadratureError

__all__ = ["QuadratureSpec", "gauss_rule", "lagrange4", "interp_weights", "tail_integrals"]


@dataclass(frozen=True)
class QuadratureSpec:
    """Knobs for all half-plane quadrature.

    Attributes
    ----------
    order : int
        Gauss-Legendre points per core grid cell (>= 2).
    refine_depth : int
        Maximum dyadic subdivision levels toward a near-field concentration.
    near_factor : float
        The jump-relation split engages when the target's distance to the
        source line is below ``near_factor * h``.
    tail_tol : float
        Absolute truncation/evaluation target for one tail integral.
    tail_points : int
        Legendre points per Filon tail panel.
    tail_growth : float
        Geometric growth factor of consecutive tail panels.
    tail_max_panels : int
        Hard cap on tail panels before raising QuadratureError.
    """

    order: int = 6
    refine_depth: int = 8
    near_factor: float = 2.0
    tail_tol: float = 1e-10
    tail_points: int = 10
    tail_growth: float = 1.6
    tail_max_panels: int = 400

    def __post_init__(self):
        if self.order < 2:
            raise ValueError(f"quadrature order must be >= 2, got {self.order}")
        if self.tail_points < 4:
            raise ValueError("tail rule needs at least 4 Legendre points")


@lru_cache(maxsize=32)
def gauss_rule(q: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1] (cached)."""
    x, w = np.polynomial.legendre.leggauss(q)
    return x, w


@lru_cache(maxsize=8)
def _legendre_projector(q: int) -> np.ndarray:
    """Matrix taking values at the q Gauss nodes to Legendre coefficients.

    Row n is (2n+1)/2 * w_q * P_n(x_q); exact for polynomials of degree < q.
    """
    x, w = gauss_rule(q)
    P = np.empty((q, q))
    for n in range(q):
        c = np.zeros(n + 1)
        c[n] = 1.0
        P[n] = npleg.legval(x, c)
    return (np.arange(q)[:, None] + 0.5) * P * w[None, :]


def lagrange4(u):
    """Cubic Lagrange basis on nodes {0, 1, 2, 3} evaluated at u.

    Returns array of shape u.shape + (4,).
    """
    u = np.asarray(u, dtype=float)
    um0, um1, um2, um3 = u, u - 1.0, u - 2.0, u - 3.0
    w = np.empty(u.shape + (4,))
    w[..., 0] = -um1 * um2 * um3 / 6.0
    w[..., 1] = um0 * um2 * um3 / 2.0
    w[..., 2] = -um0 * um1 * um3 / 2.0
    w[..., 3] = um0 * um1 * um2 / 6.0
    return w


def interp_weights(t0: float, h: float, m: int, tq) -> tuple[np.ndarray, np.ndarray]:
    """Piecewise-cubic interpolation stencils on a uniform grid.

    For each query point returns the index of the first of 4 consecutive
    nodes and the 4 Lagrange weights; interior queries use the centered
    stencil, the first/last cell fall back to one-sided stencils.

    Parameters
    ----------
    t0, h, m : grid start, spacing, node count (m >= 4).
    tq : array_like of query points inside [t0, t0 + (m-1) h].

    Returns
    -------
    starts : int ndarray, shape like tq
    weights : ndarray, shape tq.shape + (4,)
    """
    if m < 4:
        raise ValueError("cubic interpolation needs at least 4 grid nodes")
    tq = np.asarray(tq, dtype=float)
    cell = np.clip(np.floor((tq - t0) / h).astype(int), 0, m - 2)
    start = np.clip(cell - 1, 0, m - 4)
    u = (tq - t0) / h - start
    return start, lagrange4(u)


def refined_subcells(lo: float, hi: float, foot: float, width: float, depth: int):
    """Split [lo, hi] into subintervals graded toward ``foot``.

    Recursive bisection of any subinterval that touches the concentration
    point until its length is below ``width`` or ``depth`` levels were spent.
    Returns a list of (a, b) pairs in ascending order.
    """
    out: list[tuple[float, float]] = []

    def rec(a: float, b: float, level: int) -> None:
        near = (a - (b - a)) <= foot <= (b + (b - a))
        if not near or (b - a) <= width or level >= depth:
            out.append((a, b))
            return
        mid = 0.5 * (a + b)
        rec(a, mid, level + 1)
        rec(mid, b, level + 1)

    rec(lo, hi, 0)
    return out


# ---------------------------------------------------------------------------
# Filon tail integrator (batched over targets)
# ---------------------------------------------------------------------------
def tail_integrals(k: complex, x1, x2s, t_start: float, spec: QuadratureSpec,
                   slow_amplitudes, n_channels: int, p_exp: float,
                   scale: float = 1.0) -> np.ndarray:
    """Oscillatory tail integrals, marched panel by panel for many targets.

    Computes, for each target i,

        I[i, c] = int_{t_start}^inf S_c(x1_i, x2s_i; t) e^{i k (t + r_i(t))} t^{-p} dt

    with r_i(t) = hypot(x1_i, x2s_i - t).  The kernel oscillation e^{i k r}
    is removed analytically (the callback returns the slow parts), the
    combined phase is linearized per panel, and the slow amplitude is
    projected on Legendre polynomials whose linear-phase moments are
    spherical Bessel values.  Panels grow geometrically, shrink near the
    kernel's closest approach (phase curvature and amplitude scale), and the
    march stops per target once an integration-by-parts bound of the
    remainder falls below ``spec.tail_tol * scale``.

    Parameters
    ----------
    x1, x2s : (nt,) arrays; target depth and folded transverse offset.
    slow_amplitudes : callable(x1, x2s, t, r, h0e, h1e) -> (n_channels, ...)
        Kernel channels with the factor e^{i k r} removed; all arguments are
        arrays of the active-target panel nodes.
    p_exp : algebraic tail exponent (0.5 radiating, 0 constant extension).

    Returns
    -------
    (nt, n_channels) complex array.
    """
    from .specfun import hankel_h0_h1  # local import to avoid cycle

    k = complex(k)
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2s = np.atleast_1d(np.asarray(x2s, dtype=float))
    nt = len(x1)
    if np.any(x1 <= 0):
        raise ValueError("tail integrals need targets strictly inside the half-plane")
    if t_start <= 0:
        raise ValueError("tail must start at positive parameter")

    q = spec.tail_points
    xg, _ = gauss_rule(q)
    proj_t = _legendre_projector(q).T            # (q, q)
    powers = 1j ** np.arange(q)
    tol = spec.tail_tol * max(scale, 1e-300)

    total = np.zeros((nt, n_channels), dtype=np.complex128)
    t = np.full(nt, float(t_start))
    prev_len = np.full(nt, max(0.25 * t_start, 0.5 / max(abs(k), 1e-30)))
    active = np.ones(nt, dtype=bool)

    def radius(x1a, x2a, ta):
        return np.hypot(x1a, x2a - ta)

    for _ in range(spec.tail_max_panels):
        if not np.any(active):
            return total
        ia = np.nonzero(active)[0]
        x1a, x2a, ta = x1[ia], x2s[ia], t[ia]

        # panel length: curvature cap at the closest approach still ahead,
        # amplitude-scale cap, geometric growth, dissipative overflow cap
        ref = np.where(ta < x2a, x2a, ta)
        r_ref = np.maximum(radius(x1a, x2a, ref), x1a)
        curv = abs(k) * x1a**2 / r_ref**3
        with np.errstate(divide="ignore"):
            cap_curv = np.where(curv > 0, np.sqrt(3.2 / np.maximum(curv, 1e-300)), np.inf)
        cap_amp = 0.8 * np.minimum(radius(x1a, x2a, ref), ta)
        length = np.minimum(np.minimum(spec.tail_growth * prev_len[ia], cap_curv), cap_amp)
        if k.imag > 0:
            length = np.minimum(length, 15.0 / k.imag)
        length = np.maximum(length, 1e-3 * t_start)

        t1 = ta + length
        hl = 0.5 * length
        tm = ta + hl
        tq = tm[:, None] + hl[:, None] * xg[None, :]          # (na, q)

        r = radius(x1a[:, None], x2a[:, None], tq)
        phase = k * (tq + r)
        ph0 = k * (ta + radius(x1a, x2a, ta))
        ph1 = k * (t1 + radius(x1a, x2a, t1))
        phm = k * (tm + radius(x1a, x2a, tm))
        omega = (ph1 - ph0) / length
        theta = omega * hl
        delta = phase - phm[:, None] - omega[:, None] * (tq - tm[:, None])

        h0, h1 = hankel_h0_h1(k * r)
        eikr = np.exp(1j * k * r)
        amp = slow_amplitudes(x1a[:, None], x2a[:, None], tq, r,
                              h0 / eikr, h1 / eikr)           # (nc, na, q)
        amp = amp * (tq ** (-p_exp) * np.exp(1j * delta))[None, :, :]

        coeffs = amp @ proj_t                                  # (nc, na, q)
        moments = 2.0 * powers[:, None] * spherical_jn(
            np.arange(q)[:, None], theta[None, :])             # (q, na)
        total[ia] += (hl * np.exp(1j * phm))[None, :].T * np.einsum(
            "cnq,qn->nc", coeffs, moments)

        # integration-by-parts remainder bound from the endpoint amplitude
        tail_amp = np.max(np.abs(amp[:, :, -1]), axis=0) * np.abs(np.exp(1j * phase[:, -1]))
        r1 = radius(x1a, x2a, t1)
        dphase_min = np.maximum(k.real * (1.0 + (t1 - x2a) / r1), 1e-300)
        done = (2.0 * tail_amp / dphase_min < tol) & (t1 > np.abs(x2a))
        t[ia] = t1
        prev_len[ia] = length
        active[ia[done]] = False

    raise QuadratureError(
        f"tail integral did not converge within {spec.tail_max_panels} panels "
        f"for {int(active.sum())} of {nt} targets (k={k})")
