"""The half-plane Dirichlet propagator and its trace operators.

Everything in this module reduces to weighted integrals of the kernel

    H(k; X1, X2) = (i k X1 / 2) * H_1^(1)(k |X|) / |X|,      X = (X1, X2),

against a discrete radiating trace: the field representation itself, its
gradient, the trace-to-trace couplings between neighbouring half-planes, and
the Dirichlet-to-Robin maps onto finite-element coupling boundaries.

The central entry point is :func:`build_rows`, which produces, for a batch of
targets at depth X1 > 0 above the source line, the linear weights on the
trace unknowns (grid values and the two tail amplitudes).  The same rows are
dotted with solved traces for field evaluation and written into system
matrices during assembly, so evaluation and assembly cannot drift apart.

Near the line (X1 < near_factor * h) the kernel concentrates like a nascent
delta; rows then switch to the jump-relation split

    u = psi(X2) e^{i k X1} + int H(y) (psi(y) - psi(X2)) dy,

exact because the kernel integrates to e^{i k X1} over the whole line, with
the remaining integrand vanishing at the concentration point.  The gradient
rows use the same split with the constant response (i k e^{i k X1}, 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, GeometryError, QuadratureError
from .geometry import PolygonFrames
from .quadrature import (QuadratureSpec, gauss_rule, interp_weights, lagrange4,
                         refined_subcells, tail_integrals)
from .specfun import hankel_h0_h1, hankel_h1
from .trace import RadiatingTrace, UniformGrid

__all__ = [
    "KernelParams",
    "kernel_H",
    "kernel_grad_H",
    "PotentialRows",
    "build_rows",
    "halfplane_eval",
    "halfplane_grad",
    "op_D",
    "op_Lambda",
]

VALUE, G1, G2 = 0, 1, 2
_MODE_CHANNELS = {"value": (VALUE,), "grad": (G1, G2), "full": (VALUE, G1, G2)}


@dataclass(frozen=True)
class KernelParams:
    """Wavenumber bundle; Re(k) > 0 and Im(k) >= 0."""

    k: complex

    def __post_init__(self):
        k = complex(self.k)
        if not (k.real > 0 and k.imag >= 0):
            raise DomainError(f"wavenumber must satisfy Re(k) > 0, Im(k) >= 0, got {k}")
        object.__setattr__(self, "k", k)

    @property
    def wavelength(self) -> float:
        return 2.0 * np.pi / self.k.real


def _as_kp(kp) -> KernelParams:
    return kp if isinstance(kp, KernelParams) else KernelParams(complex(kp))


def kernel_H(kp, x1, x2):
    """Half-plane double-layer kernel H(k; x1, x2); even in x2.

    Vanishes (linearly) as x1 -> 0 away from the origin; the origin itself
    is outside the domain.
    """
    kp = _as_kp(kp)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    r = np.hypot(x1, x2)
    if np.any(r == 0):
        raise DomainError("kernel is singular at x1 = x2 = 0")
    shape = np.broadcast(x1, x2).shape
    out = np.zeros(shape, dtype=np.complex128)
    x1b = np.broadcast_to(x1, shape)
    rb = np.broadcast_to(r, shape)
    body = x1b != 0
    if np.any(body):
        out[body] = 0.5j * kp.k * x1b[body] * hankel_h1(kp.k * rb[body]) / rb[body]
    return complex(out) if shape == () else out


def kernel_grad_H(kp, x1, x2):
    """(dH/dx1, dH/dx2), from the recurrence H_1'(z) = H_0(z) - H_1(z)/z."""
    kp = _as_kp(kp)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    r = np.hypot(x1, x2)
    if np.any(r == 0):
        raise DomainError("kernel is singular at x1 = x2 = 0")
    k = kp.k
    h0, h1 = hankel_h0_h1(k * r)
    core = (k * r * h0 - 2.0 * h1) / r**3
    d1 = 0.5j * k * (h1 / r + x1**2 * core)
    d2 = 0.5j * k * x1 * x2 * core
    return d1, d2


@dataclass(frozen=True)
class PotentialRows:
    """Linear weights of half-plane quantities on trace unknowns.

    For ``nt`` targets and the requested channels (VALUE and/or the two local
    gradient components), a quantity is recovered as

        out[i, c] = vals[i, c, :] @ trace.values
                    + c_plus[i, c] * trace.c_plus + c_minus[i, c] * trace.c_minus.
    """

    channels: tuple[int, ...]
    vals: np.ndarray      # (nt, nchan, m)
    c_plus: np.ndarray    # (nt, nchan)
    c_minus: np.ndarray   # (nt, nchan)

    def apply(self, tr: RadiatingTrace) -> np.ndarray:
        return (self.vals @ tr.values
                + self.c_plus * tr.c_plus + self.c_minus * tr.c_minus)


def _channel_values(k, channels, x1, s, need_h0):
    """Kernel channels (value / dX1 / dX2) at transverse offsets s."""
    r = np.hypot(x1, s)
    z = k * r
    if need_h0:
        h0, h1 = hankel_h0_h1(z)
    else:
        h0, h1 = None, hankel_h1(z)
    out = np.empty((len(channels),) + np.shape(r), dtype=np.complex128)
    core = (k * r * h0 - 2.0 * h1) / r**3 if need_h0 else None
    for row, ch in enumerate(channels):
        if ch == VALUE:
            out[row] = 0.5j * k * x1 * h1 / r
        elif ch == G1:
            out[row] = 0.5j * k * (h1 / r + x1**2 * core)
        else:
            out[row] = 0.5j * k * x1 * s * core
    return out


def _slow_amplitudes(k, channels):
    """Tail amplitude callback: kernel channels with e^{i k r} removed.

    The integrator folds both line directions onto t in [A, inf); the
    transverse offset there is s = x2s - t.
    """

    def amp(x1, x2s, t, r, h0e, h1e):
        out = np.empty((len(channels),) + t.shape, dtype=np.complex128)
        s = x2s - t
        core = (k * r * h0e - 2.0 * h1e) / r**3
        for row, ch in enumerate(channels):
            if ch == VALUE:
                out[row] = 0.5j * k * x1 * h1e / r
            elif ch == G1:
                out[row] = 0.5j * k * (h1e / r + x1**2 * core)
            else:
                out[row] = 0.5j * k * x1 * s * core
        return out

    return amp


def _constant_response(k, channels, x1):
    """Exact channel outputs for the constant unit trace: int_R channel dy."""
    e = np.exp(1j * k * x1)
    out = np.empty(len(channels), dtype=np.complex128)
    for row, ch in enumerate(channels):
        out[row] = e if ch == VALUE else (1j * k * e if ch == G1 else 0.0)
    return out


def _tail_pair_batch(kp, x1, x2, grid, spec, channels, p_exp, scale):
    """Tail integrals along both line directions; shape (nt, 2, nchan).

    The minus-side fold t -> -t maps the true transverse offset x2 - y onto
    -(x2s - t), which only matters for the dX2 channel (odd in the offset):
    the folded value gets a sign flip.
    """
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    nt = len(x1)
    both = tail_integrals(kp.k, np.concatenate([x1, x1]),
                          np.concatenate([x2, -x2]), grid.half_length, spec,
                          _slow_amplitudes(kp.k, channels), len(channels),
                          p_exp, scale=scale)                  # (2 nt, nchan)
    out = np.empty((nt, 2, len(channels)), dtype=np.complex128)
    out[:, 0, :] = both[:nt]
    out[:, 1, :] = both[nt:]
    for pos, ch in enumerate(channels):
        if ch == G2:
            out[:, 1, pos] = -out[:, 1, pos]
    return out


def build_rows(kp, grid: UniformGrid, x1, x2, spec: QuadratureSpec | None = None,
               mode: str = "value", tails: bool = True,
               tail_scale: float = 1.0) -> PotentialRows:
    """Weights of half-plane value/gradient at targets on the trace unknowns.

    Parameters
    ----------
    kp : KernelParams or complex wavenumber.
    grid : source trace grid on [-A, A].
    x1, x2 : array_like
        Target depth above the source line (strictly positive) and lateral
        offset, in the source frame.
    spec : quadrature spec; defaults when omitted.
    mode : 'value', 'grad', or 'full' (value plus both gradient components).
    tails : include the radiating-tail columns (c_pm unknowns).
    tail_scale : expected magnitude of the data multiplying these rows; sets
        the absolute truncation target of the tail quadrature.
    """
    kp = _as_kp(kp)
    spec = spec or QuadratureSpec()
    channels = _MODE_CHANNELS[mode]
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x1.shape != x2.shape or x1.ndim != 1:
        raise ValueError("x1 and x2 must be 1-D arrays of equal length")
    if np.any(x1 <= 0):
        raise DomainError("targets must lie strictly inside the half-plane (x1 > 0)")

    nt, m, nchan = len(x1), grid.n_nodes, len(channels)
    need_h0 = any(ch != VALUE for ch in channels)

    rows = PotentialRows(
        channels=channels,
        vals=np.zeros((nt, nchan, m), dtype=np.complex128),
        c_plus=np.zeros((nt, nchan), dtype=np.complex128),
        c_minus=np.zeros((nt, nchan), dtype=np.complex128),
    )

    near = x1 < spec.near_factor * grid.h
    far_idx = np.nonzero(~near)[0]
    if len(far_idx):
        rows.vals[far_idx] = _core_rows_smooth(kp, grid, x1[far_idx], x2[far_idx],
                                               spec, channels, need_h0)
        if tails:
            t = _tail_pair_batch(kp, x1[far_idx], x2[far_idx], grid, spec,
                                 channels, 0.5, tail_scale)
            rows.c_plus[far_idx] += t[:, 0, :]
            rows.c_minus[far_idx] += t[:, 1, :]
    for i in np.nonzero(near)[0]:
        _core_row_near(kp, grid, float(x1[i]), float(x2[i]), spec, channels,
                       need_h0, rows, int(i), tails, tail_scale)
    return rows


def _core_rows_smooth(kp, grid, x1, x2, spec, channels, need_h0) -> np.ndarray:
    """Composite-Gauss rows for targets comfortably away from the line."""
    q = spec.order
    xg, wg = gauss_rule(q)
    m = grid.n_nodes
    nc = m - 1
    h, t0 = grid.h, grid.t0
    yq = t0 + (np.arange(nc)[:, None] + 0.5 * (xg[None, :] + 1.0)) * h  # (nc, q)
    wq = 0.5 * h * wg

    u_int = 1.0 + 0.5 * (xg + 1.0)
    basis_int = lagrange4(u_int)          # (q, 4) interior stencil
    basis_first = lagrange4(u_int - 1.0)  # first cell, stencil at node 0
    basis_last = lagrange4(u_int + 1.0)   # last cell, stencil at node m-4

    nt, nchan = len(x1), len(channels)
    out = np.zeros((nt, nchan, m), dtype=np.complex128)
    chunk = max(1, 4_000_000 // (nc * q))
    for lo in range(0, nt, chunk):
        hi = min(lo + chunk, nt)
        s = x2[lo:hi, None, None] - yq[None, :, :]                    # (c, nc, q)
        kv = _channel_values(kp.k, channels, x1[lo:hi, None, None], s, need_h0)
        kv *= wq[None, None, None, :]                                 # (nchan, c, nc, q)
        res = out[lo:hi]
        res[:, :, 0:4] += np.einsum("xcq,qs->cxs", kv[:, :, 0, :], basis_first)
        res[:, :, m - 4:m] += np.einsum("xcq,qs->cxs", kv[:, :, nc - 1, :], basis_last)
        if nc > 2:
            coef = np.einsum("xcnq,qs->cxns", kv[:, :, 1:nc - 1, :], basis_int)
            for sten in range(4):
                res[:, :, sten:sten + nc - 2] += coef[:, :, :, sten]
    return out


def _core_row_near(kp, grid, x1, x2, spec, channels, need_h0, rows, i,
                   tails, tail_scale):
    """Jump-relation split row for one target close to the source line."""
    q = spec.order
    xg, wg = gauss_rule(q)
    m, h, t0, a_len = grid.n_nodes, grid.h, grid.t0, grid.half_length
    k = kp.k
    if x1 < h * 2.0**-spec.refine_depth:
        raise QuadratureError(
            f"target depth {x1:.3g} below the refinement resolution "
            f"{h * 2.0**-spec.refine_depth:.3g} (refine_depth={spec.refine_depth})")

    # subdivide the cells around the kernel concentration point
    foot = x2
    lo_ref = max(t0, foot - 2.5 * h)
    hi_ref = min(a_len, foot + 2.5 * h)
    pieces: list[tuple[float, float]] = []
    edges = t0 + h * np.arange(m)
    min_width = max(0.5 * x1, h * 2.0**-spec.refine_depth)
    for c in range(m - 1):
        a, b = edges[c], edges[c + 1]
        if b <= lo_ref or a >= hi_ref:
            pieces.append((a, b))
        else:
            pieces.extend(refined_subcells(a, b, foot, min_width, spec.refine_depth))
    pa = np.array([p[0] for p in pieces])
    pb = np.array([p[1] for p in pieces])
    mid = 0.5 * (pa + pb)
    half = 0.5 * (pb - pa)
    yq = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    wq = (half[:, None] * wg[None, :]).ravel()

    kv = _channel_values(k, channels, x1, x2 - yq, need_h0)   # (nchan, npts)
    kvw = kv * wq[None, :]

    starts, bw = interp_weights(t0, h, m, yq)                 # (npts,), (npts, 4)
    contrib = kvw[:, :, None] * bw[None, :, :]                # (nchan, npts, 4)
    for sten in range(4):
        np.add.at(rows.vals[i], (slice(None), starts + sten), contrib[:, :, sten])

    # constant-trace correction: exact response minus what the quadrature
    # (plus the constant tail extension) would produce for the unit trace
    correction = _constant_response(k, channels, x1) - kvw.sum(axis=1)
    if tails:
        tc = _tail_pair_batch(kp, x1, x2, grid, spec, channels, 0.0, tail_scale)[0]
        correction -= tc[0] + tc[1]
        tr_tails = _tail_pair_batch(kp, x1, x2, grid, spec, channels, 0.5, tail_scale)[0]
        rows.c_plus[i] += tr_tails[0]
        rows.c_minus[i] += tr_tails[1]

    if abs(foot) <= a_len:
        fs, fw = interp_weights(t0, h, m, np.array([foot]))
        for sten in range(4):
            rows.vals[i, :, fs[0] + sten] += correction * fw[0, sten]
    else:
        # foot value comes from the tail model, so the correction lands on c_pm
        model = np.exp(1j * k * abs(foot)) / np.sqrt(abs(foot))
        target = rows.c_plus if foot > 0 else rows.c_minus
        target[i] += correction * model


def _trace_scale(tr: RadiatingTrace) -> float:
    return float(max(np.max(np.abs(tr.values), initial=0.0),
                     abs(tr.c_plus), abs(tr.c_minus), 1e-30))


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------
def halfplane_eval(kp, tr: RadiatingTrace, x1, x2, a: float = 0.0,
                   spec: QuadratureSpec | None = None):
    """Evaluate U(trace) at points (x1, x2) of the half-plane {x1 > a}.

    ``a`` is the boundary-line offset, so target depths are x1 - a.
    Scalar input gives a scalar.
    """
    kp = _as_kp(kp)
    x1 = np.asarray(x1, dtype=float)
    scalar = x1.ndim == 0
    depth = np.atleast_1d(x1) - a
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    rows = build_rows(kp, tr.grid, depth, x2, spec, mode="value",
                      tail_scale=_trace_scale(tr))
    out = rows.apply(tr)[:, 0]
    return complex(out[0]) if scalar else out


def halfplane_grad(kp, tr: RadiatingTrace, x1, x2, a: float = 0.0,
                   spec: QuadratureSpec | None = None) -> np.ndarray:
    """Gradient of U(trace) along the local frame axes; shape (..., 2)."""
    kp = _as_kp(kp)
    x1 = np.asarray(x1, dtype=float)
    scalar = x1.ndim == 0
    depth = np.atleast_1d(x1) - a
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    rows = build_rows(kp, tr.grid, depth, x2, spec, mode="grad",
                      tail_scale=_trace_scale(tr))
    out = rows.apply(tr)
    return out[0] if scalar else out


def op_D(kp, frames: PolygonFrames, j: int, direction: int, tr: RadiatingTrace,
         targets, spec: QuadratureSpec | None = None):
    """D_{j, j+-1}: evaluate U^j(trace) at parameters of the neighbour line.

    Parameters
    ----------
    j : source edge index; ``direction`` (+1/-1) selects the neighbour line.
    targets : x2 parameters on the neighbour line; every target must map to
        a point strictly inside half-plane j.
    """
    if direction not in (-1, +1):
        raise ValueError("direction must be +1 or -1")
    kp = _as_kp(kp)
    jn = (j + direction) % frames.n_edges
    pts = frames.line_point(jn, np.asarray(targets, dtype=float))
    d = np.atleast_2d(pts) - frames.centroid
    x1 = d @ frames.e1[j] - frames.a[j]
    x2 = d @ frames.e2[j]
    if np.any(x1 <= 0):
        bad = float(np.asarray(targets).ravel()[int(np.argmin(x1))])
        raise DomainError(f"target at parameter {bad} lies outside half-plane {j}")
    rows = build_rows(kp, tr.grid, x1, x2, spec, mode="value",
                      tail_scale=_trace_scale(tr))
    return rows.apply(tr)[:, 0]


def op_Lambda(kp, frames: PolygonFrames, j: int, tr: RadiatingTrace,
              boundary_points, spec: QuadratureSpec | None = None):
    """Dirichlet-to-Robin map: (d/dn - ik) U^j(trace) at boundary points.

    Parameters
    ----------
    boundary_points : iterable of (point, unit_normal) pairs in global
        coordinates; points must lie in half-plane j at distance >= h from
        its boundary line.
    """
    kp = _as_kp(kp)
    pts = np.asarray([p for p, _ in boundary_points], dtype=float)
    nrm = np.asarray([n for _, n in boundary_points], dtype=float)
    d = pts - frames.centroid
    x1 = d @ frames.e1[j] - frames.a[j]
    x2 = d @ frames.e2[j]
    if np.any(x1 < tr.grid.h):
        raise GeometryError(
            f"boundary point at depth {float(np.min(x1)):.3g} is closer to line {j} "
            f"than one grid spacing {tr.grid.h:.3g}")
    rows = build_rows(kp, tr.grid, x1, x2, spec, mode="full",
                      tail_scale=_trace_scale(tr))
    out = rows.apply(tr)  # channels: value, g1, g2
    n1 = nrm @ frames.e1[j]
    n2 = nrm @ frames.e2[j]
    return n1 * out[:, 1] + n2 * out[:, 2] - 1j * kp.k * out[:, 0]
