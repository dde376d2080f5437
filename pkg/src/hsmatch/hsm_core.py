"""Assembly and solution of the half-space matching trace systems.

The unknowns are the N traces on the lines bounding the half-planes, each a
grid of values on [-A, A] plus (for real k) two radiating-tail amplitudes.
Collocating the matching equations at the grid nodes gives a square system:

* nodes on the polygon edge carry the Dirichlet data rows,
* nodes on the overlap sections carry second-kind rows
  "phi_j(t) - U_{j+-1}(phi_{j+-1})(t) = 0",
* two extra rows per edge tie the endpoint samples to the tail amplitudes
  through the radiating model at |t| = A.

A dense LU solve with partial pivoting produces the traces; the solution
object evaluates the field anywhere outside the polygon (deepest half-plane
representation), extracts far-field patterns through the large-argument
kernel asymptotics, and carries a residual report (backward error of the
linear solve, off-grid collocation residual, seam mismatch, overlap
compatibility, condition estimate).
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import get_lapack_funcs, lu_factor, lu_solve
from scipy.special import erf

from .errors import AssemblyError, DomainError, SolveError, UnsupportedOperationError
from .geometry import PolygonFrames
from .halfplane import KernelParams, _as_kp, build_rows
from .quadrature import QuadratureSpec, gauss_rule, lagrange4
from .trace import RadiatingTrace, UniformGrid, trace_eval

logger = logging.getLogger(__name__)

__all__ = [
    "HsmDiscretization",
    "ResidualReport",
    "HsmSolutionPolygon",
    "assemble_polygon",
    "solve_polygon",
    "reconstruct",
    "reconstruct_gradient",
    "far_field",
    "sommerfeld_residual",
]


@dataclass(frozen=True)
class HsmDiscretization:
    """Shared trace grid plus the per-edge node partition.

    Nodes on edge j split into three groups: parameters below the edge
    interval (overlap with half-plane j-1), inside it (Dirichlet block; ties
    at the endpoints go to the Dirichlet rows), and above it (overlap with
    half-plane j+1).
    """

    grid: UniformGrid
    tails_enabled: bool
    quad: QuadratureSpec
    groups: tuple  # per edge: (idx_minus, idx_edge, idx_plus) int arrays

    @staticmethod
    def build(frames: PolygonFrames, kp, half_length: float, h: float,
              quad: QuadratureSpec | None = None,
              tails_enabled: bool | None = None) -> "HsmDiscretization":
        kp = _as_kp(kp)
        if tails_enabled is None:
            tails_enabled = kp.k.imag == 0.0
        grid = _aligned_grid(frames, half_length, h)
        reach = max(float(np.max(np.abs(frames.edge_lo))),
                    float(np.max(np.abs(frames.edge_hi))))
        if half_length < reach + 4 * grid.h:
            raise AssemblyError(
                f"truncation A={half_length} too small for edge extent {reach:.3g}")
        nodes = grid.nodes()
        groups = []
        for j in range(frames.n_edges):
            lo, hi = frames.edge_lo[j], frames.edge_hi[j]
            on_edge = (nodes >= lo) & (nodes <= hi)
            if not np.any(on_edge):
                raise AssemblyError(
                    f"edge {j} contains no collocation node; refine h below "
                    f"{hi - lo:.3g}")
            groups.append((np.nonzero(nodes < lo)[0],
                           np.nonzero(on_edge)[0],
                           np.nonzero(nodes > hi)[0]))
        return HsmDiscretization(grid=grid, tails_enabled=tails_enabled,
                                 quad=quad or QuadratureSpec(), groups=tuple(groups))

    def n_unknowns(self, n_edges: int) -> int:
        n = n_edges * self.grid.n_nodes
        return n + 2 * n_edges if self.tails_enabled else n


@dataclass
class ResidualReport:
    """Post-solve diagnostics; all residuals are absolute maxima."""

    linear_solve: float = np.nan        # backward error of the LU solve
    equation_residual: float = np.nan   # matching equations at off-grid points
    seam: float = np.nan                # endpoint-vs-tail-model mismatch
    compatibility: float = np.nan       # field mismatch in half-plane overlaps
    cond_estimate: float = np.nan

    def as_dict(self) -> dict:
        return {k: float(v) for k, v in self.__dict__.items()}


@dataclass(frozen=True)
class HsmSolutionPolygon:
    """Solved polygon problem: traces per edge plus diagnostics."""

    kp: KernelParams
    frames: PolygonFrames
    disc: HsmDiscretization
    traces: tuple
    report: ResidualReport


def _aligned_grid(frames: PolygonFrames, half_length: float, h: float) -> UniformGrid:
    """Grid over [-A, A] with nodes on the corner parameters when possible.

    The dominant collocation error sits at targets just past a polygon
    corner, whose kernel concentrates at the corner parameter of the
    neighbouring line; placing a node there removes the interpolation error
    at that point.  Requires the per-edge endpoint parameters to be integer
    multiples of the smallest one (true for every regular polygon); h is
    rounded down and A up, so the request is never coarsened.
    """
    specials = np.abs(np.concatenate([frames.edge_lo, frames.edge_hi]))
    specials = specials[specials > 1e-12]
    if len(specials):
        s0 = float(np.min(specials))
        ratios = specials / s0
        if np.all(np.abs(ratios - np.round(ratios)) < 1e-9):
            step = s0 / max(1, int(np.ceil(s0 / h - 1e-12)))
            n_half = max(2, int(np.ceil(half_length / step - 1e-12)))
            return UniformGrid(half_length=n_half * step, n_nodes=2 * n_half + 1)
    return UniformGrid.from_spacing(half_length, h)


class _Layout:
    """Column layout: per-edge value blocks, then interleaved tail columns."""

    def __init__(self, n_edges: int, m: int, tails: bool):
        self.n_edges, self.m, self.tails = n_edges, m, tails
        self.n_vals = n_edges * m
        self.n = self.n_vals + (2 * n_edges if tails else 0)

    def vals(self, j: int) -> slice:
        return slice(j * self.m, (j + 1) * self.m)

    def c_plus(self, j: int) -> int:
        return self.n_vals + 2 * j

    def c_minus(self, j: int) -> int:
        return self.n_vals + 2 * j + 1


def _edge_targets_local(frames: PolygonFrames, j_target: int, js: int, tpar):
    """Depth/lateral coordinates in frame js of points on line j_target."""
    pts = frames.line_point(j_target, np.asarray(tpar, dtype=float))
    d = np.atleast_2d(pts) - frames.centroid
    x1 = d @ frames.e1[js] - frames.a[js]
    x2 = d @ frames.e2[js]
    return x1, x2


def _normalize_data(frames: PolygonFrames, g) -> list:
    """Accept one callable g(j, t) or a per-edge sequence of callables."""
    if callable(g):
        return [lambda t, j=j: np.asarray(g(j, t), dtype=np.complex128)
                for j in range(frames.n_edges)]
    funcs = list(g)
    if len(funcs) != frames.n_edges:
        raise AssemblyError(f"need {frames.n_edges} per-edge data entries, got {len(funcs)}")
    return [lambda t, f=f: np.asarray(f(t), dtype=np.complex128) for f in funcs]


def assemble_polygon(kp, frames: PolygonFrames, g, disc: HsmDiscretization,
                     n_threads: int = 1):
    """Assemble the dense collocation system for the polygon Dirichlet problem.

    Returns (matrix, rhs).  ``g`` is either a callable g(j, t) -> values or a
    sequence of per-edge callables of the edge parameter.
    """
    kp = _as_kp(kp)
    n_edges = frames.n_edges
    grid = disc.grid
    m = grid.n_nodes
    lay = _Layout(n_edges, m, disc.tails_enabled)
    A = np.zeros((lay.n, lay.n), dtype=np.complex128)
    rhs = np.zeros(lay.n, dtype=np.complex128)
    nodes = grid.nodes()
    g_funcs = _normalize_data(frames, g)

    # identity part and Dirichlet data
    for j in range(n_edges):
        idx_m, idx_e, idx_p = disc.groups[j]
        rows = j * m + np.arange(m)
        A[rows, rows] = 1.0
        rhs[j * m + idx_e] = g_funcs[j](nodes[idx_e])

    def fill_block(j: int, side: int) -> None:
        idx = disc.groups[j][0] if side < 0 else disc.groups[j][2]
        if len(idx) == 0:
            return
        js = (j + side) % n_edges
        x1, x2 = _edge_targets_local(frames, j, js, nodes[idx])
        rows = build_rows(kp, grid, x1, x2, disc.quad, mode="value",
                          tails=disc.tails_enabled)
        r = j * m + idx
        A[r[:, None], np.arange(m)[None, :] + js * m] -= rows.vals[:, 0, :]
        if disc.tails_enabled:
            A[r, lay.c_plus(js)] -= rows.c_plus[:, 0]
            A[r, lay.c_minus(js)] -= rows.c_minus[:, 0]

    tasks = [(j, s) for j in range(n_edges) for s in (-1, +1)]
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as ex:
            list(ex.map(lambda a: fill_block(*a), tasks))
    else:
        for t in tasks:
            fill_block(*t)

    if disc.tails_enabled:
        # c_pm rows: c_pm - sqrt(A) e^{-ikA} phi(+-A) = 0 (unit diagonal)
        a_len = grid.half_length
        w = np.sqrt(a_len) * np.exp(-1j * kp.k * a_len)
        for j in range(n_edges):
            rp, rm = lay.c_plus(j), lay.c_minus(j)
            A[rp, rp] = 1.0
            A[rp, j * m + (m - 1)] = -w
            A[rm, rm] = 1.0
            A[rm, j * m] = -w
    return A, rhs


def _condition_estimate(matrix, lu) -> float:
    gecon = get_lapack_funcs("gecon", (matrix,))
    anorm = np.linalg.norm(matrix, 1)
    rcond, info = gecon(lu[0], anorm, norm="1")
    if info != 0 or rcond == 0:
        return np.inf
    return 1.0 / float(rcond)


def _solve_dense(matrix, rhs):
    lu = lu_factor(matrix)
    cond = _condition_estimate(matrix, lu)
    if not np.isfinite(cond) or cond > 1e14:
        raise SolveError(
            f"system is singular to working precision (cond ~ {cond:.2e}); "
            "the discretization is under-resolved", cond_estimate=cond)
    x = lu_solve(lu, rhs)
    denom = (np.linalg.norm(matrix, np.inf) * np.linalg.norm(x, np.inf)
             + np.linalg.norm(rhs, np.inf))
    backward = float(np.linalg.norm(matrix @ x - rhs, np.inf) / denom) if denom else 0.0
    return x, cond, backward


def _traces_from_vector(kp, disc, n_edges: int, x) -> tuple:
    m = disc.grid.n_nodes
    lay = _Layout(n_edges, m, disc.tails_enabled)
    traces = []
    for j in range(n_edges):
        cp = x[lay.c_plus(j)] if disc.tails_enabled else 0.0
        cm = x[lay.c_minus(j)] if disc.tails_enabled else 0.0
        traces.append(RadiatingTrace(j=j, k=kp.k, grid=disc.grid,
                                     values=x[lay.vals(j)].copy(),
                                     c_plus=complex(cp), c_minus=complex(cm)))
    return tuple(traces)


def _offgrid_residual(kp, frames, disc, traces, n_per_side: int = 12) -> float:
    """Matching-equation residual at cell midpoints (never collocated)."""
    grid = disc.grid
    nodes = grid.nodes()
    worst = 0.0
    for j in range(frames.n_edges):
        for side in (-1, +1):
            idx = disc.groups[j][0] if side < 0 else disc.groups[j][2]
            if len(idx) < 3:
                continue
            sel = idx[np.linspace(1, len(idx) - 1, min(n_per_side, len(idx) - 1),
                                  dtype=int)]
            tmid = nodes[sel] - 0.5 * grid.h
            js = (j + side) % frames.n_edges
            x1, x2 = _edge_targets_local(frames, j, js, tmid)
            keep = x1 > 0
            if not np.any(keep):
                continue
            rows = build_rows(kp, grid, x1[keep], x2[keep], disc.quad,
                              mode="value", tails=disc.tails_enabled)
            rhs_val = rows.apply(traces[js])[:, 0]
            lhs_val = trace_eval(traces[j], tmid[keep])
            worst = max(worst, float(np.max(np.abs(lhs_val - rhs_val))))
    return worst


def _compatibility_residual(sol: "HsmSolutionPolygon", n_samples: int = 8,
                            seed: int = 0) -> float:
    """Field mismatch between consecutive half-plane representations."""
    rng = np.random.default_rng(seed)
    frames = sol.frames
    worst = 0.0
    a_len = sol.disc.grid.half_length
    h = sol.disc.grid.h
    for j in range(frames.n_edges):
        jn = (j + 1) % frames.n_edges
        got = tries = 0
        while got < n_samples and tries < 200 * n_samples:
            tries += 1
            p = frames.centroid + rng.uniform(-0.6, 0.6, 2) * a_len
            depth = frames.containment_depth(p)
            if depth[j] > 2 * h and depth[jn] > 2 * h:
                u1 = _eval_in_frame(sol, j, p)
                u2 = _eval_in_frame(sol, jn, p)
                worst = max(worst, abs(u1 - u2))
                got += 1
    return worst


def _eval_in_frame(sol: "HsmSolutionPolygon", j: int, p) -> complex:
    from .halfplane import halfplane_eval

    lp = sol.frames.to_local(j, p)
    return halfplane_eval(sol.kp, sol.traces[j], lp.x1, lp.x2,
                          a=sol.frames.a[j], spec=sol.disc.quad)


def solve_polygon(kp, frames: PolygonFrames, g, disc: HsmDiscretization,
                  n_threads: int = 1, with_diagnostics: bool = True) -> HsmSolutionPolygon:
    """Assemble and LU-solve the polygon Dirichlet trace system."""
    kp = _as_kp(kp)
    matrix, rhs = assemble_polygon(kp, frames, g, disc, n_threads=n_threads)
    x, cond, backward = _solve_dense(matrix, rhs)
    logger.info("polygon solve: n=%d cond~%.2e backward=%.2e", len(rhs), cond, backward)
    traces = _traces_from_vector(kp, disc, frames.n_edges, x)
    report = ResidualReport(linear_solve=backward, cond_estimate=cond)
    if disc.tails_enabled:
        report.seam = max(tr.seam_residual() for tr in traces)
    sol = HsmSolutionPolygon(kp=kp, frames=frames, disc=disc, traces=traces,
                             report=report)
    if with_diagnostics:
        report.equation_residual = _offgrid_residual(kp, frames, disc, traces)
        report.compatibility = _compatibility_residual(sol)
    return sol


# ---------------------------------------------------------------------------
# field evaluation
# ---------------------------------------------------------------------------
def _deepest_frame(frames: PolygonFrames, p) -> int:
    depth = frames.containment_depth(p)
    j = int(np.argmax(depth))
    if depth[j] <= 0:
        raise DomainError(f"point {tuple(np.asarray(p, float))} is not outside the polygon")
    return j


def reconstruct(sol: HsmSolutionPolygon, p) -> complex:
    """Field value at an exterior point via its deepest half-plane."""
    return _eval_in_frame(sol, _deepest_frame(sol.frames, p), p)


def reconstruct_gradient(sol: HsmSolutionPolygon, p) -> np.ndarray:
    """Global-frame gradient of the reconstructed field at an exterior point."""
    from .halfplane import halfplane_grad

    j = _deepest_frame(sol.frames, p)
    lp = sol.frames.to_local(j, p)
    g = halfplane_grad(sol.kp, sol.traces[j], lp.x1, lp.x2, a=sol.frames.a[j],
                       spec=sol.disc.quad)
    return g[0] * sol.frames.e1[j] + g[1] * sol.frames.e2[j]


def _fresnel_tail(a_len: float, w: float) -> complex:
    """int_A^inf t^{-1/2} e^{i w t} dt for w > 0, via the Fresnel/erfc form."""
    z = np.sqrt(a_len * w) * np.exp(-0.25j * np.pi)
    return complex(np.sqrt(np.pi / w) * np.exp(0.25j * np.pi) * (1.0 - erf(z)))


def _oscillatory_grid_integral(grid: UniformGrid, values: np.ndarray, omega: float,
                               order: int = 8) -> complex:
    """int_-A^A e^{-i omega y} (piecewise cubic of values) dy by panel Gauss."""
    xg, wg = gauss_rule(order)
    m = grid.n_nodes
    nc = m - 1
    h, t0 = grid.h, grid.t0
    yq = t0 + (np.arange(nc)[:, None] + 0.5 * (xg[None, :] + 1.0)) * h
    u_int = 1.0 + 0.5 * (xg + 1.0)
    b_int = lagrange4(u_int)
    b_first = lagrange4(u_int - 1.0)
    b_last = lagrange4(u_int + 1.0)
    phase = np.exp(-1j * omega * yq) * (0.5 * h * wg)[None, :]  # (nc, q)
    fq = np.empty((nc, len(xg)), dtype=np.complex128)
    fq[0] = b_first @ values[0:4]
    fq[nc - 1] = b_last @ values[m - 4:m]
    if nc > 2:
        idx = np.arange(1, nc - 1)[:, None] - 1 + np.arange(4)[None, :]
        fq[1:nc - 1] = np.einsum("qs,ns->nq", b_int, values[idx])
    return complex(np.sum(phase * fq))


def far_field(sol: HsmSolutionPolygon, direction) -> complex:
    """Far-field pattern F(direction) of the solved exterior field.

    Inserts the large-argument Hankel asymptotics into the half-plane
    representation of the sector containing the direction; exact ties
    between sectors are averaged.
    """
    kp = sol.kp
    if kp.k.imag != 0:
        raise UnsupportedOperationError("far field requires a real wavenumber")
    if not sol.disc.tails_enabled:
        raise UnsupportedOperationError("far field needs radiating tails")
    xhat = np.asarray(direction, dtype=float)
    xhat = xhat / np.hypot(*xhat)
    k = kp.k.real
    frames = sol.frames

    proj = frames.e1 @ xhat  # (N,)
    best = np.max(proj)
    members = np.nonzero(proj >= best - 1e-12)[0]
    vals = []
    for j in members:
        ct = float(proj[j])
        st = float(frames.e2[j] @ xhat)
        tr = sol.traces[j]
        core = _oscillatory_grid_integral(tr.grid, tr.values, k * st)
        a_len = tr.grid.half_length
        tail = (tr.c_plus * _fresnel_tail(a_len, k * (1.0 - st))
                + tr.c_minus * _fresnel_tail(a_len, k * (1.0 + st)))
        pref = np.sqrt(k / (2.0 * np.pi)) * np.exp(-0.25j * np.pi)
        vals.append(pref * ct * np.exp(-1j * k * frames.a[j] * ct) * (core + tail))
    # the centroid is the phase reference; shift to the global origin
    shift = np.exp(-1j * k * float(xhat @ frames.centroid))
    return complex(shift * np.mean(vals))


def far_field_pattern(sol: HsmSolutionPolygon, n_directions: int) -> tuple[np.ndarray, np.ndarray]:
    """Sampled far field at n equally spaced angles; returns (theta, F)."""
    theta = np.linspace(0.0, 2.0 * np.pi, n_directions, endpoint=False)
    f = np.array([far_field(sol, (np.cos(t), np.sin(t))) for t in theta])
    return theta, f


def sommerfeld_residual(sol: HsmSolutionPolygon, radius: float,
                        n_samples: int = 64) -> float:
    """R^{1/2} max_j |du/dr - i k u| sampled on the circle of given radius."""
    kp = sol.kp
    if kp.k.imag != 0:
        raise UnsupportedOperationError("Sommerfeld residual requires a real wavenumber")
    frames = sol.frames
    circum = float(np.max(np.hypot(*(frames.vertices - frames.centroid).T)))
    if radius <= circum:
        raise DomainError(f"radius {radius} does not enclose the polygon (>{circum:.3g})")
    theta = np.linspace(0.0, 2.0 * np.pi, n_samples, endpoint=False)
    worst = 0.0
    for t in theta:
        xhat = np.array([np.cos(t), np.sin(t)])
        p = frames.centroid + radius * xhat
        u = reconstruct(sol, p)
        du = reconstruct_gradient(sol, p)
        worst = max(worst, abs(xhat @ du - 1j * kp.k * u))
    return float(np.sqrt(radius) * worst)
