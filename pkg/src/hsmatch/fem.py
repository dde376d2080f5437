"""P1 finite elements on the bounded coupling domain and the coupled system.

The general problem (variable rho, volume source f, sound-hard obstacle)
keeps the trace matching equations of the polygon solver, replaces the
Dirichlet rows on the polygon edges by pointwise matching with the interior
field, and closes the system with the variational rows

    int (grad u . grad v - k^2 rho u v) - ik sum_j int_{Gb_j} u v
        - sum_j int_{Gb_j} (Lambda_j phi_j) v  =  int f v

tested against every P1 hat function; the obstacle boundary carries the
natural homogeneous Neumann condition.  The Robin data on each coupling
boundary piece comes from the half-plane representation of that piece's
half-plane, evaluated directly at the boundary Gauss points.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import AssemblyError, DomainError, MeshError, SupportError
from .geometry import PolygonFrames
from .halfplane import _as_kp, build_rows
from .hsm_core import (HsmDiscretization, ResidualReport, _edge_targets_local,
                       _Layout, _solve_dense, _traces_from_vector)
from .quadrature import QuadratureSpec, gauss_rule

logger = logging.getLogger(__name__)

__all__ = [
    "FemMesh",
    "CoupledSolution",
    "build_square_ring_mesh",
    "read_mesh_file",
    "write_mesh_file",
    "assemble_coupled",
    "solve_coupled",
    "eval_coupled",
]

GAMMA_TAG = -1  # obstacle boundary; coupling pieces use their edge index j >= 0


@dataclass
class FemMesh:
    """Conforming triangulation of the bounded coupling domain.

    Attributes
    ----------
    nodes : (n, 2) float array.
    triangles : (nt, 3) int array, counterclockwise.
    boundary_edges : (ne, 2) int array of node pairs on the boundary.
    boundary_tags : (ne,) int array; GAMMA_TAG for the obstacle part,
        otherwise the index j of the coupling piece Gb_j.
    rho : (nt,) complex piecewise-constant refraction coefficient.
    f : (nt,) complex piecewise-constant source.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    rho: np.ndarray = field(default=None)
    f: np.ndarray = field(default=None)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=int)
        self.boundary_edges = np.asarray(self.boundary_edges, dtype=int).reshape(-1, 2)
        self.boundary_tags = np.asarray(self.boundary_tags, dtype=int)
        nt = len(self.triangles)
        if self.rho is None:
            self.rho = np.ones(nt, dtype=np.complex128)
        if self.f is None:
            self.f = np.zeros(nt, dtype=np.complex128)
        self.rho = np.asarray(self.rho, dtype=np.complex128)
        self.f = np.asarray(self.f, dtype=np.complex128)
        if self.rho.shape != (nt,) or self.f.shape != (nt,):
            raise MeshError("rho / f must be per-triangle arrays")

    # -- derived quantities ---------------------------------------------------
    def triangle_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]  # (nt, 3, 2)
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def validate(self) -> None:
        """Conformity, orientation, and boundary-tag consistency checks."""
        n = len(self.nodes)
        if self.triangles.min(initial=0) < 0 or self.triangles.max(initial=-1) >= n:
            raise MeshError("triangle index out of range")
        areas = self.triangle_areas()
        if np.any(areas <= 0):
            raise MeshError(f"non-positive triangle area at index {int(np.argmin(areas))}")

        # every edge is shared by exactly two triangles or is a tagged boundary edge
        edges = {}
        for t, tri in enumerate(self.triangles):
            for a, b in ((0, 1), (1, 2), (2, 0)):
                key = (min(tri[a], tri[b]), max(tri[a], tri[b]))
                edges[key] = edges.get(key, 0) + 1
        if any(c > 2 for c in edges.values()):
            raise MeshError("non-conforming mesh: an edge is shared by > 2 triangles")
        boundary = {k for k, c in edges.items() if c == 1}
        tagged = {(min(a, b), max(a, b)) for a, b in self.boundary_edges}
        if boundary != tagged:
            missing = boundary - tagged
            extra = tagged - boundary
            raise MeshError(
                f"boundary tags do not partition the boundary "
                f"({len(missing)} untagged, {len(extra)} spurious edges)")
        im = self.rho.imag
        if np.any(im < -1e-14):
            raise MeshError("rho must be real or have nonnegative imaginary part")

    def validate_against(self, frames: PolygonFrames) -> None:
        """Geometric compatibility with the polygon half-plane layout."""
        self.validate()
        for j in range(frames.n_edges):
            sel = self.boundary_tags == j
            if not np.any(sel):
                raise MeshError(f"no boundary edges tagged for coupling piece {j}")
            pts = self.nodes[self.boundary_edges[sel].ravel()]
            depth = (pts - frames.centroid) @ frames.e1[j] - frames.a[j]
            if np.any(depth <= 0):
                raise MeshError(
                    f"coupling piece {j} leaves half-plane {j} "
                    f"(min depth {float(depth.min()):.3g})")
        # perturbation supports must stay inside the polygon
        flagged = np.nonzero((self.rho != 1.0) | (self.f != 0.0))[0]
        if len(flagged):
            verts = self.nodes[self.triangles[flagged]].reshape(-1, 2)
            x1 = (verts - frames.centroid) @ frames.e1.T  # (m, N)
            if np.any(x1 >= frames.a[None, :] - 1e-12):
                raise SupportError(
                    "rho != 1 or f != 0 on a triangle not strictly inside the polygon")

    def set_disc_bump(self, center, radius: float, rho_value=None, f_value=None) -> None:
        """Tag triangles whose centroid lies in a disc (piecewise-constant bump)."""
        cent = self.nodes[self.triangles].mean(axis=1)
        sel = np.hypot(cent[:, 0] - center[0], cent[:, 1] - center[1]) <= radius
        if rho_value is not None:
            self.rho[sel] = rho_value
        if f_value is not None:
            self.f[sel] = f_value


def build_square_ring_mesh(outer: float, inner: float | None, n: int,
                           center=(0.0, 0.0)) -> FemMesh:
    """Structured triangulation of a square, optionally with a square hole.

    The outer square has side ``outer`` and ``n`` cells per side, each split
    into two triangles.  When ``inner`` is given, the cells inside the
    concentric square of that side (snapped to the grid) are removed and the
    resulting interior boundary is tagged as the obstacle.  Outer sides are
    tagged as coupling pieces 0..3 in the order +x, +y, -x, -y.
    """
    if n < 4:
        raise MeshError(f"resolution n must be >= 4, got {n}")
    if inner is not None and not 0 < inner < outer:
        raise MeshError(f"inner side {inner} must lie in (0, outer={outer})")
    h = outer / n
    half = outer / 2.0
    xs = np.linspace(-half, half, n + 1) + center[0]
    ys = np.linspace(-half, half, n + 1) + center[1]
    node_id = lambda i, j: j * (n + 1) + i
    xv, yv = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.column_stack([xv.T.ravel(), yv.T.ravel()])  # row-major in j

    hole = np.zeros((n, n), dtype=bool)
    if inner is not None:
        m = int(round(inner / (2 * h)))
        m = min(max(m, 1), n // 2 - 1)
        lo, hi = n // 2 - m, n // 2 + m
        if 2 * m >= n:
            raise MeshError("inner square leaves no room for the ring")
        hole[lo:hi, lo:hi] = True

    tris = []
    for j in range(n):
        for i in range(n):
            if hole[i, j]:
                continue
            a, b = node_id(i, j), node_id(i + 1, j)
            c, d = node_id(i + 1, j + 1), node_id(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    triangles = np.array(tris, dtype=int)

    # boundary edges oriented with the domain on the left (outward = (t2, -t1))
    bedges, btags = [], []
    for j in range(n):  # vertical sides
        bedges.append((node_id(n, j), node_id(n, j + 1)))
        btags.append(0)  # +x side runs upward
        bedges.append((node_id(0, j + 1), node_id(0, j)))
        btags.append(2)  # -x side runs downward
    for i in range(n):  # horizontal sides
        bedges.append((node_id(i + 1, n), node_id(i, n)))
        btags.append(1)  # +y side runs leftward
        bedges.append((node_id(i, 0), node_id(i + 1, 0)))
        btags.append(3)  # -y side runs rightward
    if inner is not None:
        m = int(round(inner / (2 * h)))
        m = min(max(m, 1), n // 2 - 1)
        lo, hi = n // 2 - m, n // 2 + m
        for t in range(lo, hi):
            bedges.append((node_id(lo, t), node_id(lo, t + 1)))
            btags.append(GAMMA_TAG)  # hole left side: outward points into the hole
            bedges.append((node_id(hi, t + 1), node_id(hi, t)))
            btags.append(GAMMA_TAG)
            bedges.append((node_id(t + 1, lo), node_id(t, lo)))
            btags.append(GAMMA_TAG)
            bedges.append((node_id(t, hi), node_id(t + 1, hi)))
            btags.append(GAMMA_TAG)

    # drop nodes orphaned by the hole and remap indices
    used = np.zeros(len(nodes), dtype=bool)
    used[triangles.ravel()] = True
    remap = -np.ones(len(nodes), dtype=int)
    remap[used] = np.arange(int(used.sum()))
    mesh = FemMesh(nodes=nodes[used], triangles=remap[triangles],
                   boundary_edges=remap[np.array(bedges, dtype=int)],
                   boundary_tags=np.array(btags, dtype=int))
    mesh.validate()
    return mesh


# ---------------------------------------------------------------------------
# mesh file format: "nodes <n>" / "triangles <n>" / "boundary <n>" sections
# ---------------------------------------------------------------------------
def write_mesh_file(mesh: FemMesh, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"nodes {len(mesh.nodes)}\n")
        for x, y in mesh.nodes:
            fh.write(f"{x!r} {y!r}\n")
        fh.write(f"triangles {len(mesh.triangles)}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"{a} {b} {c}\n")
        fh.write(f"boundary {len(mesh.boundary_edges)}\n")
        for (a, b), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
            name = "gamma" if tag == GAMMA_TAG else f"gb{tag + 1}"
            fh.write(f"{a} {b} {name}\n")


def read_mesh_file(path) -> FemMesh:
    """Parse the plain-text mesh format ('#' starts a comment)."""
    tokens: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0]
            tokens.extend(line.split())
    pos = 0

    def take(n):
        nonlocal pos
        chunk = tokens[pos:pos + n]
        if len(chunk) < n:
            raise MeshError("truncated mesh file")
        pos += n
        return chunk

    def expect(word):
        got = take(1)[0]
        if got != word:
            raise MeshError(f"expected section '{word}', found '{got}'")

    expect("nodes")
    n = int(take(1)[0])
    nodes = np.array(take(2 * n), dtype=float).reshape(n, 2)
    expect("triangles")
    nt = int(take(1)[0])
    tris = np.array(take(3 * nt), dtype=int).reshape(nt, 3)
    expect("boundary")
    ne = int(take(1)[0])
    edges, tags = [], []
    for _ in range(ne):
        a, b, name = take(3)
        edges.append((int(a), int(b)))
        if name == "gamma":
            tags.append(GAMMA_TAG)
        elif name.startswith("gb"):
            tags.append(int(name[2:]) - 1)
        else:
            raise MeshError(f"unknown boundary tag '{name}'")
    mesh = FemMesh(nodes=nodes, triangles=tris,
                   boundary_edges=np.array(edges, dtype=int),
                   boundary_tags=np.array(tags, dtype=int))
    mesh.validate()
    return mesh


# ---------------------------------------------------------------------------
# P1 building blocks
# ---------------------------------------------------------------------------
def p1_stiffness_mass(mesh: FemMesh):
    """Global stiffness and rho-weighted mass (dense, complex)."""
    n = len(mesh.nodes)
    K = np.zeros((n, n), dtype=np.complex128)
    M = np.zeros((n, n), dtype=np.complex128)
    p = mesh.nodes[mesh.triangles]                # (nt, 3, 2)
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    # grad lambda_i = perpendicular of the opposite edge / (2 area)
    e0 = p[:, 2] - p[:, 1]
    e1 = p[:, 0] - p[:, 2]
    e2 = p[:, 1] - p[:, 0]
    grads = np.stack([e0, e1, e2], axis=1)        # (nt, 3, 2)
    grads = np.stack([-grads[..., 1], grads[..., 0]], axis=-1)
    grads /= (2.0 * area)[:, None, None]
    ke = np.einsum("tid,tjd->tij", grads, grads) * area[:, None, None]
    me = (np.ones((3, 3)) + np.eye(3))[None, :, :] / 12.0 * area[:, None, None]
    me = me * mesh.rho[:, None, None]
    for i in range(3):
        for j in range(3):
            np.add.at(K, (mesh.triangles[:, i], mesh.triangles[:, j]), ke[:, i, j])
            np.add.at(M, (mesh.triangles[:, i], mesh.triangles[:, j]), me[:, i, j])
    return K, M


def p1_load(mesh: FemMesh) -> np.ndarray:
    """Load vector of the piecewise-constant source (exact for P1)."""
    n = len(mesh.nodes)
    b = np.zeros(n, dtype=np.complex128)
    area = mesh.triangle_areas()
    w = mesh.f * area / 3.0
    for i in range(3):
        np.add.at(b, mesh.triangles[:, i], w)
    return b


def boundary_mass(mesh: FemMesh, tags) -> np.ndarray:
    """P1 mass on the selected boundary pieces (for the -ik Robin term)."""
    n = len(mesh.nodes)
    B = np.zeros((n, n), dtype=np.complex128)
    sel = np.isin(mesh.boundary_tags, tags)
    for (a, b) in mesh.boundary_edges[sel]:
        length = float(np.hypot(*(mesh.nodes[b] - mesh.nodes[a])))
        B[a, a] += length / 3.0
        B[b, b] += length / 3.0
        B[a, b] += length / 6.0
        B[b, a] += length / 6.0
    return B


def _edge_outward_normal(mesh: FemMesh, a: int, b: int) -> np.ndarray:
    """Outward normal of boundary edge (a, b) oriented with the mesh outside
    on the right of a->b for counterclockwise triangles."""
    t = mesh.nodes[b] - mesh.nodes[a]
    t /= np.hypot(*t)
    return np.array([t[1], -t[0]])


class _PointLocator:
    """Barycentric point location over all triangles (vectorized)."""

    def __init__(self, mesh: FemMesh):
        self.mesh = mesh
        p = mesh.nodes[mesh.triangles]
        self.origin = p[:, 0]                     # (nt, 2)
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        self.inv = np.empty((len(det), 2, 2))
        self.inv[:, 0, 0] = d2[:, 1] / det
        self.inv[:, 0, 1] = -d2[:, 0] / det
        self.inv[:, 1, 0] = -d1[:, 1] / det
        self.inv[:, 1, 1] = d1[:, 0] / det

    def locate(self, p, tol: float = 1e-10):
        """Return (triangle index, barycentric weights) or (None, None)."""
        d = np.asarray(p, dtype=float) - self.origin  # (nt, 2)
        lam12 = np.einsum("tij,tj->ti", self.inv, d)
        lam0 = 1.0 - lam12.sum(axis=1)
        lams = np.column_stack([lam0, lam12])
        ok = np.all(lams >= -tol, axis=1)
        idx = np.nonzero(ok)[0]
        if len(idx) == 0:
            return None, None
        t = int(idx[0])
        w = np.clip(lams[t], 0.0, 1.0)
        return t, w / w.sum()


@dataclass(frozen=True)
class CoupledSolution:
    """Traces plus interior nodal field of the coupled general problem."""

    kp: object
    frames: PolygonFrames
    disc: HsmDiscretization
    mesh: FemMesh
    traces: tuple
    u_b: np.ndarray
    report: ResidualReport

    @property
    def locator(self) -> "_PointLocator":
        cached = getattr(self, "_locator", None)
        if cached is None:
            cached = _PointLocator(self.mesh)
            object.__setattr__(self, "_locator", cached)
        return cached


def _gamma_rows(frames, disc, mesh, locator, offset, A, j):
    """phi_j = u_b on the polygon edge j (P1 interpolation at trace nodes)."""
    nodes = disc.grid.nodes()
    idx_e = disc.groups[j][1]
    m = disc.grid.n_nodes
    for i in idx_e:
        r = j * m + i
        A[r, r] = 1.0
        p = frames.line_point(j, float(nodes[i]))
        t, w = locator.locate(p)
        if t is None:
            raise AssemblyError(
                f"trace node at parameter {nodes[i]:.4g} on edge {j} is outside the mesh")
        for vid, wt in zip(mesh.triangles[t], w):
            A[r, offset + vid] -= wt


def assemble_coupled(kp, frames: PolygonFrames, mesh: FemMesh,
                     disc: HsmDiscretization, spec: QuadratureSpec | None = None,
                     n_gauss_boundary: int = 3):
    """Assemble the dense coupled HSM-FEM system; returns (matrix, rhs)."""
    kp = _as_kp(kp)
    spec = spec or disc.quad
    mesh.validate_against(frames)
    n_edges = frames.n_edges
    m = disc.grid.n_nodes
    lay = _Layout(n_edges, m, disc.tails_enabled)
    n_fem = len(mesh.nodes)
    n = lay.n + n_fem
    A = np.zeros((n, n), dtype=np.complex128)
    rhs = np.zeros(n, dtype=np.complex128)
    offset = lay.n
    nodes = disc.grid.nodes()
    locator = _PointLocator(mesh)

    # trace rows: D-coupling on the overlap sections, matching on the edges
    for j in range(n_edges):
        idx_m, idx_e, idx_p = disc.groups[j]
        rows = j * m + np.concatenate([idx_m, idx_p])
        A[rows, rows] = 1.0
        _gamma_rows(frames, disc, mesh, locator, offset, A, j)
        for side, idx in ((-1, idx_m), (+1, idx_p)):
            if len(idx) == 0:
                continue
            js = (j + side) % n_edges
            x1, x2 = _edge_targets_local(frames, j, js, nodes[idx])
            rows_blk = build_rows(kp, disc.grid, x1, x2, spec, mode="value",
                                  tails=disc.tails_enabled)
            r = j * m + idx
            A[r[:, None], np.arange(m)[None, :] + js * m] -= rows_blk.vals[:, 0, :]
            if disc.tails_enabled:
                A[r, lay.c_plus(js)] -= rows_blk.c_plus[:, 0]
                A[r, lay.c_minus(js)] -= rows_blk.c_minus[:, 0]

    if disc.tails_enabled:
        a_len = disc.grid.half_length
        w = np.sqrt(a_len) * np.exp(-1j * kp.k * a_len)
        for j in range(n_edges):
            rp, rm = lay.c_plus(j), lay.c_minus(j)
            A[rp, rp] = 1.0
            A[rp, j * m + (m - 1)] = -w
            A[rm, rm] = 1.0
            A[rm, j * m] = -w

    # FEM block: stiffness - k^2 (rho mass) - ik boundary mass
    K, M = p1_stiffness_mass(mesh)
    B = boundary_mass(mesh, list(range(n_edges)))
    A[offset:, offset:] = K - kp.k**2 * M - 1j * kp.k * B
    rhs[offset:] = p1_load(mesh)

    # Robin coupling: -sum_j int_{Gb_j} (Lambda_j phi_j) v
    xg, wg = gauss_rule(n_gauss_boundary)
    for j in range(n_edges):
        sel = np.nonzero(mesh.boundary_tags == j)[0]
        pa = mesh.nodes[mesh.boundary_edges[sel, 0]]
        pb = mesh.nodes[mesh.boundary_edges[sel, 1]]
        lengths = np.hypot(*(pb - pa).T)
        # Gauss points on all edges of this piece, flattened
        s = 0.5 * (xg + 1.0)
        pts = pa[:, None, :] + s[None, :, None] * (pb - pa)[:, None, :]  # (ne, q, 2)
        pts_flat = pts.reshape(-1, 2)
        d = pts_flat - frames.centroid
        x1 = d @ frames.e1[j] - frames.a[j]
        x2 = d @ frames.e2[j]
        if np.any(x1 < disc.grid.h):
            raise MeshError(
                f"coupling piece {j} comes within one grid spacing of line {j}")
        rows_blk = build_rows(kp, disc.grid, x1, x2, spec, mode="full",
                              tails=disc.tails_enabled)
        for e_local, e_idx in enumerate(sel):
            na, nb = mesh.boundary_edges[e_idx]
            nrm = _edge_outward_normal(mesh, na, nb)
            n1 = float(nrm @ frames.e1[j])
            n2 = float(nrm @ frames.e2[j])
            for q in range(n_gauss_boundary):
                flat = e_local * n_gauss_boundary + q
                robin_vals = (n1 * rows_blk.vals[flat, 1, :]
                              + n2 * rows_blk.vals[flat, 2, :]
                              - 1j * kp.k * rows_blk.vals[flat, 0, :])
                robin_cp = (n1 * rows_blk.c_plus[flat, 1]
                            + n2 * rows_blk.c_plus[flat, 2]
                            - 1j * kp.k * rows_blk.c_plus[flat, 0])
                robin_cm = (n1 * rows_blk.c_minus[flat, 1]
                            + n2 * rows_blk.c_minus[flat, 2]
                            - 1j * kp.k * rows_blk.c_minus[flat, 0])
                wq = 0.5 * lengths[e_local] * wg[q]
                for node, basis in ((na, 1.0 - s[q]), (nb, s[q])):
                    r = offset + node
                    A[r, j * m:(j + 1) * m] -= wq * basis * robin_vals
                    if disc.tails_enabled:
                        A[r, lay.c_plus(j)] -= wq * basis * robin_cp
                        A[r, lay.c_minus(j)] -= wq * basis * robin_cm
    return A, rhs


def solve_coupled(kp, frames: PolygonFrames, mesh: FemMesh,
                  disc: HsmDiscretization,
                  spec: QuadratureSpec | None = None) -> CoupledSolution:
    """Assemble and LU-solve the coupled system; returns the solution bundle."""
    kp = _as_kp(kp)
    matrix, rhs = assemble_coupled(kp, frames, mesh, disc, spec)
    x, cond, backward = _solve_dense(matrix, rhs)
    logger.info("coupled solve: n=%d cond~%.2e backward=%.2e", len(rhs), cond, backward)
    traces = _traces_from_vector(kp, disc, frames.n_edges, x)
    lay = _Layout(frames.n_edges, disc.grid.n_nodes, disc.tails_enabled)
    u_b = x[lay.n:]
    report = ResidualReport(linear_solve=backward, cond_estimate=cond)
    if disc.tails_enabled:
        report.seam = max(tr.seam_residual() for tr in traces)
    sol = CoupledSolution(kp=kp, frames=frames, disc=disc, mesh=mesh,
                          traces=traces, u_b=u_b, report=report)
    report.equation_residual = _gamma_matching_residual(sol)
    return sol


def _gamma_matching_residual(sol: CoupledSolution) -> float:
    """max |phi_j - u_b| over the polygon-edge trace nodes (a solve check)."""
    locator = sol.locator
    worst = 0.0
    nodes = sol.disc.grid.nodes()
    for j in range(sol.frames.n_edges):
        for i in sol.disc.groups[j][1]:
            p = sol.frames.line_point(j, float(nodes[i]))
            t, w = locator.locate(p)
            ub = complex(sol.u_b[sol.mesh.triangles[t]] @ w)
            worst = max(worst, abs(ub - sol.traces[j].values[i]))
    return worst


def robin_matching_residual(sol: CoupledSolution, n_samples_per_piece: int = 8) -> float:
    """Sampled |[d/dn - ik] u_b - Lambda_j phi_j| on the coupling boundary.

    The interior Robin trace uses the piecewise-constant P1 gradient of the
    triangle adjacent to each sampled edge midpoint, so this residual carries
    O(h_mesh) consistency error on top of the solver mismatch.
    """
    from .halfplane import op_Lambda

    mesh, frames = sol.mesh, sol.frames
    locator = sol.locator
    worst = 0.0
    for j in range(frames.n_edges):
        sel = np.nonzero(mesh.boundary_tags == j)[0]
        step = max(1, len(sel) // n_samples_per_piece)
        for e_idx in sel[::step]:
            na, nb = mesh.boundary_edges[e_idx]
            mid = 0.5 * (mesh.nodes[na] + mesh.nodes[nb])
            nrm = _edge_outward_normal(mesh, na, nb)
            inside = mid - 1e-8 * nrm * max(1.0, np.hypot(*(mesh.nodes[nb] - mesh.nodes[na])))
            t, w = locator.locate(inside)
            if t is None:
                continue
            tri = mesh.triangles[t]
            p = mesh.nodes[tri]
            d1, d2 = p[1] - p[0], p[2] - p[0]
            det = d1[0] * d2[1] - d1[1] * d2[0]
            g = np.array([[p[1][1] - p[2][1], p[2][0] - p[1][0]],
                          [p[2][1] - p[0][1], p[0][0] - p[2][0]],
                          [p[0][1] - p[1][1], p[1][0] - p[0][0]]]) / det
            grad_u = sol.u_b[tri] @ g
            u_mid = complex(sol.u_b[tri] @ w)
            robin_fem = complex(nrm @ grad_u) - 1j * sol.kp.k * u_mid
            robin_hp = op_Lambda(sol.kp, frames, j, sol.traces[j], [(mid, nrm)],
                                 spec=sol.disc.quad)[0]
            worst = max(worst, abs(robin_fem - robin_hp))
    return worst


def eval_coupled(sol: CoupledSolution, p) -> complex:
    """Field anywhere: P1 interpolation inside the mesh, half-plane otherwise."""
    t, w = sol.locator.locate(p)
    if t is not None:
        return complex(sol.u_b[sol.mesh.triangles[t]] @ w)
    members, interior = sol.frames.classify(p)
    if not members:
        raise DomainError(f"point {tuple(np.asarray(p, float))} lies inside the obstacle "
                          "or outside the computable region")
    from .hsm_core import HsmSolutionPolygon, reconstruct

    shim = HsmSolutionPolygon(kp=sol.kp, frames=sol.frames, disc=sol.disc,
                              traces=sol.traces, report=sol.report)
    return reconstruct(shim, p)
