"""Convex-polygon geometry: edges, half-planes, and per-edge local frames.

A convex polygon O with N edges is surrounded by N overlapping half-planes.
Half-plane j lies beyond the line through edge j; everything is expressed in
per-edge local coordinates (x1, x2) sharing the polygon centroid O as origin:

* ``e1[j]``  -- unit outward normal of edge j (the x1 axis),
* ``e2[j]``  -- e1[j] rotated +90 deg, i.e. the counterclockwise edge tangent,
* ``a[j]``   -- distance from the centroid to the edge line, so the half-plane
  is {x1 > a[j]} and its boundary line is {x1 = a[j]}, parametrized by x2,
* ``theta[j]`` -- exterior angle rotating frame j onto frame j+1; convexity
  makes every theta lie strictly in (0, pi) and they sum to 2*pi.

Edge j occupies the parameter interval [edge_lo[j], edge_hi[j]] on its line;
the corner shared with edge j+1 sits at x2 = edge_hi[j].  All indices are
0-based and wrap modulo N.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError

__all__ = ["PolygonFrames", "build_polygon", "LocalPoint"]

_CONVEXITY_RTOL = 1e-12


@dataclass(frozen=True)
class LocalPoint:
    """A point expressed in the local frame of edge ``j``."""

    j: int
    x1: float
    x2: float


@dataclass(frozen=True)
class PolygonFrames:
    """Immutable geometry bundle for a strictly convex polygon.

    Attributes
    ----------
    vertices : np.ndarray, shape (N, 2)
        Vertices in counterclockwise order.
    centroid : np.ndarray, shape (2,)
        Area centroid, the shared origin of all local frames.
    e1, e2 : np.ndarray, shape (N, 2)
        Outward normal and tangent of each edge (orthonormal frames).
    a : np.ndarray, shape (N,)
        Centroid-to-edge-line distances (all positive).
    theta : np.ndarray, shape (N,)
        Exterior angles between consecutive frames, in (0, pi).
    edge_lo, edge_hi : np.ndarray, shape (N,)
        Parameter interval of edge j on its line (x2 coordinates).
    corners : np.ndarray, shape (N, 2)
        corners[j] is the vertex shared by edges j and j+1.
    """

    vertices: np.ndarray
    centroid: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    a: np.ndarray
    theta: np.ndarray
    edge_lo: np.ndarray
    edge_hi: np.ndarray
    corners: np.ndarray
    diameter: float = field(default=0.0)

    @property
    def n_edges(self) -> int:
        return len(self.a)

    def to_local(self, j: int, p) -> LocalPoint:
        """Coordinates of global point ``p`` in the frame of edge ``j``."""
        j = j % self.n_edges
        d = np.asarray(p, dtype=float) - self.centroid
        return LocalPoint(j=j, x1=float(d @ self.e1[j]), x2=float(d @ self.e2[j]))

    def to_global(self, lp: LocalPoint) -> np.ndarray:
        """Inverse of :meth:`to_local`; exact isometry."""
        j = lp.j % self.n_edges
        return self.centroid + lp.x1 * self.e1[j] + lp.x2 * self.e2[j]

    def local_coords(self, pts) -> np.ndarray:
        """Local coordinates of many points at once.

        Parameters
        ----------
        pts : array_like, shape (M, 2)

        Returns
        -------
        np.ndarray, shape (N, M, 2)
            ``out[j, m]`` = (x1, x2) of point m in frame j.
        """
        d = np.atleast_2d(np.asarray(pts, dtype=float)) - self.centroid  # (M, 2)
        x1 = d @ self.e1.T  # (M, N)
        x2 = d @ self.e2.T  # (M, N)
        return np.stack([x1.T, x2.T], axis=-1)  # (N, M, 2)

    def line_point(self, j: int, t) -> np.ndarray:
        """Global point(s) on line j at parameter(s) t, i.e. (a[j], t) locally."""
        j = j % self.n_edges
        t = np.asarray(t, dtype=float)
        return self.centroid + self.a[j] * self.e1[j] + np.multiply.outer(t, self.e2[j])

    def classify(self, p) -> tuple[set[int], bool]:
        """Which open half-planes contain ``p``, and whether p is interior to O.

        Returns
        -------
        (members, interior) : set of edge indices with x1 > a[j], and the
        interior-of-polygon flag (x1 < a[j] for every j).
        """
        d = np.asarray(p, dtype=float) - self.centroid
        x1 = self.e1 @ d  # (N,)
        members = set(np.nonzero(x1 > self.a)[0].tolist())
        interior = bool(np.all(x1 < self.a))
        return members, interior

    def containment_depth(self, p) -> np.ndarray:
        """x1[j] - a[j] for every frame; positive means inside half-plane j."""
        d = np.asarray(p, dtype=float) - self.centroid
        return self.e1 @ d - self.a


def build_polygon(vertices) -> PolygonFrames:
    """Build the per-edge frames of a strictly convex polygon.

    Parameters
    ----------
    vertices : array_like, shape (N, 2)
        Polygon vertices, N >= 3.  Clockwise input is silently reversed so
        the stored order is always counterclockwise.

    Raises
    ------
    GeometryError
        For fewer than 3 vertices, repeated/collinear vertices, or any
        reflex corner (the offending vertex index is named).
    """
    v = np.asarray(vertices, dtype=float)
    if v.ndim != 2 or v.shape[1] != 2:
        raise GeometryError(f"vertices must have shape (N, 2), got {v.shape}")
    n = len(v)
    if n < 3:
        raise GeometryError(f"need at least 3 vertices, got {n}")

    # Canonicalize to counterclockwise via the signed (shoelace) area.
    x, y = v[:, 0], v[:, 1]
    cross_terms = x * np.roll(y, -1) - np.roll(x, -1) * y  # (N,)
    signed_area = 0.5 * float(np.sum(cross_terms))
    if signed_area < 0:
        v = v[::-1].copy()
        x, y = v[:, 0], v[:, 1]
        cross_terms = x * np.roll(y, -1) - np.roll(x, -1) * y
        signed_area = -signed_area

    scale = float(np.max(np.abs(v - v.mean(axis=0)))) or 1.0

    # Strict convexity: every consecutive edge pair must turn left by a
    # cross product bounded away from zero relative to the edge lengths.
    edges = np.roll(v, -1, axis=0) - v  # (N, 2), edge j: v[j] -> v[j+1]
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    if np.any(lengths <= _CONVEXITY_RTOL * scale):
        bad = int(np.argmin(lengths))
        raise GeometryError(f"vertices {bad} and {(bad + 1) % n} coincide")
    prev = np.roll(edges, 1, axis=0)
    turn = prev[:, 0] * edges[:, 1] - prev[:, 1] * edges[:, 0]  # (N,)
    limit = _CONVEXITY_RTOL * np.roll(lengths, 1) * lengths
    if np.any(turn <= limit):
        bad = int(np.argmin(turn / (np.roll(lengths, 1) * lengths)))
        raise GeometryError(
            f"polygon is not strictly convex at vertex {bad} (turn cross product {turn[bad]:.3e})"
        )

    if signed_area <= 0:
        raise GeometryError("polygon has non-positive area")
    centroid = (v + np.roll(v, -1, axis=0)) * cross_terms[:, None]
    centroid = centroid.sum(axis=0) / (6.0 * signed_area)  # (2,)

    tangents = edges / lengths[:, None]  # e2 axes
    normals = np.column_stack([tangents[:, 1], -tangents[:, 0]])  # outward for CCW

    a = np.einsum("ij,ij->i", v - centroid, normals)  # (N,)
    if np.any(a <= 0):
        bad = int(np.argmin(a))
        raise GeometryError(f"centroid is not strictly inside (edge {bad}, offset {a[bad]:.3e})")

    edge_lo = np.einsum("ij,ij->i", v - centroid, tangents)
    edge_hi = np.einsum("ij,ij->i", np.roll(v, -1, axis=0) - centroid, tangents)

    # Exterior angles: rotation carrying frame j onto frame j+1.
    nxt = np.roll(normals, -1, axis=0)
    cosines = np.einsum("ij,ij->i", normals, nxt)
    sines = normals[:, 0] * nxt[:, 1] - normals[:, 1] * nxt[:, 0]
    theta = np.arctan2(sines, cosines)
    if np.any(theta <= 0) or np.any(theta >= np.pi):
        bad = int(np.argmin(theta))
        raise GeometryError(f"exterior angle at vertex {bad} outside (0, pi)")

    diffs = v[:, None, :] - v[None, :, :]
    diameter = float(np.sqrt(np.max(np.sum(diffs**2, axis=-1))))

    frames = PolygonFrames(
        vertices=v,
        centroid=centroid,
        e1=normals,
        e2=tangents,
        a=a,
        theta=theta,
        edge_lo=edge_lo,
        edge_hi=edge_hi,
        corners=np.roll(v, -1, axis=0),
        diameter=diameter,
    )
    _check_frame_recursion(frames)
    return frames


def _check_frame_recursion(frames: PolygonFrames, tol: float = 1e-12) -> None:
    """Frame j rotated by theta[j] must give frame j+1; the composition of
    all N rotations must come back to the identity."""
    n = frames.n_edges
    total = np.eye(2)
    for j in range(n):
        c, s = np.cos(frames.theta[j]), np.sin(frames.theta[j])
        e1_next = c * frames.e1[j] + s * frames.e2[j]
        jn = (j + 1) % n
        if not np.allclose(e1_next, frames.e1[jn], atol=1e-12):
            raise GeometryError(f"frame recursion broken between edges {j} and {jn}")
        total = np.array([[c, s], [-s, c]]) @ total
    if not np.allclose(total, np.eye(2), atol=tol):
        raise GeometryError("frame rotations do not compose to the identity")
