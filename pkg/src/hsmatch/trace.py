"""Trace unknowns on the half-plane boundary lines.

A trace is stored as complex samples on a uniform grid over [-A, A] plus two
explicit tail amplitudes: beyond the truncation the trace *is* the radiating
model

    phi(t) = c_pm * e^{i k |t|} |t|^{-1/2},        |t| > A,

the leading term of the outgoing asymptotics along the line.  Inside [-A, A]
evaluation uses local 4-point Lagrange (piecewise cubic) interpolation.
Seam continuity at |t| = A is diagnosed, never enforced: when traces come out
of a linear solve, grid values and tail amplitudes are independent unknowns.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, EstimationError
from .quadrature import interp_weights

__all__ = [
    "UniformGrid",
    "RadiatingTrace",
    "TraceSegmentView",
    "TailFit",
    "trace_eval",
    "estimate_tail_coefficients",
    "default_truncation",
    "write_trace_csv",
    "read_trace_csv",
]


def default_truncation(k: complex, diameter: float) -> float:
    """Default truncation half-length: max(8 wavelengths, 2 x polygon diameter)."""
    wavelength = 2.0 * np.pi / complex(k).real
    return max(8.0 * wavelength, 2.0 * diameter)


@dataclass(frozen=True)
class UniformGrid:
    """Symmetric uniform grid on [-A, A] with n >= 4 nodes."""

    half_length: float
    n_nodes: int

    def __post_init__(self):
        if self.half_length <= 0:
            raise ValueError(f"truncation half-length must be positive, got {self.half_length}")
        if self.n_nodes < 4:
            raise ValueError(f"grid needs at least 4 nodes, got {self.n_nodes}")

    @property
    def h(self) -> float:
        return 2.0 * self.half_length / (self.n_nodes - 1)

    @property
    def t0(self) -> float:
        return -self.half_length

    def nodes(self) -> np.ndarray:
        return np.linspace(-self.half_length, self.half_length, self.n_nodes)

    @staticmethod
    def from_spacing(half_length: float, h_target: float) -> "UniformGrid":
        """Grid whose spacing is h_target rounded so nodes land on +-A exactly."""
        n_cells = max(int(round(2.0 * half_length / h_target)), 3)
        return UniformGrid(half_length=half_length, n_nodes=n_cells + 1)


@dataclass(frozen=True)
class RadiatingTrace:
    """Discrete trace on line j: core samples plus radiating tail amplitudes."""

    j: int
    k: complex
    grid: UniformGrid
    values: np.ndarray
    c_plus: complex = 0.0
    c_minus: complex = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.shape != (self.grid.n_nodes,):
            raise ValueError(
                f"values shape {values.shape} does not match grid ({self.grid.n_nodes},)"
            )
        object.__setattr__(self, "values", values)
        k = complex(self.k)
        if not (k.real > 0 and k.imag >= 0):
            raise DomainError(f"wavenumber must have Re(k) > 0, Im(k) >= 0, got {k}")
        object.__setattr__(self, "k", k)

    @property
    def half_length(self) -> float:
        return self.grid.half_length

    def tail_model(self, t):
        """The radiating tail c_pm e^{ik|t|} |t|^{-1/2} for |t| > 0."""
        t = np.asarray(t, dtype=float)
        c = np.where(t >= 0, self.c_plus, self.c_minus)
        return c * np.exp(1j * self.k * np.abs(t)) / np.sqrt(np.abs(t))

    def seam_residual(self) -> float:
        """Mismatch between the endpoint samples and the tail model at +-A."""
        a = self.half_length
        model = self.tail_model(np.array([a, -a]))
        return float(np.max(np.abs(np.array([self.values[-1], self.values[0]]) - model)))

    def seam_tolerance(self) -> float:
        """Default acceptance level: 10 h^2 max|values|."""
        return 10.0 * self.grid.h**2 * float(np.max(np.abs(self.values)) or 1.0)

    def scaled(self, factor: complex) -> "RadiatingTrace":
        return replace(self, values=self.values * factor,
                       c_plus=self.c_plus * factor, c_minus=self.c_minus * factor)

    def __add__(self, other: "RadiatingTrace") -> "RadiatingTrace":
        if other.grid != self.grid or other.j != self.j:
            raise ValueError("can only add traces on the same grid and edge")
        return replace(self, values=self.values + other.values,
                       c_plus=self.c_plus + other.c_plus,
                       c_minus=self.c_minus + other.c_minus)


@dataclass(frozen=True)
class TraceSegmentView:
    """Restriction of a trace to a parameter interval (evaluation delegates)."""

    parent: RadiatingTrace
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty segment [{self.lo}, {self.hi}]")

    def eval(self, t):
        t = np.asarray(t, dtype=float)
        if np.any((t < self.lo) | (t > self.hi)):
            raise DomainError("evaluation outside the segment interval")
        return trace_eval(self.parent, t)


def trace_eval(tr: RadiatingTrace, t):
    """Evaluate a trace anywhere on its line.

    Piecewise-cubic interpolation of the grid values for |t| <= A, the
    radiating tail model beyond.  Linear in (values, c_plus, c_minus).
    """
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    out = np.zeros(t.shape, dtype=np.complex128)

    a = tr.half_length
    core = np.abs(t) <= a
    if np.any(core):
        starts, w = interp_weights(tr.grid.t0, tr.grid.h, tr.grid.n_nodes, t[core])
        idx = starts[:, None] + np.arange(4)[None, :]
        out[core] = np.sum(tr.values[idx] * w, axis=1)
    if np.any(~core):
        out[~core] = tr.tail_model(t[~core])
    return complex(out[0]) if scalar else out


@dataclass(frozen=True)
class TailFit:
    """Result of fitting the radiating tail model to far samples."""

    c_plus: complex
    c_minus: complex
    b_plus: complex
    b_minus: complex
    residual: float

    def __iter__(self):
        return iter((self.c_plus, self.c_minus))


def _fit_side(t: np.ndarray, v: np.ndarray, k: complex) -> tuple[complex, complex, float]:
    """Least squares for v ~ c e^{ik|t|}|t|^{-1/2} (1 + b/|t|) on one side."""
    at = np.abs(t)
    osc = np.exp(1j * k * at)
    design = np.column_stack([osc * at**-0.5, osc * at**-1.5])  # (n, 2)
    sol, _, rank, sv = np.linalg.lstsq(design, v, rcond=None)
    if rank < 2 or sv[0] > 1e12 * max(sv[-1], 1e-300):
        raise EstimationError("tail fit is rank deficient (samples too clustered)")
    resid = float(np.linalg.norm(design @ sol - v))
    c, d = sol
    b = d / c if c != 0 else 0.0
    return complex(c), complex(b), resid


def estimate_tail_coefficients(samples, k: complex, min_abscissa: float = 0.0) -> TailFit:
    """Fit radiating-tail amplitudes to far samples of a trace.

    Parameters
    ----------
    samples : iterable of (t, value) or pair of arrays (t, values)
        Samples on both sides; at least 4 per side with |t| > min_abscissa.
    k : complex wavenumber.
    min_abscissa : discard samples closer to the origin than this.

    Returns
    -------
    TailFit with per-side amplitudes c_pm, first-order corrections b_pm and
    the combined least-squares residual norm.
    """
    arr = np.asarray(list(samples) if not isinstance(samples, tuple) else None)
    if isinstance(samples, tuple):
        t = np.asarray(samples[0], dtype=float)
        v = np.asarray(samples[1], dtype=np.complex128)
    else:
        t = arr[:, 0].real.astype(float)
        v = arr[:, 1].astype(np.complex128)
    keep = np.abs(t) > max(min_abscissa, 0.0)
    t, v = t[keep], v[keep]

    out = {}
    resid2 = 0.0
    for name, side in (("plus", t > 0), ("minus", t < 0)):
        if np.count_nonzero(side) < 4:
            raise EstimationError(f"need at least 4 samples on the {name} side")
        c, b, r = _fit_side(t[side], v[side], complex(k))
        out[name] = (c, b)
        resid2 += r * r
    return TailFit(c_plus=out["plus"][0], c_minus=out["minus"][0],
                   b_plus=out["plus"][1], b_minus=out["minus"][1],
                   residual=float(np.sqrt(resid2)))


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------
def write_trace_csv(tr: RadiatingTrace, path) -> None:
    """Write a trace as CSV: header comments carry j, k, A, c_pm; rows t,Re,Im."""
    buf = io.StringIO()
    buf.write("# hsmatch trace v1\n")
    buf.write(f"# j={tr.j} k_re={tr.k.real!r} k_im={tr.k.imag!r}\n")
    buf.write(f"# A={tr.half_length!r} n={tr.grid.n_nodes}\n")
    buf.write(f"# c_plus={tr.c_plus.real!r},{tr.c_plus.imag!r}"
              f" c_minus={tr.c_minus.real!r},{tr.c_minus.imag!r}\n")
    buf.write("t,re,im\n")
    for t, v in zip(tr.grid.nodes(), tr.values):
        buf.write(f"{t!r},{v.real!r},{v.imag!r}\n")
    with open(path, "w", encoding="utf-8") as f:
        f.write(buf.getvalue())


def read_trace_csv(path) -> RadiatingTrace:
    """Inverse of :func:`write_trace_csv` (bit-exact round trip)."""
    meta: dict[str, str] = {}
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line or line == "t,re,im":
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        key, val = tok.split("=", 1)
                        meta[key] = val
                continue
            parts = line.split(",")
            rows.append((float(parts[0]), float(parts[1]), float(parts[2])))
    try:
        j = int(meta["j"])
        k = complex(float(meta["k_re"]), float(meta["k_im"]))
        a = float(meta["A"])
        n = int(meta["n"])
        cp = complex(*map(float, meta["c_plus"].split(",")))
        cm = complex(*map(float, meta["c_minus"].split(",")))
    except KeyError as exc:
        raise ValueError(f"trace CSV is missing header field {exc}") from exc
    if len(rows) != n:
        raise ValueError(f"trace CSV row count {len(rows)} does not match n={n}")
    values = np.array([complex(r, i) for _, r, i in rows])
    return RadiatingTrace(j=j, k=k, grid=UniformGrid(a, n), values=values,
                          c_plus=cp, c_minus=cm)
