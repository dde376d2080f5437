"""Independent oracles and experiment harnesses.

Everything here is deliberately independent of the half-plane quadrature and
the system assembly: the fundamental solution and the volume-potential
oracle go straight through the Hankel functions and generic quadrature, so
they can adjudicate the solver's output.  On top of the oracles sit the
registered convergence studies and the half-plane property battery used by
the acceptance suite and the CLI ``verify`` command.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, QuadratureError
from .geometry import build_polygon
from .halfplane import KernelParams, _as_kp
from .quadrature import gauss_rule
from .specfun import hankel_h0_h1, hankel_h0

__all__ = [
    "PointSourceCase",
    "DiscBump",
    "ConvergenceReport",
    "phi",
    "phi_gradient",
    "convolution_oracle",
    "mesh_source_oracle",
    "run_convergence",
    "property_battery_halfplane",
    "report_to_json",
]


@dataclass(frozen=True)
class PointSourceCase:
    """Manufactured reference: a point source and its closed-form field."""

    z: tuple
    k: complex

    def trace_on_line(self, frames, j, t):
        pts = frames.line_point(j, np.asarray(t, dtype=float))
        return phi(self.k, pts, np.asarray(self.z, dtype=float))

    def dirichlet_data(self, frames):
        return lambda j, t: self.trace_on_line(frames, j, t)

    def tail_coefficients(self, frames, j):
        """Exact radiating-tail amplitudes of the trace on line j."""
        k = complex(self.k)
        cstar = np.exp(0.25j * np.pi) / np.sqrt(8.0 * np.pi * k)
        zt = np.asarray(self.z, dtype=float) - frames.centroid
        phase = k * float(frames.e2[j] @ zt)
        return cstar * np.exp(-1j * phase), cstar * np.exp(1j * phase)

    def far_field(self, direction):
        k = complex(self.k)
        xhat = np.asarray(direction, dtype=float)
        xhat = xhat / np.hypot(*xhat)
        return (np.exp(0.25j * np.pi) / np.sqrt(8.0 * np.pi * k)
                * np.exp(-1j * k * float(xhat @ np.asarray(self.z, dtype=float))))


@dataclass(frozen=True)
class DiscBump:
    """Piecewise-constant source supported on a disc."""

    center: tuple
    radius: float
    amplitude: complex = 1.0


def phi(kp, x, y):
    """Fundamental solution (i/4) H_0^(1)(k |x - y|); broadcasts over points."""
    kp = _as_kp(kp)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = np.hypot(x[..., 0] - y[..., 0], x[..., 1] - y[..., 1])
    if np.any(d == 0):
        raise DomainError("fundamental solution evaluated at coincident points")
    out = 0.25j * hankel_h0(kp.k * d)
    return complex(out) if np.ndim(out) == 0 else out


def phi_gradient(kp, x, y):
    """Gradient of the fundamental solution with respect to x; shape (..., 2)."""
    kp = _as_kp(kp)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx = x - y
    d = np.hypot(dx[..., 0], dx[..., 1])
    if np.any(d == 0):
        raise DomainError("fundamental solution evaluated at coincident points")
    _, h1 = hankel_h0_h1(kp.k * d)
    factor = -0.25j * kp.k * h1 / d
    return factor[..., None] * dx if np.ndim(d) else factor * dx


def convolution_oracle(kp, bump: DiscBump, p, rel_tol: float = 1e-6,
                       max_doublings: int = 7) -> complex:
    """Volume potential int Phi(p, y) f(y) dy of a disc bump.

    Polar tensor Gauss quadrature around the disc center with resolution
    doubling until two consecutive levels agree to ``rel_tol``.
    """
    kp = _as_kp(kp)
    p = np.asarray(p, dtype=float)
    c = np.asarray(bump.center, dtype=float)
    radius = bump.radius

    def level(n_r, n_t):
        xr, wr = gauss_rule(n_r)
        rho = 0.5 * radius * (xr + 1.0)
        w_rho = 0.5 * radius * wr * rho
        theta = 2.0 * np.pi * np.arange(n_t) / n_t
        w_t = 2.0 * np.pi / n_t
        pts = (c[None, None, :]
               + rho[:, None, None] * np.stack([np.cos(theta), np.sin(theta)],
                                               axis=-1)[None, :, :])
        vals = phi(kp, p[None, None, :], pts)
        return complex(np.sum(vals * w_rho[:, None]) * w_t)

    n_r, n_t = 8, 16
    prev = level(n_r, n_t)
    for _ in range(max_doublings):
        n_r, n_t = 2 * n_r, 2 * n_t
        cur = level(n_r, n_t)
        if abs(cur - prev) <= rel_tol * max(abs(cur), 1e-300):
            return bump.amplitude * cur
        prev = cur
    raise QuadratureError(
        f"disc-bump quadrature did not reach {rel_tol} near p={tuple(p)}")


def mesh_source_oracle(kp, mesh, p, subdiv: int = 2) -> complex:
    """Volume potential of the mesh's piecewise-constant source.

    Integrates Phi(p, .) over every flagged triangle with a mid-edge rule on
    a uniform ``subdiv``-level refinement; the quadrature matches the exact
    discrete source carried by the mesh, so it adjudicates the coupled solve
    without sharing any of its code paths.
    """
    kp = _as_kp(kp)
    p = np.asarray(p, dtype=float)
    flagged = np.nonzero(mesh.f != 0)[0]
    total = 0.0 + 0.0j
    for t in flagged:
        tri = mesh.nodes[mesh.triangles[t]]
        pieces = [tri]
        for _ in range(subdiv):
            nxt = []
            for (a, b, c) in pieces:
                ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
                nxt += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
            pieces = nxt
        for (a, b, c) in pieces:
            area = 0.5 * abs((b - a)[0] * (c - a)[1] - (b - a)[1] * (c - a)[0])
            mids = np.array([0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)])
            total += mesh.f[t] * area / 3.0 * np.sum(phi(kp, p[None, :], mids))
    return complex(total)


# ---------------------------------------------------------------------------
# convergence studies
# ---------------------------------------------------------------------------
@dataclass
class ConvergenceReport:
    """Error ladder with observed orders from consecutive ratios.

    ``errors`` is the primary metric; additional metrics measured on the
    same ladder live in ``extra_errors`` (e.g. exterior field error next to
    the trace error).
    """

    case: str
    parameter: str
    values: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    extra_errors: dict = field(default_factory=dict)

    @staticmethod
    def _orders(values, errors) -> list:
        out = []
        for i in range(1, len(errors)):
            num = np.log(errors[i - 1] / errors[i])
            den = np.log(values[i] / values[i - 1])
            out.append(float(num / abs(den)) if den != 0 else np.nan)
        return out

    @property
    def observed_orders(self) -> list:
        return self._orders(self.values, self.errors)

    def orders_of(self, metric: str) -> list:
        return self._orders(self.values, self.extra_errors[metric])

    @property
    def loglog_slope(self) -> float:
        v = np.log(np.asarray(self.values, dtype=float))
        e = np.log(np.asarray(self.errors, dtype=float))
        return float(np.polyfit(v, e, 1)[0])

    def as_dict(self) -> dict:
        out = {
            "case": self.case,
            "parameter": self.parameter,
            "values": [float(v) for v in self.values],
            "errors": [float(e) for e in self.errors],
            "observed_orders": self.observed_orders,
            "loglog_slope": self.loglog_slope,
        }
        for name, errs in self.extra_errors.items():
            out[f"errors_{name}"] = [float(e) for e in errs]
            out[f"observed_orders_{name}"] = self._orders(self.values, errs)
        return out


def _unit_square():
    return build_polygon([(0.5, -0.5), (0.5, 0.5), (-0.5, 0.5), (-0.5, -0.5)])


_EVAL_RING = [(2.7, 0.4), (1.9, 1.9), (-0.3, 3.1), (-2.4, 1.2), (-3.0, -0.7),
              (-1.1, -2.2), (0.8, -2.9), (3.3, -1.6), (6.0, 2.0), (-5.0, -4.0)]


def _polygon_errors(kp, frames, case: PointSourceCase, half_length, h):
    """(relative L2 trace error, max exterior field error) for one solve."""
    from .hsm_core import HsmDiscretization, reconstruct, solve_polygon

    disc = HsmDiscretization.build(frames, kp, half_length, h)
    sol = solve_polygon(kp, frames, case.dirichlet_data(frames), disc,
                        with_diagnostics=False)
    nodes = disc.grid.nodes()
    worst = 0.0
    for j in range(frames.n_edges):
        exact = case.trace_on_line(frames, j, nodes)
        err = np.linalg.norm(sol.traces[j].values - exact) / np.linalg.norm(exact)
        worst = max(worst, float(err))
    field = max(abs(reconstruct(sol, np.asarray(p)) -
                    phi(kp, np.asarray(p, float), np.asarray(case.z, float)))
                for p in _EVAL_RING)
    return worst, float(field)


def run_convergence(case_id: str, ladder=None) -> ConvergenceReport:
    """Run a registered convergence study and report errors and orders.

    Registered cases: 'polygon-pointsource-h', 'polygon-pointsource-A',
    'polygon-dissipative-A', 'coupled-bump-mesh'.
    """
    lam = 2.0 * np.pi
    frames = _unit_square()
    if case_id == "polygon-pointsource-h":
        kp = KernelParams(1.0)
        case = PointSourceCase(z=(0.0, 0.0), k=1.0)
        divisors = ladder or [10, 20, 40]
        rep = ConvergenceReport(case=case_id, parameter="h",
                                extra_errors={"field": []})
        for d in divisors:
            t_err, f_err = _polygon_errors(kp, frames, case, 12 * lam, lam / d)
            rep.values.append(lam / d)
            rep.errors.append(t_err)
            rep.extra_errors["field"].append(f_err)
        return rep
    if case_id == "polygon-pointsource-A":
        # h fine enough that the truncation remainder stays above the h-floor
        kp = KernelParams(1.0)
        case = PointSourceCase(z=(0.0, 0.0), k=1.0)
        lengths = ladder or [3 * lam, 6 * lam, 12 * lam]
        rep = ConvergenceReport(case=case_id, parameter="A",
                                extra_errors={"field": []})
        for a_len in lengths:
            t_err, f_err = _polygon_errors(kp, frames, case, a_len, 0.125)
            rep.values.append(a_len)
            rep.errors.append(t_err)
            rep.extra_errors["field"].append(f_err)
        return rep
    if case_id == "polygon-dissipative-A":
        # h fine enough that the exponential truncation decay stays visible
        k = 1.0 + 0.5j
        kp = KernelParams(k)
        case = PointSourceCase(z=(0.0, 0.0), k=k)
        lengths = ladder or [4.0, 6.0, 8.0]
        rep = ConvergenceReport(case=case_id, parameter="A")
        for a_len in lengths:
            rep.values.append(a_len)
            rep.errors.append(_polygon_errors(kp, frames, case, a_len, 0.0625)[0])
        return rep
    if case_id == "coupled-bump-mesh":
        from .fem import build_square_ring_mesh, solve_coupled
        from .hsm_core import HsmDiscretization

        kp = KernelParams(1.0)
        bump = DiscBump(center=(0.1, 0.0), radius=0.2, amplitude=1.0)
        resolutions = ladder or [12, 16, 24]
        rep = ConvergenceReport(case=case_id, parameter="h_mesh")
        disc = HsmDiscretization.build(frames, kp, 6 * lam, 0.25)
        for n in resolutions:
            mesh = build_square_ring_mesh(2.0, None, n)
            mesh.set_disc_bump(bump.center, bump.radius, f_value=bump.amplitude)
            sol = solve_coupled(kp, frames, mesh, disc)
            sample = mesh.nodes[::7]
            exact = np.array([mesh_source_oracle(kp, mesh, p) for p in sample])
            got = np.array([_p1_value(sol, p) for p in sample])
            rep.values.append(2.0 / n)
            rep.errors.append(float(np.linalg.norm(got - exact)
                                    / np.linalg.norm(exact)))
        return rep
    raise ValueError(f"unknown convergence case '{case_id}'")


def _p1_value(sol, p) -> complex:
    t, w = sol.locator.locate(p)
    if t is None:
        raise DomainError(f"sample point {tuple(p)} left the mesh")
    return complex(sol.u_b[sol.mesh.triangles[t]] @ w)


# ---------------------------------------------------------------------------
# half-plane property battery
# ---------------------------------------------------------------------------
def _battery_kernel_bound(k) -> dict:
    from .halfplane import kernel_H

    kp = _as_kp(k)
    x1 = np.logspace(-3, 2, 100)
    x2 = np.concatenate([-np.logspace(-3, 2, 50)[::-1], np.logspace(-3, 2, 50)])
    g1, g2 = np.meshgrid(x1, x2, indexing="ij")
    r = np.hypot(g1, g2)
    envelope = g1 / r**2 * (1.0 + np.sqrt(r)) * np.exp(-kp.k.imag * r)
    ratio = np.abs(kernel_H(kp, g1, g2)) / envelope
    c_fit = float(np.max(ratio))
    return {"passed": bool(np.isfinite(c_fit)), "fitted_constant": c_fit}


def _battery_jump_relation(k) -> dict:
    from .halfplane import halfplane_eval
    from .trace import RadiatingTrace, UniformGrid

    kp = _as_kp(k)
    grid = UniformGrid.from_spacing(8.0, 0.05)

    def psi(t):
        return np.exp(-t * t) * (np.cos(3 * t) + 0.3)

    tr = RadiatingTrace(j=0, k=kp.k, grid=grid,
                        values=psi(grid.nodes()).astype(complex))
    ts = np.linspace(-2.0, 2.0, 21)
    errors = []
    for eps in (1e-1, 1e-2, 1e-3):
        u = halfplane_eval(kp, tr, np.full_like(ts, eps), ts)
        errors.append(float(np.max(np.abs(u - psi(ts)))))
    max_psi = float(np.max(np.abs(psi(ts))))
    monotone = errors[0] > errors[1] > errors[2]
    return {"passed": bool(monotone and errors[-1] <= 1e-2 * max_psi),
            "epsilons": [1e-1, 1e-2, 1e-3], "errors": errors, "max_psi": max_psi}


def _random_compact_trace(kp, rng, grid):
    from .trace import RadiatingTrace

    nodes = grid.nodes()
    vals = (rng.standard_normal(grid.n_nodes)
            + 1j * rng.standard_normal(grid.n_nodes))
    vals *= np.exp(-(nodes / (0.6 * grid.half_length))**8)  # compact support
    return RadiatingTrace(j=0, k=kp.k, grid=grid, values=vals)


def _strip_norm(kp, tr, x1_max, x2_max, n1=12, n2=240) -> float:
    """L2 norm of U(trace) over (0, x1_max) x (-x2_max, x2_max) by tensor Gauss."""
    from .halfplane import build_rows

    xg, wg = gauss_rule(8)
    norm2 = 0.0
    edges1 = np.linspace(0.0, x1_max, n1 + 1)
    x2q = np.linspace(-x2_max, x2_max, n2)
    w2 = 2.0 * x2_max / n2
    scale = float(np.max(np.abs(tr.values)) or 1.0)
    for a, b in zip(edges1[:-1], edges1[1:]):
        x1q = 0.5 * (a + b) + 0.5 * (b - a) * xg
        w1 = 0.5 * (b - a) * wg
        for x1v, w1v in zip(x1q, w1):
            rows = build_rows(kp, tr.grid, np.full(n2, x1v), x2q,
                              mode="value", tails=False, tail_scale=scale)
            u = rows.apply(tr)[:, 0]
            norm2 += w1v * w2 * float(np.sum(np.abs(u)**2))
    return float(np.sqrt(norm2))


def _battery_l2_bound(k, n_traces=20, seed=11) -> dict:
    from .trace import UniformGrid

    kp = _as_kp(k)
    rng = np.random.default_rng(seed)
    grid = UniformGrid.from_spacing(2.0, 0.05)
    lam = 2.0 * np.pi / kp.k.real
    dissipative = kp.k.imag > 0
    x1_max = min(5.0 * lam, 20.0 / kp.k.imag) if dissipative else 5.0 * lam
    ratios = []
    slices = []
    for _ in range(n_traces):
        tr = _random_compact_trace(kp, rng, grid)
        phi_norm = float(np.sqrt(np.trapezoid(np.abs(tr.values)**2, grid.nodes())))
        ratios.append(_strip_norm(kp, tr, x1_max, 8.0 * lam) / phi_norm)
    result = {"max_ratio": float(np.max(ratios)), "median_ratio": float(np.median(ratios))}
    result["passed"] = bool(result["max_ratio"] <= 10.0 * result["median_ratio"])
    if dissipative:
        # slice norms must decay exponentially in x1
        tr = _random_compact_trace(kp, rng, grid)
        from .halfplane import build_rows

        x2q = np.linspace(-8.0 * lam, 8.0 * lam, 200)
        depths = np.array([1.0, 2.0, 4.0, 6.0]) / kp.k.imag * 0.5
        norms = []
        for d in depths:
            rows = build_rows(kp, tr.grid, np.full_like(x2q, d), x2q,
                              mode="value", tails=False)
            norms.append(float(np.linalg.norm(rows.apply(tr)[:, 0])))
        slope = np.polyfit(depths, np.log(norms), 1)[0]
        result["slice_decay_rate"] = float(slope)
        result["passed"] = bool(result["passed"] and slope <= -0.8 * kp.k.imag)
    return result


def _ray_decay(kp, tr, angles, radii, mode) -> dict:
    from .halfplane import build_rows

    slopes = {}
    for ang in angles:
        x1 = radii * np.cos(ang)
        x2 = radii * np.sin(ang)
        rows = build_rows(kp, tr.grid, x1, x2, mode=mode, tails=False)
        out = rows.apply(tr)
        mag = np.abs(out[:, 0]) if mode == "value" else np.linalg.norm(out, axis=1)
        slopes[float(np.degrees(ang))] = float(np.polyfit(np.log(radii), np.log(mag), 1)[0])
    return slopes


def _battery_ray_decay(k) -> dict:
    from .trace import RadiatingTrace, UniformGrid

    kp = _as_kp(k)
    grid = UniformGrid.from_spacing(400.0, 0.1)
    nodes = grid.nodes()
    tr = RadiatingTrace(j=0, k=kp.k, grid=grid,
                        values=((1.0 + np.abs(nodes))**-2).astype(complex))
    radii = np.logspace(2.0, 3.0, 10)
    angles = np.radians([20.0, 45.0, 70.0])
    val_slopes = _ray_decay(kp, tr, angles, radii, "value")
    grad_slopes = _ray_decay(kp, tr, angles, radii, "grad")
    ok = all(abs(s + 0.5) <= 0.05 for s in val_slopes.values())
    ok = ok and all(abs(s + 0.5) <= 0.05 for s in grad_slopes.values())
    return {"passed": bool(ok), "value_slopes": val_slopes,
            "gradient_slopes": grad_slopes}


def _battery_sommerfeld_subhalfplane(k) -> dict:
    """M_{R, eps=1} ladder for a radiating point-source trace."""
    from .halfplane import build_rows
    from .trace import RadiatingTrace, UniformGrid

    kp = _as_kp(k)
    kr = kp.k.real
    lam = 2.0 * np.pi / kr
    z = np.array([-1.0, 0.0])
    grid = UniformGrid.from_spacing(max(30.0 * lam, 150.0), lam / 10.0)
    nodes = grid.nodes()
    vals = phi(kp, np.column_stack([np.zeros_like(nodes), nodes]), z)
    cstar = np.exp(0.25j * np.pi) / np.sqrt(8.0 * np.pi * kp.k)
    cp = cstar * np.exp(-1j * kp.k * z[1])
    cm = cstar * np.exp(1j * kp.k * z[1])
    tr = RadiatingTrace(j=0, k=kp.k, grid=grid, values=vals, c_plus=cp, c_minus=cm)

    ladder = []
    for r_mult in (10.0, 20.0, 40.0, 80.0):
        radius = r_mult * lam
        theta = np.linspace(-np.pi / 2, np.pi / 2, 41)
        x1 = radius * np.cos(theta)
        x2 = radius * np.sin(theta)
        keep = x1 > 1.0
        rows = build_rows(kp, grid, x1[keep], x2[keep], mode="full", tails=True,
                          tail_scale=abs(cstar))
        out = rows.apply(tr)
        xh1, xh2 = np.cos(theta[keep]), np.sin(theta[keep])
        resid = np.abs(xh1 * out[:, 1] + xh2 * out[:, 2] - 1j * kp.k * out[:, 0])
        ladder.append(float(np.sqrt(radius) * np.max(resid)))
    decreasing = all(b < a for a, b in zip(ladder, ladder[1:]))
    return {"passed": bool(decreasing), "radii_wavelengths": [10, 20, 40, 80],
            "m_values": ladder}


def property_battery_halfplane(kp=None) -> dict:
    """Run the half-plane property battery; returns a report dictionary.

    Executes the kernel bound, jump relation, L2 bounds (real and
    dissipative), algebraic ray decay with its gradient analogue, and the
    Sommerfeld ladder for a radiating trace.  Failures are entries with
    ``passed: false``, never exceptions.
    """
    kp = _as_kp(kp if kp is not None else 1.0)
    k_diss = complex(kp.k.real, kp.k.imag if kp.k.imag > 0 else 0.5)
    report = {
        "kernel_bound_real": _battery_kernel_bound(kp.k.real),
        "kernel_bound_dissipative": _battery_kernel_bound(k_diss),
        "jump_relation": _battery_jump_relation(kp.k.real),
        "l2_bound_real": _battery_l2_bound(kp.k.real, n_traces=20),
        "l2_bound_dissipative": _battery_l2_bound(k_diss, n_traces=20),
        "ray_decay": _battery_ray_decay(kp.k.real),
        "sommerfeld_subhalfplane": _battery_sommerfeld_subhalfplane(kp.k.real),
    }
    report["passed"] = bool(all(v.get("passed") for v in report.values()
                                if isinstance(v, dict)))
    return report


def report_to_json(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
