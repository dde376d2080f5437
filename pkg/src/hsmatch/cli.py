"""Configuration-driven command line front end.

Two subcommands operate on a JSON config file:

    hsmatch solve  config.json --out results/ --threads 1
    hsmatch verify config.json --out results/

``solve`` runs a polygon-Dirichlet or coupled problem and writes the
requested artifacts (field grid CSV, far-field CSV, per-edge trace CSVs,
residual report JSON).  ``verify`` runs the half-plane property battery
and/or registered convergence studies and writes a JSON report.  The config
schema is versioned and fail-closed: unknown keys are rejected.

Exit codes: 0 success, 2 config error, 3 solver error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import verify as verify_mod
from .errors import ConfigError, HsmError
from .fem import build_square_ring_mesh, eval_coupled, read_mesh_file, solve_coupled
from .geometry import build_polygon
from .halfplane import KernelParams
from .hsm_core import (HsmDiscretization, far_field_pattern, reconstruct,
                       solve_polygon)
from .quadrature import QuadratureSpec
from .trace import default_truncation, write_trace_csv

__all__ = ["load_config", "run", "main"]

_SCHEMA = {
    "version": None,
    "kind": None,
    "k": {"re": None, "im": None},
    "polygon": {"vertices": None},
    "dirichlet": {"type": None, "z": None, "values": None, "path": None},
    "mesh": {"type": None, "outer": None, "inner": None, "n": None, "path": None},
    "rho_bumps": None,
    "f_bumps": None,
    "discretization": {"A": None, "h": None, "quad_order": None,
                       "tail_tol": None, "refine_depth": None,
                       "tails_enabled": None},
    "outputs": {"field_grid": {"bbox": None, "nx": None, "ny": None},
                "far_field_count": None, "export_traces": None},
    "battery": None,
    "convergence_cases": None,
}

_KINDS = ("polygon-dirichlet", "general-coupled", "verify-battery")


def _check_keys(data, schema, path="config"):
    if not isinstance(data, dict):
        return
    for key, value in data.items():
        if key not in schema:
            raise ConfigError(f"unknown key '{path}.{key}' (schema is fail-closed)")
        sub = schema[key]
        if isinstance(sub, dict):
            _check_keys(value, sub, f"{path}.{key}")


def load_config(path) -> dict:
    """Parse and validate a run configuration; raises ConfigError on misuse."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(cfg, _SCHEMA)
    if cfg.get("version") != 1:
        raise ConfigError("config.version must be 1")
    kind = cfg.get("kind")
    if kind not in _KINDS:
        raise ConfigError(f"config.kind must be one of {_KINDS}, got {kind!r}")
    if kind != "verify-battery":
        k = cfg.get("k")
        if not isinstance(k, dict) or "re" not in k:
            raise ConfigError("config.k must be an object with 're' (and optional 'im')")
        if float(k["re"]) <= 0:
            raise ConfigError("config.k.re must be positive")
        if float(k.get("im", 0.0)) < 0:
            raise ConfigError("config.k.im must be nonnegative")
        if "polygon" not in cfg or "vertices" not in cfg["polygon"]:
            raise ConfigError("config.polygon.vertices is required")
    if kind == "polygon-dirichlet" and "dirichlet" not in cfg:
        raise ConfigError("config.dirichlet is required for polygon-dirichlet runs")
    if kind == "general-coupled" and "mesh" not in cfg:
        raise ConfigError("config.mesh is required for general-coupled runs")
    return cfg


def _wavenumber(cfg) -> KernelParams:
    k = cfg["k"]
    return KernelParams(complex(float(k["re"]), float(k.get("im", 0.0))))


def _quad_spec(dcfg) -> QuadratureSpec:
    return QuadratureSpec(
        order=int(dcfg.get("quad_order", 6)),
        refine_depth=int(dcfg.get("refine_depth", 8)),
        tail_tol=float(dcfg.get("tail_tol", 1e-10)),
    )


def _discretization(cfg, frames, kp) -> HsmDiscretization:
    dcfg = cfg.get("discretization", {})
    a_len = float(dcfg.get("A", default_truncation(kp.k, frames.diameter)))
    h = float(dcfg.get("h", 2.0 * np.pi / kp.k.real / 20.0))
    tails = dcfg.get("tails_enabled")
    return HsmDiscretization.build(frames, kp, a_len, h, quad=_quad_spec(dcfg),
                                   tails_enabled=tails)


def _dirichlet_data(cfg, frames, kp):
    d = cfg["dirichlet"]
    kind = d.get("type")
    if kind == "point-source":
        case = verify_mod.PointSourceCase(z=tuple(d["z"]), k=kp.k)
        members, interior = frames.classify(np.asarray(d["z"], dtype=float))
        if not interior:
            raise ConfigError("dirichlet.z must lie strictly inside the polygon")
        return case.dirichlet_data(frames)
    if kind == "edge-constants":
        values = [complex(*v) if isinstance(v, (list, tuple)) else complex(v)
                  for v in d["values"]]
        if len(values) != frames.n_edges:
            raise ConfigError(
                f"dirichlet.values needs {frames.n_edges} entries, got {len(values)}")
        return lambda j, t: np.full(np.shape(t), values[j], dtype=np.complex128)
    if kind == "sampled-file":
        table = np.loadtxt(d["path"], delimiter=",", comments="#")
        # columns: edge index, parameter, Re, Im
        def g(j, t):
            rows = table[table[:, 0] == j]
            if len(rows) < 2:
                raise ConfigError(f"sampled dirichlet file has no data for edge {j}")
            return (np.interp(t, rows[:, 1], rows[:, 2])
                    + 1j * np.interp(t, rows[:, 1], rows[:, 3]))
        return g
    raise ConfigError(f"unknown dirichlet.type {kind!r}")


def _build_mesh(cfg, frames):
    mcfg = cfg["mesh"]
    kind = mcfg.get("type")
    if kind == "square-ring":
        mesh = build_square_ring_mesh(float(mcfg["outer"]), mcfg.get("inner"),
                                      int(mcfg["n"]))
    elif kind == "file":
        mesh = read_mesh_file(mcfg["path"])
    else:
        raise ConfigError(f"unknown mesh.type {kind!r}")
    for bump in cfg.get("rho_bumps", []) or []:
        mesh.set_disc_bump(bump["center"], float(bump["radius"]),
                           rho_value=complex(*np.atleast_1d(bump["value"])[:2])
                           if np.ndim(bump["value"]) else complex(bump["value"]))
    for bump in cfg.get("f_bumps", []) or []:
        value = bump["value"]
        fv = complex(value[0], value[1]) if isinstance(value, (list, tuple)) else complex(value)
        mesh.set_disc_bump(bump["center"], float(bump["radius"]), f_value=fv)
    return mesh


def _write_field_csv(path, evaluator, outputs):
    grid = outputs.get("field_grid")
    if not grid:
        return
    x0, y0, x1, y1 = (float(v) for v in grid["bbox"])
    nx, ny = int(grid["nx"]), int(grid["ny"])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x,y,re,im\n")
        for y in np.linspace(y0, y1, ny):
            for x in np.linspace(x0, x1, nx):
                try:
                    value = evaluator(np.array([x, y]))
                except HsmError:
                    value = complex(np.nan, np.nan)
                fh.write(f"{x!r},{y!r},{value.real!r},{value.imag!r}\n")


def _write_far_field_csv(path, sol, count):
    theta, values = far_field_pattern(sol, count)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("theta,re,im,abs\n")
        for t, v in zip(theta, values):
            fh.write(f"{t!r},{v.real!r},{v.imag!r},{abs(v)!r}\n")


def run(cfg: dict, out_dir, n_threads: int = 1) -> dict:
    """Execute a validated config; writes artifacts and returns the report."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kind = cfg["kind"]

    if kind == "verify-battery":
        report: dict = {}
        if cfg.get("battery", True):
            report["halfplane_battery"] = verify_mod.property_battery_halfplane()
        for case in cfg.get("convergence_cases", []) or []:
            report[case] = verify_mod.run_convergence(case).as_dict()
        verify_mod.report_to_json(report, out / "report.json")
        return report

    kp = _wavenumber(cfg)
    frames = build_polygon(cfg["polygon"]["vertices"])
    disc = _discretization(cfg, frames, kp)
    outputs = cfg.get("outputs", {})

    if kind == "polygon-dirichlet":
        g = _dirichlet_data(cfg, frames, kp)
        sol = solve_polygon(kp, frames, g, disc, n_threads=n_threads)
        evaluator = lambda p: reconstruct(sol, p)
        traces = sol.traces
        report = {"kind": kind, "n_unknowns": disc.n_unknowns(frames.n_edges),
                  "residuals": sol.report.as_dict()}
        if disc.tails_enabled and outputs.get("far_field_count"):
            _write_far_field_csv(out / "farfield.csv", sol,
                                 int(outputs["far_field_count"]))
    else:
        mesh = _build_mesh(cfg, frames)
        sol = solve_coupled(kp, frames, mesh, disc)
        evaluator = lambda p: eval_coupled(sol, p)
        traces = sol.traces
        report = {"kind": kind,
                  "n_unknowns": disc.n_unknowns(frames.n_edges) + len(mesh.nodes),
                  "residuals": sol.report.as_dict()}

    _write_field_csv(out / "field.csv", evaluator, outputs)
    if outputs.get("export_traces"):
        for j, tr in enumerate(traces):
            write_trace_csv(tr, out / f"trace_{j}.csv")
    verify_mod.report_to_json(report, out / "report.json")
    return report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hsmatch",
        description="Half-space matching solver for 2D Helmholtz scattering")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "verify"):
        p = sub.add_parser(name)
        p.add_argument("config", help="path to the JSON run configuration")
        p.add_argument("--out", default="hsmatch-out", help="output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="assembly worker threads (results are identical)")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.command == "verify" and cfg["kind"] != "verify-battery":
            raise ConfigError("the verify command needs kind = 'verify-battery'")
        if args.command == "solve" and cfg["kind"] == "verify-battery":
            raise ConfigError("the solve command cannot run a verify-battery config")
        run(cfg, args.out, n_threads=args.threads)
    except ConfigError as exc:
        sys.stderr.write(json.dumps({"error": "config", "message": str(exc)}) + "\n")
        return 2
    except OSError as exc:
        sys.stderr.write(json.dumps({"error": "io", "message": str(exc)}) + "\n")
        return 4
    except HsmError as exc:
        sys.stderr.write(json.dumps({"error": "solver", "message": str(exc)}) + "\n")
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
