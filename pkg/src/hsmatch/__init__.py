"""Half-space matching solver for 2D time-harmonic Helmholtz scattering.

The exterior of a convex polygon is covered by overlapping half-planes; the
solution is represented through half-plane Dirichlet propagators acting on
trace unknowns that carry explicit radiating tails, and the traces are
coupled by collocated matching equations (plus a P1 finite-element patch for
compactly perturbed problems).
"""

from .errors import (AssemblyError, ConfigError, DomainError, EstimationError,
                     GeometryError, HsmError, MeshError, QuadratureError,
                     SolveError, SupportError, UnsupportedOperationError)
from .geometry import LocalPoint, PolygonFrames, build_polygon
from .halfplane import (KernelParams, halfplane_eval, halfplane_grad, kernel_H,
                        kernel_grad_H, op_D, op_Lambda)
from .hsm_core import (HsmDiscretization, HsmSolutionPolygon, ResidualReport,
                       assemble_polygon, far_field, far_field_pattern,
                       reconstruct, reconstruct_gradient, solve_polygon,
                       sommerfeld_residual)
from .fem import (CoupledSolution, FemMesh, assemble_coupled,
                  build_square_ring_mesh, eval_coupled, read_mesh_file,
                  solve_coupled, write_mesh_file)
from .quadrature import QuadratureSpec
from .specfun import hankel_h0, hankel_h1
from .trace import (RadiatingTrace, TraceSegmentView, UniformGrid,
                    default_truncation, estimate_tail_coefficients,
                    read_trace_csv, trace_eval, write_trace_csv)
from .verify import (ConvergenceReport, DiscBump, PointSourceCase,
                     convolution_oracle, phi, phi_gradient,
                     property_battery_halfplane, run_convergence)

__version__ = "0.1.0"
