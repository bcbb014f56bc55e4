"""P2 finite elements for the time-dependent advection-diffusion-reaction
equation on the unit square, with residual-based stabilizations and the
evolve-filter-relax (EFR) regularization."""

from .benchmark import BenchmarkSpec, benchmark_problem, error_norms, exact_solution
from .efr import EFRConfig, HelmholtzFilter, efr_step, helmholtz_filter, indicator, relax, van_cittert
from .fem import FEField, FESpace, interpolate
from .harness import RunConfig, SweepReport, export_vtk, parse_config, run_study, write_csv
from .mesh import StructuredTriMesh, build_structured_mesh, local_peclet
from .simulation import ADRProblem, RunError, RunResult, TimeConfig, run
from .sparse import SolverError, StageError, solve
from .stabilizers import StabConfig, stabilization_contribution, tau

__version__ = "0.1.0"
