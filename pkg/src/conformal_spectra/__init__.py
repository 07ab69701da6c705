"""Eigenvalue optimization over conformal factors on triangulated surfaces."""

from importlib import resources

from .diagnostics import bad_point_scan, energy_identity_check, sphere_map_report
from .eigen import EigenPackage, cluster_eigenvalues, solve, solve_laplace, solve_steklov
from .estimators import ConformalFlowOptimizer, EigenvalueFunctional
from .exceptions import *  # noqa: F401,F403
from .fem import Kind, assemble_boundary_mass, assemble_mass, assemble_stiffness, build_problem
from .flow import FlowConfig, FlowTrace, PathFamily, downhill_direction, flow_step, minmax_deform, run_flow
from .functional import Evaluation, FunctionalSpec, directional_derivative_fd, evaluate
from .game import solve_game
from .mesh import ConformalFactor, Support, TriMesh, geodesic_ball, load_mesh, refine, save_off
from .subgradient import (
    PseudoNormResult,
    Subgradient,
    SubgradientSet,
    generate_candidates,
    is_critical,
    pseudo_norm,
    support_function_check,
    validate_pairing,
)

__version__ = "0.1.0"


def data_path(name):
    """Path of a bundled data file (meshes and example configs)."""
    return resources.files(__name__).joinpath("data", name)
