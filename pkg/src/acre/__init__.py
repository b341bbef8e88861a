"""Finite-volume phase-field simulations of mineral dissolution and precipitation.

The conservative Allen-Cahn equation is solved with an element-wise split
L-scheme and coupled iteratively to solute diffusion and heat conduction.
"""

from .allen_cahn import LSchemeConfig, LSchemeSolver, lscheme_step, newton_step_conservative, newton_step_original
from .chemistry import ArrheniusRate, ModelParams, RateBounds, constant_rate, mg_bound, reaction_rate
from .config import ConfigError, ScenarioConfig, initial_condition, load_config, preset
from .coupling import ConvergenceFailure, Problem, SimState, SolverConfig, coupled_step, dt_guidance, run_simulation
from .diagnostics import StepDiagnostics, conservation_audit, mineral_volume, reaction_integral
from .mesh import BoundaryCondition, Dirichlet, Field, Mesh, Neumann, assemble_diffusion, build_mesh, l2_norm
from .transport import heat_step, solute_step

__version__ = "0.1.0"
