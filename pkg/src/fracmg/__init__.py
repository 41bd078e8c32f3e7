"""Multigrid-preconditioned reduced-Hessian solver for optimal control of
fractional diffusion, with spectral-distance measurement tooling."""

from .config import ConfigError, ExperimentConfig, build_config
from .control import (ControlProblem, HessianOp, SolveReport, analytic_target,
                      assemble_rhs, cg_solve, load_target_csv, save_target_csv)
from .experiments import (CaseResult, RunRecord, run_experiment, write_csv,
                          write_json)
from .fracop import (DiscreteEigensystem, FractionalSolveOp, QuadratureRule,
                     apply_K_exact, compute_eigensystem, quad_params,
                     quad_rule_for_spacing, scalar_quadrature)
from .meshfem import (FEOperators, Level, MeshHierarchy, MeshLevel,
                      Prolongation, assemble_operators, build_hierarchy)
from .plotting import emit_plot_data, render_figures
from .precond import (MultigridPrecond, TwoGridPrecond, build_mg,
                      build_two_grid, mgcg_solve)
from .properties import CheckResult, run_property_checks
from .specdist import (GramMatrix, LemmaRateReport, SpectralDistanceReport,
                       lemma_rate, materialize, rate_table, spectral_distance)

__version__ = "0.1.0"
