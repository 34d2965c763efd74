"""Multigrid reduction in time with weighted C-relaxation, plus two-level convergence bounds."""

from .mgrit import ConvergenceReport, RelaxationSpec, build_hierarchy, sequential_solve, solve, v_cycle
from .problems import PROBLEM_IDS, ProblemSetup, build_problem, spatial_spectrum
from .theory import BoundQuery, BoundResult, fcf_bound_approx, fcf_bound_exact, fcfcf_bound_numeric, heatmap_scan
from .timestepping import ButcherTableau, SpatialOperator, StepOperator, factor_step, make_tableau, stability_eigenvalue

__version__ = "0.1.0"
