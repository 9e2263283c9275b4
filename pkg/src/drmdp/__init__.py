"""Distributionally robust finite-horizon MDPs: game and static formulations.

The functional core lives in the submodules; the most used names are
re-exported here.
"""

from .ambiguity import (FiniteKernelSet, Polytope, RRect, SaRect, Singleton, SrRect, SRect, UnionOfPolytopes,
                        compose_sr, enumerate_extreme_kernels, marginalize_statewise, s_rect_enlargement,
                        sa_product_probe)
from .cost import (CostSaRect, CostSingleton, CostSRect, FiniteCostSet, diagnose_cost, solve_dual_cost,
                   solve_primal_cost, solve_via_regularization, support_function_h)
from .estimator import CostRobustSolver, NestedRiskSolver, RobustMDPSolver, StaticOracle
from .exceptions import (CostAggregationError, CostStructureError, DegenerateError, DimensionError, DrmdpError,
                         EnumerationCapError, NumericalError, ValidationError)
from .instance_file import ProblemFile, dump, dumps, load, loads
from .lp import LinearProgram, minmax_value, maxmin_value, solve_lp, solve_matrix_game
from .mdp import MdpInstance, evaluate_policy, solve_nominal, validate_instance
from .risk import AvarSpec, avar, build_avar_ambiguity, solve_nested_risk
from .robust import (check_common_worst_kernel, check_convex_marginal, diagnose, evaluate_policy_robust,
                     solve_dual, solve_primal)
from .soc import SocSpec, build_soc_ambiguity, soc_rectangularity_probe, solve_soc_noise_space
from .static import (OracleConfig, check_equivalence, enlargement_invariance, history_dependent_check,
                     static_dual, static_primal)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
