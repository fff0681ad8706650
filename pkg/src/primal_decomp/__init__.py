"""Distributed primal decomposition with online-estimated costs.

Agents with unknown convex costs share one scalar resource constraint. Each
agent fits a max-affine surrogate from samples of its cost, solves a
penalty-relaxed local subproblem at its current allocation, and trades
resource with its graph neighbors according to the multiplier differences.
"""
from .errors import (ConfigError, GenerationError, InfeasibleError, MalformedInputError,
                     NumericalFailure, PrimalDecompError, RefusalError)
from .graph import Graph, complete_graph, generate_erdos_renyi, is_connected, neighbors
from .lp import LpProblem, LpSolution, lp_solve, lp_solve_lexicographic, lp_solve_on_optimal_face
from .oracle import (MaxAffineEstimate, Sample, SampleSet, SamplingSchedule, draw_sample,
                     eval_estimate, fit_max_affine, prune)
from .problem import (AgentProblem, GenerationConfig, ProblemInstance, ReferenceSolution,
                      centralized_reference, eval_true, eval_true_subgradient, generate_instance,
                      grid_oracle, slater_check)
from .runtime import AgentState, MessageBoard, RunConfig, Trace, TraceRow, init, run, step_size
from .subsolver import (PrimalDualPair, Subproblem, YRange, dual_value, epsilon_estimate, inner_min,
                        primal_value, smallest_max_multiplier, solve_subproblem, y_range)

__version__ = "0.1.0"
