"""MAP approximation for discrete Bayesian networks.

Stochastic hill climbing scored by loopy belief propagation, an exact
variable-elimination engine used as ground truth, elimination-order width
analysis, and generators for reduction and benchmark networks.
"""

__version__ = "0.1.0"

from .bp import (
    BpConfig,
    BpState,
    bp_init,
    bp_log_evidence,
    bp_marginal,
    bp_max_product_mpe,
    bp_retracted_marginal,
    bp_run,
)
from .errors import (
    BnetError,
    BPInconsistentError,
    GuardExceeded,
    InstantiationError,
    InvalidOrderError,
    WidthCapExceeded,
)
from .exact import (
    EliminationOrder,
    EliminationResult,
    EliminationTree,
    Mode,
    brute_force_map,
    eliminate,
    elimination_tree,
    exact_map,
    exact_marginal,
    exact_mpe,
    is_valid_map_order,
    min_fill_order,
    probability_of_evidence,
    sum_first_reorder,
)
from .generators import (
    CnfFormula,
    GenConfig,
    emajsat_network,
    maxsat_polytree,
    random_map_problem,
    random_network,
    random_polytree,
)
from .network import (
    Instantiation,
    Network,
    Variable,
    is_polytree,
    joint_probability,
    parse_network,
    read_network,
    serialize_network,
    write_network,
)
from .potential import Potential, max_out, multiply, sum_out
from .search import SearchConfig, hill_climb_restarts, SearchResult, hill_climb, improvement, init_ml, init_mpe, init_random

__all__ = [
    "__version__",
    "BpConfig",
    "BpState",
    "bp_init",
    "bp_log_evidence",
    "bp_marginal",
    "bp_max_product_mpe",
    "bp_retracted_marginal",
    "bp_run",
    "BnetError",
    "BPInconsistentError",
    "GuardExceeded",
    "InstantiationError",
    "InvalidOrderError",
    "WidthCapExceeded",
    "EliminationOrder",
    "EliminationResult",
    "EliminationTree",
    "Mode",
    "brute_force_map",
    "eliminate",
    "elimination_tree",
    "exact_map",
    "exact_marginal",
    "exact_mpe",
    "is_valid_map_order",
    "min_fill_order",
    "probability_of_evidence",
    "sum_first_reorder",
    "CnfFormula",
    "GenConfig",
    "emajsat_network",
    "maxsat_polytree",
    "random_map_problem",
    "random_network",
    "random_polytree",
    "Instantiation",
    "Network",
    "Variable",
    "is_polytree",
    "joint_probability",
    "parse_network",
    "read_network",
    "serialize_network",
    "write_network",
    "Potential",
    "max_out",
    "multiply",
    "sum_out",
    "SearchConfig",
    "SearchResult",
    "hill_climb",
    "hill_climb_restarts",
    "improvement",
    "init_ml",
    "init_mpe",
    "init_random",
]
