"""
Configuration file for the measure mining project.
"""

import logging
import sys

# Interval enumeration
ENUM_LIMIT = 10_000
DEFAULT_SEED = 42

# Exhaustive oracles enumerate all 2^N sets; spaces beyond this are sampled
VERIFY_ATOM_LIMIT = 12
SPACE_ATOM_LIMIT = 16

# Bound calculus
BOUND_EVAL_LIMIT = 2**64
FGH_CONSTANT = 5

# Search budgets for the sequential regularity claims and functional iteration
CLAIM_DEPTH_LIMIT = 24
CLAIM_BUDGET = 250_000
ITERATE_LIMIT = 200_000

# Output
RESULTS_DIR = "experiment_results"
LOG_FILE = "measure_mining.log"
LOG_EVERY = 10

# Scenario experiment kinds accepted by the runner
EXPERIMENT_KINDS = {
    "regularity": "Energy-increment regularity on a single measure",
    "regularity_seq": "Sequential regularity on a measure sequence",
    "regularity_interval": "Interval regularity on a measure sequence",
    "regularity_double": "Interval regularity on a pair of measure sequences",
    "metastable": "Metastable weak convergence and bulk stabilisation",
    "vhs": "Quantitative Vitali-Hahn-Saks",
    "np_msuc": "n/p-metastable uniform continuity on a product grid",
    "control_interval": "Exchange chain stages 0-3",
    "exchange": "Exchange of limits endpoint",
    "simple_swap": "Swap of the order of limits",
}

# The functional closures of the exchange chain nest deeply
RECURSION_LIMIT = 20_000
if sys.getrecursionlimit() < RECURSION_LIMIT:
    sys.setrecursionlimit(RECURSION_LIMIT)

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(levelname)s - %(message)s",
    handlers=[logging.FileHandler(LOG_FILE), logging.StreamHandler()],
)
logger = logging.getLogger(__name__)
