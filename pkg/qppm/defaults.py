import os

TOOL_VERSION = "0.1.0"

# Log verbosity of the CLI, one of DEBUG, INFO, WARNING, ERROR.
LOG_LEVEL = str(os.getenv("QPPM_LOG", "WARNING")).upper()

DEFAULT_SEED = int(os.getenv("QPPM_SEED", 13))
DEFAULT_ALPHA = 0.05
DEFAULT_OUTPUT_DIR = "qppm-out"

# Floor for normalization divisors and the SMV shift.
EPSILON = 1e-9

# Largest number of sublists the exhaustive RSD/UEF mode may enumerate.
EXHAUSTIVE_LIMIT = 10**5

# Binary relevance threshold for AP on graded qrels (TREC DL convention).
DEFAULT_REL_THRESHOLD = 2
