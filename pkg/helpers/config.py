import os
import sys

from dotenv import load_dotenv

load_dotenv()

# --- Configuration ---
# Every value can be overridden from the environment or a local .env file.
VERBOSE = os.getenv("IMPULSE_VERBOSE", "0").lower() in ("1", "true", "yes")
BOX_SAMPLES = int(os.getenv("IMPULSE_BOX_SAMPLES", 64))
GRID_N = int(os.getenv("IMPULSE_GRID_N", 200))
TOL = float(os.getenv("IMPULSE_TOL", 1e-10))
MAX_ITER = int(os.getenv("IMPULSE_MAX_ITER", 5000))
QUAD_RTOL = float(os.getenv("IMPULSE_QUAD_RTOL", 1e-10))
NUMERIC_MARGIN = float(os.getenv("IMPULSE_NUMERIC_MARGIN", 1e-9))
SEED = int(os.getenv("IMPULSE_SEED", 0))

# Sample counts for the diagnostic checks
DENSITY_SAMPLES = 1024
KERNEL_SAMPLES = 101
GROWTH_SAMPLES = 2000


def log(message: str) -> None:
    """Progress output. Goes to stderr so stdout only ever carries reports."""
    if VERBOSE:
        print(message, file=sys.stderr)
