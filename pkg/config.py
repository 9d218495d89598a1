import os

from dotenv import load_dotenv

# Settings come from the environment, optionally seeded by a .env file in the project folder
BASE_DIR = os.path.dirname(os.path.abspath(__file__))
load_dotenv(os.path.join(BASE_DIR, ".env"))


def _flag(name, default):
    return os.getenv(name, default).strip().lower() in ("1", "true", "yes", "on")


# ---------------- GRID POLICY DEFAULTS ----------------
THETA_POINTS = int(os.getenv("HF_THETA_POINTS", "2000"))
NUISANCE_POINTS = int(os.getenv("HF_NUISANCE_POINTS", "1001"))
BISECTION_TOL = float(os.getenv("HF_BISECTION_TOL", "1e-6"))
POLISH = _flag("HF_POLISH", "false")
TIE_TOL = float(os.getenv("HF_TIE_TOL", "1e-10"))
THETA_SIDE_POINTS = int(os.getenv("HF_THETA_SIDE_POINTS", "101"))
# golden-section steps inside the best grid cell, for nuisance sups and the constrained MLE
GOLDEN_ITERATIONS = int(os.getenv("HF_GOLDEN_ITERATIONS", "48"))

# ---------------- REFINEMENT ----------------
MAX_K = int(os.getenv("HF_MAX_K", "50"))
TIL_RATIO_TOL = 1e-7
# limits must be resolved well below the TIL ratio tolerance while iterating M
FIXED_POINT_BISECTION_TOL = float(os.getenv("HF_FIXED_POINT_TOL", "1e-10"))
REPORT_DECIMALS = 4

# ---------------- COVERAGE GRIDS ----------------
ICP_GRID_STEP = float(os.getenv("HF_ICP_GRID_STEP", "0.005"))
MPAIR_ICP_STEP = float(os.getenv("HF_MPAIR_ICP_STEP", "0.01"))

# ---------------- RUNTIME ----------------
THREADS = int(os.getenv("HF_THREADS", "1"))
LOG_LEVEL = os.getenv("HF_LOG_LEVEL", "WARNING").upper()

FIXTURE_DIR = os.path.join(BASE_DIR, "tests", "fixtures")
