import os
from dotenv import load_dotenv

load_dotenv()  # Load environment variables from .env file


def _default_threads():
    return min(os.cpu_count() or 1, 8)


# --- Execution ---
ES_THREADS = int(os.getenv("ES_THREADS", _default_threads()))
CHUNK_SIZE = int(os.getenv("ES_CHUNK_SIZE", 4096))
DEFAULT_SEED = int(os.getenv("ES_SEED", 20240607))

# --- Output & Logging ---
OUTPUT_DIR = os.getenv("ES_OUTPUT_DIR", "results")
LOG_FILE = os.getenv("ES_LOG_FILE", "es_sim.log")
LOG_LEVEL = os.getenv("ES_LOG_LEVEL", "INFO")

# Ensemble sizes
DESK_N_TRAJ = int(os.getenv("ES_DESK_N_TRAJ", 20000))
FULL_SCALE_N_TRAJ = 200000

# App Settings
CONFIG_VERSION = 1
CSV_FLOAT_FORMAT = "%.17g"
CSV_COLUMNS = [
    "k", "mean_x", "sigma_x", "mean_y", "sigma_y"
]
Y0_LOW, Y0_HIGH = -5.0, 10.0
