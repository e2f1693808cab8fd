"""
Configuration module for the shifted-pruning polar codec
"""
import os
from dotenv import load_dotenv

load_dotenv()

# Malformed environment values, reported by the CLI as configuration errors
ENV_PROBLEMS = []


def env_int(name: str, default: int) -> int:
    """Integer setting from the environment; a bad value falls back to the default and is recorded"""
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        return int(raw)
    except ValueError:
        ENV_PROBLEMS.append(f"{name}={raw!r} is not an integer")
        return default


# Worker pool
DEFAULT_WORKERS = env_int("POLAR_WORKERS", 1)

# Paths
REPORTS_DIR = os.getenv("POLAR_REPORTS_DIR", "reports")

# Reproducibility
DEFAULT_SEED = env_int("POLAR_SEED", 0)

# CRC generator polynomials, most-significant coefficient first
CRC16_POLY = (1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 1)  # x^16 + x^15 + x^2 + 1
CRC8_POLY = (1, 1, 1, 0, 1, 0, 1, 0, 1)  # x^8 + x^7 + x^6 + x^4 + x^2 + 1

# Code construction settings
CONSTRUCTION = {
    "phi_breakpoint": 10.0,   # switch to the asymptotic phi branch here
    "bisection_rtol": 1e-9,
    "bisection_xtol": 1e-12,
}

# Decoder settings
DECODER = {
    "llr_mode": "minsum",      # "minsum" or "exact"
    "noiseless_llr": 1e3,      # magnitude of channel LLRs under the noiseless override
}

# Monte Carlo campaign settings
CAMPAIGN = {
    "min_errors": env_int("POLAR_MIN_ERRORS", 300),
    "max_trials": env_int("POLAR_MAX_TRIALS", 1000000),
    "batch_size": 256,          # trials per dispatched batch
}

SCHEMES = ("plain", "sp", "sp_constrained", "sp_segmented")
