import os
from pathlib import Path

_PACKAGE_DIR = Path(__file__).resolve().parent.parent
REFERENCES_DIR = _PACKAGE_DIR / "references"
DATA_DIR = Path(os.environ.get("BLOCKSKETCH_DATA_DIR", Path.home() / ".blocksketch" / "data"))
CACHE_DIR = DATA_DIR / "cache"

SPEC_VERSION = "1.0"

TIMEZONE = os.environ.get("BLOCKSKETCH_TZ", "UTC")


def _threads_from_env() -> int:
    raw = os.environ.get("BLOCKSKETCH_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# Estimation
DEFAULT_GAMMA = 1.0
DEFAULT_BETA = 0.05
MIN_ALPHA = 0.01  # below this gamma^a |t|^a conditioning degrades

# Simulation harness
DEFAULT_N = 1000
DEFAULT_REPLICATIONS = 500

# Projection rows are drawn this many at a time, never the full m x 2N matrix.
SKETCH_CHUNK_ROWS = 256

# Recovery
RECOVERY_MAX_ITERATIONS = 50
RECOVERY_RESIDUAL_TOLERANCE = 1e-6
# proxy-seeded restarts tried when a run ends above the residual tolerance
RECOVERY_RESTARTS = 8
LS_MAX_ITERATIONS = 200
LS_TOLERANCE = 1e-10
# MRE values closer than this count as tied; the smaller input sparsity wins
MRE_TIE_TOLERANCE = 1e-6

# CMS angles stay this far from the poles of tan/cos
CMS_ANGLE_GUARD = 1e-10


class Config:
    """Central access point for all configuration."""

    package_dir = _PACKAGE_DIR
    references_dir = REFERENCES_DIR
    data_dir = DATA_DIR
    cache_dir = CACHE_DIR

    spec_version = SPEC_VERSION
    timezone = TIMEZONE

    default_gamma = DEFAULT_GAMMA
    default_beta = DEFAULT_BETA
    min_alpha = MIN_ALPHA

    default_n = DEFAULT_N
    default_replications = DEFAULT_REPLICATIONS
    sketch_chunk_rows = SKETCH_CHUNK_ROWS

    recovery_max_iterations = RECOVERY_MAX_ITERATIONS
    recovery_residual_tolerance = RECOVERY_RESIDUAL_TOLERANCE
    recovery_restarts = RECOVERY_RESTARTS
    ls_max_iterations = LS_MAX_ITERATIONS
    ls_tolerance = LS_TOLERANCE
    mre_tie_tolerance = MRE_TIE_TOLERANCE

    cms_angle_guard = CMS_ANGLE_GUARD

    @classmethod
    def threads(cls) -> int:
        """Worker cap for replication pools (BLOCKSKETCH_THREADS)."""
        return _threads_from_env()

    @classmethod
    def reload_paths(cls) -> None:
        """Re-read BLOCKSKETCH_DATA_DIR, e.g. after the environment changed."""
        cls.data_dir = Path(
            os.environ.get("BLOCKSKETCH_DATA_DIR", Path.home() / ".blocksketch" / "data")
        )
        cls.cache_dir = cls.data_dir / "cache"

    @classmethod
    def ensure_dirs(cls):
        cls.data_dir.mkdir(parents=True, exist_ok=True)
        cls.cache_dir.mkdir(parents=True, exist_ok=True)
