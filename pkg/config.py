import os
import sys
from typing import List, Optional

from pydantic_settings import BaseSettings
from dotenv import load_dotenv
from loguru import logger

load_dotenv()


def _float_list(raw: str) -> List[float]:
    return [float(item) for item in raw.split(",") if item.strip()]


class Settings(BaseSettings):
    """Configuration settings for rpkit"""

    # Logging
    log_level: str = os.getenv("RPKIT_LOG_LEVEL", "INFO")
    log_file: str = os.getenv("RPKIT_LOG_FILE", "logs/rpkit.log")

    # Numerical tolerances
    tol: float = float(os.getenv("RPKIT_TOL", "1e-9"))
    rank_tol: float = float(os.getenv("RPKIT_RANK_TOL", "1e-10"))
    herm_tol: float = float(os.getenv("RPKIT_HERM_TOL", "1e-10"))
    residual_tol: float = float(os.getenv("RPKIT_RESIDUAL_TOL", "1e-8"))
    cluster_tol: float = float(os.getenv("RPKIT_CLUSTER_TOL", "1e-9"))
    pf_cluster_tol: float = float(os.getenv("RPKIT_PF_CLUSTER_TOL", "1e-8"))
    independence_tol: float = float(os.getenv("RPKIT_INDEPENDENCE_TOL", "1e-9"))
    block_tol: float = float(os.getenv("RPKIT_BLOCK_TOL", "1e-6"))

    # Perron-Frobenius iteration
    pf_tol: float = float(os.getenv("RPKIT_PF_TOL", "1e-12"))
    pf_max_iters: int = int(os.getenv("RPKIT_PF_MAX_ITERS", "10000"))

    # Sample grids, comma separated
    tau_grid: str = os.getenv("RPKIT_TAU_GRID", "0.1,0.5,1.0,2.0")
    modular_times: str = os.getenv("RPKIT_MODULAR_TIMES", "0.3,1.0,2.7")

    # Runs
    seed: int = int(os.getenv("RPKIT_SEED", "20240601"))
    threads: int = int(os.getenv("RPKIT_THREADS", "1"))
    report_dir: str = os.getenv("RPKIT_REPORT_DIR", "reports")

    # Desk-scale guards
    max_qubits: int = int(os.getenv("RPKIT_MAX_QUBITS", "14"))
    choi_dim_limit: int = int(os.getenv("RPKIT_CHOI_DIM_LIMIT", "1024"))
    gram_full_limit: int = int(os.getenv("RPKIT_GRAM_FULL_LIMIT", "4096"))
    path_count_limit: int = int(os.getenv("RPKIT_PATH_COUNT_LIMIT", "12"))

    class Config:
        env_file = ".env"
        env_prefix = "RPKIT_"
        case_sensitive = False
        extra = "ignore"

    @property
    def taus(self) -> List[float]:
        return _float_list(self.tau_grid)

    @property
    def modular_grid(self) -> List[float]:
        return _float_list(self.modular_times)


settings = Settings()


def setup_logging(level: Optional[str] = None) -> None:
    """Install the stderr and rotating file sinks"""
    level = level or settings.log_level
    logger.remove()
    logger.add(sys.stderr, level=level)
    logger.add(
        settings.log_file,
        level="DEBUG",
        rotation="10 MB",
        compression="zip"
    )


def validate_config() -> bool:
    """Validate configuration settings"""
    tolerances = {
        "tol": settings.tol,
        "rank_tol": settings.rank_tol,
        "herm_tol": settings.herm_tol,
        "residual_tol": settings.residual_tol,
        "cluster_tol": settings.cluster_tol,
        "pf_cluster_tol": settings.pf_cluster_tol,
        "pf_tol": settings.pf_tol,
    }
    for name, value in tolerances.items():
        if value <= 0:
            logger.error(f"Tolerance {name} must be positive, got {value}")
            return False

    if not settings.taus:
        logger.error("RPKIT_TAU_GRID is empty")
        return False

    if settings.threads < 1:
        logger.error(f"RPKIT_THREADS must be at least 1, got {settings.threads}")
        return False

    if settings.pf_max_iters < 1:
        logger.error("RPKIT_PF_MAX_ITERS must be at least 1")
        return False

    return True


setup_logging()
logger.debug(f"rpkit settings loaded: {settings.model_dump()}")

# Export settings
__all__ = ["settings", "setup_logging", "validate_config"]
