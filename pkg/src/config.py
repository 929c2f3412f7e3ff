"""
Configuration settings for the toolkit.
Handles loading environment variables and providing process-wide numerical defaults.
Uses Pydantic for type-safe configuration management.
"""
import os
from enum import Enum
from typing import Optional
from pydantic import BaseModel, ConfigDict, Field


class EigenSolver(str, Enum):
    """Enum for the dense Hermitian eigensolver backends."""
    AUTO = "auto"        # Jacobi up to jacobi_max_dimension, LAPACK above
    JACOBI = "jacobi"    # In-house cyclic Jacobi for every size
    LAPACK = "lapack"    # scipy.linalg.eigh for every size


class Settings(BaseModel):
    """
    Process-wide settings loaded from environment variables.
    All settings are validated through Pydantic's type system.
    """
    model_config = ConfigDict(frozen=True)

    # Parallel sweeps
    threads: int = Field(
        0, ge=0,
        description="Worker cap for butterfly and band sweeps (0 = one per CPU)"
    )

    # Eigensolver selection
    eigensolver: EigenSolver = Field(
        EigenSolver.AUTO,
        description="Dense Hermitian eigensolver backend"
    )
    jacobi_max_dimension: int = Field(
        64, ge=1,
        description="Largest matrix handed to the Jacobi solver when eigensolver=auto"
    )

    # Operator assembly and resolvent
    dense_site_cap: int = Field(
        20_000, ge=1,
        description="Largest region (in sites) that may be assembled densely"
    )
    neumann_tol: float = Field(
        1e-12, gt=0,
        description="Relative term-norm threshold that stops the Neumann series"
    )
    neumann_max_terms: int = Field(
        1_000_000, ge=1,
        description="Iteration cap for the Neumann series"
    )
    truncation_tol: float = Field(
        1e-3, gt=0,
        description="Largest accepted r^-d truncation estimate for Green blocks"
    )

    # Logging and telemetry
    log_level: str = Field("INFO", description="Root logging level")
    enable_telemetry: bool = Field(
        False,
        description="Controls whether OpenTelemetry spans are exported"
    )
    otlp_endpoint: Optional[str] = Field(
        None,
        description="OTLP collector endpoint; console export when unset"
    )

    def worker_count(self) -> int:
        """Resolve the configured thread cap (0 means one worker per CPU)."""
        return self.threads or (os.cpu_count() or 1)


# Create settings instance by parsing environment variables
settings = Settings(
    threads=int(os.getenv("MAGNON_THREADS", "0")),
    eigensolver=os.getenv("MAGNON_EIGENSOLVER", EigenSolver.AUTO),
    jacobi_max_dimension=int(os.getenv("MAGNON_JACOBI_MAX_DIM", "64")),
    dense_site_cap=int(os.getenv("MAGNON_DENSE_SITE_CAP", "20000")),
    truncation_tol=float(os.getenv("MAGNON_TRUNCATION_TOL", "1e-3")),
    log_level=os.getenv("LOG_LEVEL", "INFO"),
    enable_telemetry=os.getenv("ENABLE_TELEMETRY", "false").lower() == "true",
    otlp_endpoint=os.getenv("OTEL_EXPORTER_OTLP_ENDPOINT"),
)
