"""
Plain-text run configuration.
Config files hold one ``key = value`` pair per line; ``#`` starts a comment. Keys are
validated by a Pydantic model that rejects unknown names, so a typo fails loudly
instead of silently falling back to a default.
"""
import math
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.backend.bilayer import DEFAULT_K, DEFAULT_M
from src.backend.hamiltonian import Flux

HERMITIAN_TOL = 1e-12

Matrix8 = Tuple[float, float, float, float, float, float, float, float]


def _flatten(matrix: np.ndarray) -> Matrix8:
    return tuple(float(x) for z in np.asarray(matrix).ravel() for x in (z.real, z.imag))


def matrix_from_reals(values: Matrix8) -> np.ndarray:
    """2x2 complex matrix from 8 reals (re, im per entry, row-major)."""
    v = np.asarray(values, dtype=float)
    return (v[0::2] + 1j * v[1::2]).reshape(2, 2)


def parse_pairs(text: str) -> Dict[str, str]:
    """
    Split config text into a key/value map.

    Raises:
        ValueError: On a non-empty line without ``=`` or a repeated key
    """
    pairs: Dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {number}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in pairs:
            raise ValueError(f"line {number}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


class RunConfig(BaseModel):
    """
    Parameters shared by all subcommands.
    Each subcommand reads the keys it needs; flags given on the command line
    override values from the file.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    # Flux and spectra
    flux: str = Field("1/3", description="Flux per face: p/q or radians (bands need p/q)")
    qmax: int = Field(10, ge=1, description="Largest denominator of the butterfly")
    kgrid: int = Field(24, ge=4, description="k-points per direction")

    # Defect construction
    E0: float = Field(3.5, description="Target eigenvalue")
    radius: int = Field(40, ge=1, description="Hop radius of the Ball region around the defect")
    single_site: bool = Field(False, description="Use the one-vertex defect")

    # Continuation
    phi_start: float = Field(0.0, description="Start of the tracked flux interval (radians)")
    phi_end: float = Field(2.0 * math.pi, description="End of the tracked flux interval (radians)")
    steps: int = Field(200, ge=1, description="Uniform flux steps")

    # Tolerances
    margin: float = Field(0.1, gt=0, description="Distance kept from the channel-1 band")
    fatten: float = Field(1e-9, gt=0, description="Band fattening for embedding flags")
    residual_tol: float = Field(1e-8, gt=0, description="Accepted bound-state residual")

    # Bilayer
    K: Matrix8 = Field(_flatten(DEFAULT_K), description="Interlayer coupling, 8 reals")
    M: Matrix8 = Field(_flatten(DEFAULT_M), description="Defect profile across layers, 8 reals")

    # Outputs
    out: Optional[str] = Field(None, description="CSV output path")
    svg: Optional[str] = Field(None, description="SVG output path")
    dump: Optional[str] = Field(None, description="Triplet dump of H + V")

    @field_validator("flux")
    @classmethod
    def _valid_flux(cls, v: str) -> str:
        Flux.parse(v)
        return v.strip()

    @field_validator("K", "M", mode="before")
    @classmethod
    def _split_reals(cls, v: Any) -> Any:
        if isinstance(v, str):
            return tuple(float(x) for x in v.replace(",", " ").split())
        return v

    @field_validator("K", "M")
    @classmethod
    def _hermitian(cls, v: Matrix8) -> Matrix8:
        m = matrix_from_reals(v)
        if np.abs(m - m.conj().T).max() > HERMITIAN_TOL:
            raise ValueError("matrix is not Hermitian")
        return v

    @property
    def flux_value(self) -> Flux:
        return Flux.parse(self.flux)

    @property
    def k_matrix(self) -> np.ndarray:
        return matrix_from_reals(self.K)

    @property
    def m_matrix(self) -> np.ndarray:
        return matrix_from_reals(self.M)

    @classmethod
    def parse_text(cls, text: str, overrides: Optional[Dict[str, Any]] = None) -> "RunConfig":
        data: Dict[str, Any] = dict(parse_pairs(text))
        data.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.model_validate(data)

    @classmethod
    def read(cls, path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> "RunConfig":
        return cls.parse_text(Path(path).read_text(encoding="utf-8"), overrides)

    def to_text(self) -> str:
        """Serialize so that parse_text(to_text()) reproduces this config."""
        lines = []
        for name, value in self.model_dump().items():
            if value is None:
                continue
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, float):
                text = repr(value)
            elif isinstance(value, tuple):
                text = " ".join(repr(float(x)) for x in value)
            else:
                text = str(value)
            lines.append(f"{name} = {text}")
        return "\n".join(lines) + "\n"
