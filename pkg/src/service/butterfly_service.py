"""
Service layer for band-structure sweeps.
Handles the butterfly and single-flux band pipelines between the CLI and the
spectral backend.
"""
import logging
from typing import List, Optional

from src.backend.hamiltonian import Flux
from src.backend.spectral import BandData, band_structure, butterfly
from src.infra.telemetry import get_tracer
from src.service.render import RenderStyle, render_svg

logger = logging.getLogger(__name__)
tracer = get_tracer(__name__)


class ButterflyService:
    """Service for Hofstadter butterfly and Bloch band computations."""

    def compute(self, qmax: int, kgrid: int) -> List[BandData]:
        """
        Band intervals for every Farey flux with q <= qmax.

        Args:
            qmax: Largest denominator
            kgrid: k-points per direction

        Returns:
            List[BandData]: one entry per flux, ascending in p/q
        """
        with tracer.start_as_current_span("butterfly") as span:
            span.set_attribute("qmax", qmax)
            span.set_attribute("kgrid", kgrid)
            try:
                return butterfly(qmax, kgrid, kgrid)
            except Exception as e:
                logger.error(f"Failed to compute butterfly: {e}")
                raise

    def bands(self, flux: Flux, kgrid: int) -> BandData:
        """Bloch bands of a single rational flux."""
        logger.info(f"Computing bands at flux {flux} on a {kgrid}x{kgrid} grid")
        with tracer.start_as_current_span("bands"):
            try:
                return band_structure(flux, kgrid, kgrid)
            except Exception as e:
                logger.error(f"Failed to compute bands at {flux}: {e}")
                raise

    def render(self, data: List[BandData], title: Optional[str] = None) -> str:
        return render_svg(data, style=RenderStyle(title=title))
