"""
Service layer for defect-energy continuation.
Builds the channel-1 defect at the start of the flux interval, tracks E_phi and
overlays it on the butterflies of both hybrid channels.
"""
import logging

import numpy as np

from src.backend.bilayer import hybridize
from src.backend.curve import Fig5Report, curve_to_fig5
from src.backend.defect import build_defect, response
from src.backend.hamiltonian import Flux
from src.backend.lattice import Region
from src.infra.telemetry import get_tracer
from src.service.defect_service import DEFECT_SITES
from src.service.render import RenderStyle, render_svg

logger = logging.getLogger(__name__)
tracer = get_tracer(__name__)


class CurveService:
    """Service for tracking E_phi and comparing it with the band continuum."""

    def track(
        self,
        K: np.ndarray,
        M: np.ndarray,
        energy: float,
        phi_start: float,
        phi_end: float,
        steps: int,
        radius: int,
        qmax: int,
        kgrid: int,
        margin: float = 0.1,
        fatten: float = 0.0,
    ) -> Fig5Report:
        """
        Track the embedded eigenvalue seeded at (phi_start, energy).

        The defect V = W / mu_1 is built so that `energy` is an exact eigenvalue at
        phi_start; it is then held fixed along the flux interval.

        Returns:
            Fig5Report: curve samples with embedding flags and the band data used
        """
        v, w = DEFECT_SITES
        region = Region.ball(v, radius)
        pair = hybridize(K, M)
        kappa1, mu1, _ = pair.channel(1)
        with tracer.start_as_current_span("curve") as span:
            span.set_attribute("steps", steps)
            try:
                u = response(Flux.real(phi_start), energy - kappa1, v, region)
                spec = build_defect(u, v, w).scaled(1.0 / mu1)
                return curve_to_fig5(
                    K, M, spec, phi_start, phi_end, steps, energy, region,
                    qmax=qmax, m1=kgrid, m2=kgrid, fatten=fatten, margin=margin,
                )
            except Exception as e:
                logger.error(f"Failed to track the defect energy curve: {e}")
                raise

    def render(self, report: Fig5Report) -> str:
        """Two shifted butterflies with the curve on top."""
        return render_svg(report.bands, report.curve, RenderStyle(shifts=report.kappa))
