"""
Service layer for defect eigenstates.
Runs the single-layer defect construction and its bilayer embedding, and turns
the results into JSON-ready reports.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from pydantic import BaseModel

from src.backend.bilayer import EmbeddedState, embedded_state, embedding_check
from src.backend.defect import (
    BoundState,
    DefectSpec,
    bound_state,
    build_defect,
    build_single_site_defect,
    response,
    rotation_deviation,
    secular,
)
from src.backend.hamiltonian import Flux, HermitianOperator, hopping_matrix
from src.backend.lattice import ORIGIN, Region, site_b
from src.backend.resolvent import gamma_bound
from src.backend.spectral import nearest_rational
from src.infra.telemetry import get_tracer

logger = logging.getLogger(__name__)
tracer = get_tracer(__name__)

DEFECT_SITES = (ORIGIN, site_b(0, 0))


class DefectReport(BaseModel):
    """Summary of a single-layer defect eigenstate."""
    flux: str
    energy: float
    region: str
    sites: int
    defect_sites: List[str]
    vtilde_re: List[List[float]]
    vtilde_im: List[List[float]]
    secular: float
    state_residual: float
    gamma: float
    gamma_bound: float
    rotation_deviation: float
    passed: bool


class ChannelReport(BaseModel):
    channel: int
    kappa: float
    shifted_energy: float
    inside: bool
    edge_distance: float


class EmbeddedReport(BaseModel):
    """Summary of a bilayer embedded eigenstate and its position against the bands."""
    flux: str
    energy: float
    region: str
    kappa: List[float]
    mu: List[float]
    state_residual: float
    gamma: float
    gamma_bound: float
    nearest_rational: str
    channels: List[ChannelReport]
    embedded: bool
    passed: bool


@dataclass
class DefectOutcome:
    spec: DefectSpec
    bound: BoundState
    report: DefectReport


@dataclass
class EmbeddedOutcome:
    result: EmbeddedState
    report: EmbeddedReport


def defect_operator(flux: Flux, region: Region, spec: DefectSpec) -> HermitianOperator:
    """Sparse H_phi + V on a region, for triplet dumps."""
    h = hopping_matrix(flux, region).tolil()
    index = [region.lookup(spec.v), region.lookup(spec.w)]
    for a, i in enumerate(index):
        for b, j in enumerate(index):
            h[i, j] = h[i, j] + spec.vtilde[a, b]
    h = h.tocsr()
    return HermitianOperator.matrix_free(h.dot, len(region), sites=region.sites, sparse=h)


class DefectService:
    """Service for building and certifying defect eigenstates."""

    def __init__(self, residual_tol: float = 1e-8) -> None:
        self.residual_tol = residual_tol

    def single_layer(self, flux: Flux, energy: float, radius: int, single_site: bool = False) -> DefectOutcome:
        """
        Build the defect that makes `energy` an eigenvalue of H_phi + V and reconstruct its state.

        Args:
            flux: Magnetic flux per face
            energy: Target eigenvalue, |E| > 3
            radius: Hop radius of the Ball region around the defect
            single_site: Build the one-vertex defect instead of the two-site one

        Returns:
            DefectOutcome: defect, bound state and report
        """
        v, w = DEFECT_SITES
        region = Region.ball(v, radius)
        logger.info(f"Building defect at flux {flux}, E={energy} on {region.describe()}")
        with tracer.start_as_current_span("defect") as span:
            span.set_attribute("energy", energy)
            try:
                u = response(flux, energy, v, region)
                build = build_single_site_defect if single_site else build_defect
                spec = build(u, v, w)
                value = secular(flux, energy, spec, region)
                bound = bound_state(flux, spec, energy, region)
            except Exception as e:
                logger.error(f"Failed to build defect state: {e}")
                raise

        report = DefectReport(
            flux=str(flux),
            energy=energy,
            region=region.describe(),
            sites=len(region),
            defect_sites=[str(v), str(w)],
            vtilde_re=spec.vtilde.real.tolist(),
            vtilde_im=spec.vtilde.imag.tolist(),
            secular=value,
            state_residual=bound.residual,
            gamma=bound.decay.gamma,
            gamma_bound=gamma_bound(energy),
            rotation_deviation=rotation_deviation(bound.state, v),
            passed=bound.residual <= self.residual_tol and bound.decay.gamma >= gamma_bound(energy),
        )
        logger.info(f"Defect state residual {bound.residual:.3e}, gamma {bound.decay.gamma:.4f}")
        return DefectOutcome(spec, bound, report)

    def embedded(
        self,
        K: np.ndarray,
        M: np.ndarray,
        flux: Flux,
        energy: float,
        radius: int,
        qmax: int,
        kgrid: int,
        margin: float = 0.1,
        fatten: float = 0.0,
        rational: Optional[Flux] = None,
    ) -> EmbeddedOutcome:
        """
        Build the bilayer embedded eigenstate and locate E0 against both channels' bands.

        Band membership is checked at `rational`, or at the Farey flux nearest to
        `flux` when none is given.
        """
        v, w = DEFECT_SITES
        region = Region.ball(v, radius)
        rational = rational or (flux if flux.is_rational else nearest_rational(flux.alpha, qmax))
        with tracer.start_as_current_span("embedded") as span:
            span.set_attribute("energy", energy)
            try:
                result = embedded_state(K, M, flux, energy, v, w, region, margin)
                check = embedding_check(energy, rational, K, kgrid, kgrid, fatten)
            except Exception as e:
                logger.error(f"Failed to build embedded state: {e}")
                raise

        kappa1 = float(result.pair.kappa[0])
        bound = gamma_bound(energy - kappa1)
        report = EmbeddedReport(
            flux=str(flux),
            energy=energy,
            region=region.describe(),
            kappa=result.pair.kappa.tolist(),
            mu=result.pair.mu.tolist(),
            state_residual=result.residual,
            gamma=result.decay.gamma,
            gamma_bound=bound,
            nearest_rational=str(rational),
            channels=[ChannelReport(**vars(c)) for c in check.channels],
            embedded=check.embedded,
            passed=result.residual <= self.residual_tol and result.decay.gamma >= bound,
        )
        logger.info(f"Embedded state residual {result.residual:.3e}; embedded={check.embedded}")
        return EmbeddedOutcome(result, report)
