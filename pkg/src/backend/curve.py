"""
Continuation of the defect eigenvalue E_phi as the flux varies.

The defect matrix is held fixed while phi moves along a uniform grid. At each grid
point the energy is the zero of E -> det(I + mu_1 V~ G_phi(E - kappa_1)) closest to
the previous one, bracketed by a sign change in a window around it and refined with
Brent's method. Green blocks come from a resolvent moment table built once per phi.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from src.backend.bilayer import hybridize
from src.backend.defect import DefectSpec, SECULAR_ROOT_TOL, bound_state, secular_value
from src.backend.errors import BandEdgeError, CurveLostError, SampleRejectedError, SecularNotZeroError
from src.backend.hamiltonian import Flux, truncation_estimate
from src.backend.lattice import Region
from src.backend.resolvent import ResolventMoments, gamma_bound
from src.backend.spectral import BandData, butterfly, nearest_rational
from src.config import settings

logger = logging.getLogger(__name__)

DEFAULT_MARGIN = 0.1
WINDOW = 0.2
WINDOW_POINTS = 16
ROOT_XTOL = 1e-12
MAX_HALVINGS = 10
STATE_RESIDUAL_TOL = 1e-8


@dataclass
class CurveSample:
    phi: float
    energy: float
    secular_residual: float
    state_residual: float
    gamma: float
    embedded: Optional[bool] = None


@dataclass
class EnergyCurve:
    """Accepted samples of E_phi on the phi grid, with the data that produced them."""
    spec: DefectSpec
    kappa1: float
    mu1: float
    region: Region
    samples: List[CurveSample] = field(default_factory=list)

    @property
    def phis(self) -> np.ndarray:
        return np.array([s.phi for s in self.samples])

    @property
    def energies(self) -> np.ndarray:
        return np.array([s.energy for s in self.samples])


class _Tracker:
    """Secular evaluation and root bracketing for one defect, channel and region."""

    def __init__(self, spec: DefectSpec, kappa1: float, mu1: float, region: Region, margin: float) -> None:
        self.spec = spec
        self.scaled = spec.scaled(mu1)
        self.kappa1 = kappa1
        self.region = region
        self.margin = margin
        self._moments: Dict[float, ResolventMoments] = {}

    def secular(self, phi: float) -> Callable[[float], float]:
        moments = self._moments.get(phi)
        if moments is None:
            # only the current grid point and its substeps are worth keeping
            self._moments = {}
            moments = ResolventMoments(Flux.real(phi), self.region, self.spec.v, self.spec.w)
            self._moments[phi] = moments
        return lambda energy: secular_value(self.scaled.vtilde, moments.green(energy - self.kappa1))

    def window(self, center: float) -> Tuple[float, float, bool]:
        """Search window around `center`, clipped to stay half a margin off the band."""
        lo, hi = center - WINDOW, center + WINDOW
        edge = 3.0 + 0.5 * self.margin
        clipped = False
        if center >= self.kappa1 and lo < self.kappa1 + edge:
            lo, clipped = self.kappa1 + edge, True
        if center < self.kappa1 and hi > self.kappa1 - edge:
            hi, clipped = self.kappa1 - edge, True
        return lo, hi, clipped

    def root_near(self, phi: float, center: float) -> Tuple[Optional[float], bool]:
        """Root of the secular function at phi closest to `center`, or None without a sign change."""
        f = self.secular(phi)
        lo, hi, clipped = self.window(center)
        grid = np.linspace(lo, hi, WINDOW_POINTS + 1)
        values = [f(e) for e in grid]
        roots = []
        for a, b, fa, fb in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
            if fa == 0.0:
                roots.append(float(a))
            elif fa * fb < 0.0:
                roots.append(brentq(f, a, b, xtol=ROOT_XTOL))
        if values[-1] == 0.0:
            roots.append(float(grid[-1]))
        if not roots:
            return None, clipped
        return min(roots, key=lambda e: abs(e - center)), clipped

    def allowed(self, energy: float) -> bool:
        return abs(energy - self.kappa1) >= 3.0 + self.margin


def track_curve(
    spec: DefectSpec,
    kappa1: float,
    mu1: float,
    phi_a: float,
    phi_b: float,
    steps: int,
    seed: float,
    region: Region,
    margin: float = DEFAULT_MARGIN,
) -> EnergyCurve:
    """
    Track E_phi over the uniform grid phi_a, ..., phi_b (steps + 1 points).

    Each step solves for the root nearest the previous energy; when no sign change is
    found the step is halved, up to ten times. Only grid points are recorded, each
    verified by reconstructing its bound state and checking its residual and decay rate.

    Args:
        spec: Defect on a single layer (applied as mu_1 V~)
        kappa1: Channel-1 energy shift
        mu1: Channel-1 defect weight
        phi_a, phi_b: Flux interval
        steps: Number of grid intervals
        seed: Energy with secular(phi_a, seed - kappa_1) = 0 within 1e-9
        region: Truncation region for every resolvent
        margin: Required distance from the channel-1 band [-3, 3] + kappa_1

    Returns:
        EnergyCurve: one sample per grid point

    Raises:
        SecularNotZeroError: If the seed is not a root
        CurveLostError: If no root is found near the previous energy after halving
        BandEdgeError: If the root comes closer than the margin to the band
        SampleRejectedError: If a bound state misses the 1e-8 residual or its decay-rate floor
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    tracker = _Tracker(spec, kappa1, mu1, region, margin)
    curve = EnergyCurve(spec, kappa1, mu1, region)

    if not tracker.allowed(seed):
        raise BandEdgeError(f"seed {seed} lies within {margin} of the channel-1 band")
    estimate = truncation_estimate(seed - kappa1, region, spec.v)
    if estimate > settings.truncation_tol:
        logger.warning(
            f"{region.describe()} gives truncation estimate {estimate:.3e} at the seed energy"
        )
    seed_value = tracker.secular(phi_a)(seed)
    if abs(seed_value) > SECULAR_ROOT_TOL:
        raise SecularNotZeroError(f"seed {seed} is not a root at phi={phi_a} (secular {seed_value:.3e})")

    phis = np.linspace(phi_a, phi_b, steps + 1)
    logger.info(f"Tracking E_phi over [{phi_a}, {phi_b}] in {steps} steps from E={seed}")

    energy, _ = tracker.root_near(float(phis[0]), seed)
    if energy is None:
        raise CurveLostError(f"no root near the seed {seed}")
    curve.samples.append(_verify(tracker, curve, float(phis[0]), energy))

    for phi_to in phis[1:]:
        energy = _advance(tracker, curve, float(curve.samples[-1].phi), float(phi_to), energy)
        curve.samples.append(_verify(tracker, curve, float(phi_to), energy))

    logger.info(f"Tracked {len(curve.samples)} samples; E range [{curve.energies.min():.12g}, {curve.energies.max():.12g}]")
    return curve


def _advance(tracker: _Tracker, curve: EnergyCurve, phi_from: float, phi_to: float, energy: float) -> float:
    phi, h = phi_from, phi_to - phi_from
    halvings = 0
    while phi != phi_to:
        target = phi_to if abs(phi_to - phi) <= abs(h) else phi + h
        root, clipped = tracker.root_near(target, energy)
        if root is None:
            halvings += 1
            if halvings > MAX_HALVINGS:
                last = curve.samples[-1]
                if clipped:
                    raise BandEdgeError(f"E_phi runs into the channel-1 band near phi={target}", last)
                raise CurveLostError(f"lost the root near E={energy} at phi={target}", last)
            h /= 2.0
            logger.debug(f"No bracket at phi={target}; halving step to {h:.3e}")
            continue
        if not tracker.allowed(root):
            raise BandEdgeError(
                f"E={root} at phi={target} is within {tracker.margin} of the channel-1 band",
                curve.samples[-1],
            )
        phi, energy = target, root
    return energy


def _verify(tracker: _Tracker, curve: EnergyCurve, phi: float, energy: float) -> CurveSample:
    flux = Flux.real(phi)
    residual = abs(tracker.secular(phi)(energy))
    shifted = energy - tracker.kappa1
    bound = bound_state(flux, tracker.scaled, shifted, tracker.region, strict=False)
    last = curve.samples[-1] if curve.samples else None
    if bound.residual > STATE_RESIDUAL_TOL:
        logger.error(f"Bound state at phi={phi} has residual {bound.residual:.3e}")
        raise SampleRejectedError(
            f"bound state at phi={phi}, E={energy} has residual {bound.residual:.3e} > {STATE_RESIDUAL_TOL}", last
        )
    floor = gamma_bound(shifted)
    if bound.decay.gamma < floor:
        logger.error(f"Bound state at phi={phi} decays at {bound.decay.gamma:.4f} < {floor:.4f}")
        raise SampleRejectedError(
            f"bound state at phi={phi}, E={energy} decays at gamma={bound.decay.gamma:.4f} below {floor:.4f}", last
        )
    return CurveSample(phi, energy, residual, bound.residual, bound.decay.gamma)


@dataclass
class Fig5Report:
    """An E_phi curve overlaid on the butterflies of both hybrid channels."""
    curve: EnergyCurve
    kappa: Tuple[float, float]
    mu: Tuple[float, float]
    bands: List[BandData]
    rationals: List[Flux]
    fatten: float
    qmax: int

    @property
    def flags(self) -> List[bool]:
        return [bool(s.embedded) for s in self.curve.samples]

    @property
    def embedded_count(self) -> int:
        return sum(self.flags)


def flag_embedded(
    curve: EnergyCurve, kappa2: float, bands: List[BandData], qmax: int, fatten: float = 0.0
) -> Tuple[List[CurveSample], List[Flux]]:
    """Mark samples whose E - kappa_2 lies in a band at the nearest Farey flux."""
    by_fraction = {(b.flux.p, b.flux.q): b for b in bands}
    samples, rationals = [], []
    for s in curve.samples:
        rational = nearest_rational(s.phi / (2.0 * math.pi), qmax)
        data = by_fraction[(rational.p, rational.q)]
        samples.append(replace(s, embedded=data.contains(s.energy - kappa2, fatten)))
        rationals.append(rational)
    return samples, rationals


def curve_to_fig5(
    K: np.ndarray,
    M: np.ndarray,
    spec: DefectSpec,
    phi_a: float,
    phi_b: float,
    steps: int,
    seed: float,
    region: Region,
    qmax: int = 12,
    m1: int = 16,
    m2: int = 16,
    fatten: float = 0.0,
    margin: float = DEFAULT_MARGIN,
) -> Fig5Report:
    """
    Track E_phi in channel 1 and flag where it enters the continuum of channel 2.

    Band data come from the butterfly at q <= qmax; each sample is compared against
    the Farey flux nearest to phi / 2 pi.
    """
    pair = hybridize(K, M)
    kappa1, mu1, _ = pair.channel(1)
    kappa2, mu2, _ = pair.channel(2)
    curve = track_curve(spec, kappa1, mu1, phi_a, phi_b, steps, seed, region, margin)
    bands = butterfly(qmax, m1, m2)
    curve.samples, rationals = flag_embedded(curve, kappa2, bands, qmax, fatten)
    report = Fig5Report(curve, (kappa1, kappa2), (mu1, mu2), bands, rationals, fatten, qmax)
    logger.info(f"{report.embedded_count} of {len(curve.samples)} curve samples are embedded")
    return report
