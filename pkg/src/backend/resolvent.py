"""
Resolvent of H_phi away from its spectrum.

For |E| > 3 the series u = -E^-1 sum_l (H/E)^l f converges geometrically on any
truncated region, since the open-boundary hopping matrix has norm at most 3. All
solves here run that series on the lattice side with the sparse hopping matrix.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from src.backend.errors import (
    DecayFitError,
    InvalidRegionError,
    IterationCapError,
    OutsideConvergenceRegionError,
    RegionTooSmallError,
)
from src.backend.hamiltonian import Flux, LatticeState, hopping_matrix, truncation_estimate
from src.backend.lattice import Region, Site, is_adjacent
from src.config import settings

logger = logging.getLogger(__name__)

DECAY_FLOOR = 1e-14
MIN_SHELLS = 3


def _check_energy(energy: float) -> None:
    if abs(energy) <= 3.0:
        raise OutsideConvergenceRegionError(
            f"energy {energy} is outside the convergence region |E| > 3"
        )


@dataclass
class NeumannSolution:
    """Result of a Neumann-series solve of (H - E) u = f."""
    state: LatticeState
    iterations: int
    max_term_ratio: float  # largest observed ||term_{l+1}|| / ||term_l||


def neumann_solve(
    flux: Flux,
    energy: float,
    f: LatticeState,
    tol: Optional[float] = None,
    max_terms: Optional[int] = None,
) -> NeumannSolution:
    """
    Solve (H_phi - E) u = f on the region of `f` by the Neumann series.

    The series stops at the first term whose norm drops below tol * ||u||. The
    residual equals the first omitted term, so it is bounded by the geometric tail.

    Args:
        flux: Magnetic flux per face
        energy: Real energy with |E| > 3
        f: Forcing, supported on the region the solve runs on
        tol: Relative term threshold (defaults to settings.neumann_tol)
        max_terms: Iteration cap (defaults to settings.neumann_max_terms)

    Returns:
        NeumannSolution: the response u, the number of terms summed and the
        largest term ratio observed

    Raises:
        OutsideConvergenceRegionError: If |E| <= 3
        IterationCapError: If the tolerance is not reached within the cap
    """
    _check_energy(energy)
    tol = settings.neumann_tol if tol is None else tol
    max_terms = settings.neumann_max_terms if max_terms is None else max_terms

    if f.norm() == 0.0:
        return NeumannSolution(LatticeState.zeros(f.region), 0, 0.0)

    h = hopping_matrix(flux, f.region)
    term = f.amplitudes.copy()
    total = term.copy()
    previous = np.linalg.norm(term)
    max_ratio = 0.0
    for iteration in range(1, max_terms + 1):
        term = h.dot(term) / energy
        current = np.linalg.norm(term)
        max_ratio = max(max_ratio, current / previous)
        total += term
        if current < tol * np.linalg.norm(total):
            break
        previous = current
    else:
        raise IterationCapError(
            f"Neumann series at E={energy} did not reach tol={tol} in {max_terms} terms"
        )

    logger.debug(f"Neumann solve at E={energy} converged after {iteration} terms")
    return NeumannSolution(LatticeState(f.region, -total / energy), iteration, max_ratio)


class ResolventMoments:
    """
    Coefficients nu_l[x, y] = <delta_x, (H/3)^l delta_y> for x, y in {v, w}.

    The 2x2 Green block at any |E| > 3 is G(E) = -E^-1 sum_l nu_l (3/E)^l, so a
    single table serves every energy at fixed flux. The table is extended lazily.
    """

    def __init__(self, flux: Flux, region: Region, v: Site, w: Site) -> None:
        index = [region.lookup(v), region.lookup(w)]
        if None in index:
            raise InvalidRegionError(f"{v} and {w} must both lie in {region.describe()}")
        self.flux = flux
        self.region = region
        self.sites = (v, w)
        self._index = np.asarray(index)
        self._h = hopping_matrix(flux, region) / 3.0
        self._vectors = np.zeros((len(region), 2), dtype=complex)
        self._vectors[self._index, [0, 1]] = 1.0
        self._moments: List[np.ndarray] = []

    def __len__(self) -> int:
        return len(self._moments)

    def _extend(self, count: int) -> None:
        while len(self._moments) < count:
            self._moments.append(self._vectors[self._index, :].copy())
            self._vectors = self._h.dot(self._vectors)

    @staticmethod
    def terms_needed(energy: float, tol: float) -> int:
        """First L with (3/|E|)^L <= tol (1 - 3/|E|)."""
        t = 3.0 / abs(energy)
        return max(1, int(math.ceil(math.log(tol * (1.0 - t)) / math.log(t))))

    def green(self, energy: float, tol: Optional[float] = None) -> np.ndarray:
        """2x2 Green block at real energy |E| > 3."""
        _check_energy(energy)
        tol = settings.neumann_tol if tol is None else tol
        count = self.terms_needed(energy, tol)
        self._extend(count)
        powers = (3.0 / energy) ** np.arange(count)
        return -np.tensordot(powers, np.stack(self._moments[:count]), axes=1) / energy


@dataclass
class GreenBlock:
    """2x2 restriction of (H_phi - E)^-1 to the defect sites (v, w)."""
    sites: Tuple[Site, Site]
    energy: float
    entries: np.ndarray

    def hermiticity_defect(self) -> float:
        return float(np.abs(self.entries - self.entries.conj().T).max())


def check_region(energy: float, region: Region, center: Site, tol: Optional[float] = None) -> float:
    """
    Truncation estimate r^-d for a resolvent computed on `region` around `center`.

    Raises:
        RegionTooSmallError: If the estimate exceeds the tolerance
    """
    tol = settings.truncation_tol if tol is None else tol
    estimate = truncation_estimate(energy, region, center)
    if estimate > tol:
        raise RegionTooSmallError(
            f"{region.describe()} is too small at E={energy}: truncation estimate "
            f"{estimate:.3e} exceeds {tol:.1e}"
        )
    return estimate


def green_block(
    flux: Flux, energy: float, v: Site, w: Site, region: Region, strict: bool = True
) -> GreenBlock:
    """
    Green block at the adjacent pair (v, w).

    Columns are the Neumann responses to unit forcings at v and at w, restricted
    to {v, w}. With strict=False an oversized truncation estimate is logged as a
    warning instead of raised.

    Raises:
        OutsideConvergenceRegionError: If |E| <= 3
        InvalidRegionError: If v and w are not adjacent
        RegionTooSmallError: If the region's truncation estimate is too large
    """
    _check_energy(energy)
    if not is_adjacent(v, w):
        raise InvalidRegionError(f"defect sites {v} and {w} are not adjacent")
    try:
        check_region(energy, region, v)
    except RegionTooSmallError as e:
        if strict:
            raise
        logger.warning(str(e))

    entries = np.empty((2, 2), dtype=complex)
    for col, source in enumerate((v, w)):
        u = neumann_solve(flux, energy, LatticeState.delta(region, source)).state
        entries[:, col] = [u.at(v), u.at(w)]
    return GreenBlock((v, w), energy, entries)


@dataclass
class DecayFit:
    """Log-linear fit log max|u| = log C - gamma d over hop-distance shells."""
    gamma: float
    prefactor: float
    residual: float
    shells: int


def decay_fit(u: LatticeState, center: Site) -> DecayFit:
    """
    Fit the exponential decay of a state away from `center`.

    Each hop-distance shell contributes its largest amplitude; shells at or below
    the 1e-14 floor are ignored.

    Raises:
        DecayFitError: If fewer than three shells carry usable amplitude
    """
    dist = u.region.hop_distances(center)
    amplitudes = np.abs(u.amplitudes)
    reachable = dist >= 0
    shell_max = np.zeros(int(dist.max()) + 1)
    np.maximum.at(shell_max, dist[reachable], amplitudes[reachable])

    d = np.flatnonzero(shell_max > DECAY_FLOOR)
    if d.size < MIN_SHELLS:
        raise DecayFitError(
            f"only {d.size} hop shells exceed the amplitude floor {DECAY_FLOOR}; need {MIN_SHELLS}"
        )
    y = np.log(shell_max[d])
    slope, intercept = np.polyfit(d.astype(float), y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * d + intercept)) ** 2)))
    return DecayFit(gamma=float(-slope), prefactor=float(np.exp(intercept)), residual=residual, shells=int(d.size))


def gamma_bound(energy: float) -> float:
    """0.9 ln((|E| - 1) / 2), the accepted floor for fitted decay rates."""
    return 0.9 * math.log((abs(energy) - 1.0) / 2.0)
