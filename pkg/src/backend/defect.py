"""
Localized two-site defects that create an eigenvalue of H_phi + V outside [-3, 3].

The construction takes the response u to a unit source at an A-site v and builds
the Hermitian 2x2 matrix V~ on {v, w} that turns u into an eigenstate. Energies of
H_phi + V off the band are the zeros of det(I + V~ G(E)), with G the 2x2 Green
block at the defect sites.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Tuple

import numpy as np

from src.backend.errors import (
    DefectConstructionError,
    DegenerateDefectError,
    SecularImaginaryError,
    SecularNotZeroError,
)
from src.backend.hamiltonian import Flux, LatticeState, apply_H
from src.backend.lattice import Region, Site, Sublattice, is_adjacent, neighbors
from src.backend.resolvent import (
    DecayFit,
    ResolventMoments,
    decay_fit,
    green_block,
    neumann_solve,
)

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
IMAG_TOL = 1e-8
SECULAR_IMAG_TOL = 1e-10
SECULAR_ROOT_TOL = 1e-9
DEGENERATE_TOL = 1e-12
FORCING = np.array([-1.0, 0.0], dtype=complex)


@dataclass(frozen=True, eq=False)
class DefectSpec:
    """Hermitian 2x2 defect matrix V~ acting on the adjacent pair (v, w), v on sublattice A."""
    v: Site
    w: Site
    vtilde: np.ndarray

    def __post_init__(self) -> None:
        vt = np.asarray(self.vtilde, dtype=complex)
        if vt.shape != (2, 2):
            raise DefectConstructionError(f"defect matrix must be 2x2, got {vt.shape}")
        if np.abs(vt - vt.conj().T).max() > HERMITIAN_TOL:
            raise DefectConstructionError("defect matrix is not Hermitian")
        if self.v.sub is not Sublattice.A:
            raise DefectConstructionError(f"defect centre must be an A-site, got {self.v}")
        if not is_adjacent(self.v, self.w):
            raise DefectConstructionError(f"{self.v} and {self.w} are not adjacent")
        object.__setattr__(self, "vtilde", vt)

    def scaled(self, c: float) -> "DefectSpec":
        return DefectSpec(self.v, self.w, c * self.vtilde)

    def apply(self, state: LatticeState) -> np.ndarray:
        """Amplitudes of V u: V~ acting on (u(v), u(w)), zero elsewhere."""
        out = np.zeros(len(state.region), dtype=complex)
        index = [state.region.lookup(self.v), state.region.lookup(self.w)]
        if None in index:
            raise DefectConstructionError(f"defect sites are not in {state.region.describe()}")
        out[index] = self.vtilde @ state.amplitudes[index]
        return out


def response(flux: Flux, energy: float, v: Site, region: Region) -> LatticeState:
    """Solution of (H_phi - E0) u = delta_v on the region."""
    return neumann_solve(flux, energy, LatticeState.delta(region, v)).state


def _boundary_values(u: LatticeState, v: Site, w: Site) -> np.ndarray:
    a = np.array([u.at(v), u.at(w)], dtype=complex)
    if np.vdot(a, a).real == 0.0:
        raise DefectConstructionError(
            f"response vanishes at both {v} and {w}; the region truncation is likely broken"
        )
    if abs(a[0].imag) > IMAG_TOL:
        raise DefectConstructionError(
            f"u({v}) has imaginary part {a[0].imag:.3e}; no Hermitian defect fits the unit source"
        )
    return a


def build_defect(u: LatticeState, v: Site, w: Site) -> DefectSpec:
    """
    Minimal-Frobenius-norm Hermitian V~ with V~ [u(v), u(w)] = [-1, 0].

    Args:
        u: Response to a unit source at v
        v: Source site (sublattice A)
        w: Neighbour of v carrying the second defect entry

    Returns:
        DefectSpec: the two-site defect

    Raises:
        DefectConstructionError: If u vanishes on {v, w} or u(v) is not real
    """
    a = _boundary_values(u, v, w)
    b = FORCING
    norm2 = np.vdot(a, a).real
    ab = np.vdot(a, b).real
    vt = (np.outer(b, a.conj()) + np.outer(a, b.conj())) / norm2 - ab * np.outer(a, a.conj()) / norm2**2
    vt = 0.5 * (vt + vt.conj().T)
    logger.debug(f"Built defect on ({v}, {w}) with |V~| = {np.linalg.norm(vt):.6g}")
    return DefectSpec(v, w, vt)


def build_single_site_defect(u: LatticeState, v: Site, w: Site) -> DefectSpec:
    """One-vertex defect V~ = diag(-1/u(v), 0); needs u(v) != 0."""
    a = _boundary_values(u, v, w)
    if a[0] == 0.0:
        raise DefectConstructionError(f"u({v}) vanishes; a one-vertex defect cannot be built")
    return DefectSpec(v, w, np.diag([-1.0 / a[0].real, 0.0]).astype(complex))


def secular_value(vtilde: np.ndarray, green: np.ndarray) -> float:
    """Real part of det(I + V~ G) after checking the imaginary part vanishes."""
    det = np.linalg.det(np.eye(2) + vtilde @ green)
    if abs(det.imag) > SECULAR_IMAG_TOL:
        raise SecularImaginaryError(f"secular determinant has imaginary part {det.imag:.3e}")
    return float(det.real)


def secular(
    flux: Flux,
    energy: float,
    spec: DefectSpec,
    region: Region,
    moments: Optional[ResolventMoments] = None,
) -> float:
    """
    det(I + V~ G(E)); E is an eigenvalue of H_phi + V exactly where this vanishes.

    A precomputed moment table for the same flux and sites may be passed to avoid
    fresh Neumann solves.
    """
    if moments is not None:
        green = moments.green(energy)
    else:
        green = green_block(flux, energy, spec.v, spec.w, region).entries
    return secular_value(spec.vtilde, green)


@dataclass
class BoundState:
    """Eigenstate of H_phi + V at an off-band energy."""
    state: LatticeState
    energy: float
    residual: float
    decay: DecayFit
    singular_values: Tuple[float, float]


def bound_state(
    flux: Flux, spec: DefectSpec, energy: float, region: Region, strict: bool = True
) -> BoundState:
    """
    Reconstruct the eigenstate of H_phi + V at a root of the secular function.

    The kernel vector of I + G V~ gives the values a on {v, w}; the state is the
    resolvent applied to f = -V~ a and is normalized to unit norm.

    Raises:
        SecularNotZeroError: If E is not a root within 1e-9
        DegenerateDefectError: If both singular values of I + G V~ vanish
    """
    green = green_block(flux, energy, spec.v, spec.w, region, strict=strict).entries
    value = secular_value(spec.vtilde, green)
    if abs(value) > SECULAR_ROOT_TOL:
        raise SecularNotZeroError(f"secular({energy}) = {value:.3e} is not a root")

    _, sigma, vh = np.linalg.svd(np.eye(2) + green @ spec.vtilde)
    if sigma[0] < DEGENERATE_TOL:
        raise DegenerateDefectError("both singular values of I + G V~ vanish")
    a = vh[-1].conj()

    forcing = LatticeState.zeros(region)
    forcing.amplitudes[[region.lookup(spec.v), region.lookup(spec.w)]] = -spec.vtilde @ a
    u = neumann_solve(flux, energy, forcing).state
    k = int(np.argmax(np.abs(u.amplitudes)))
    phase = np.abs(u.amplitudes[k]) / u.amplitudes[k]
    u = u.scaled(phase / u.norm())

    r = apply_H(flux, u).amplitudes + spec.apply(u) - energy * u.amplitudes
    residual = float(np.linalg.norm(r))
    logger.debug(f"Bound state at E={energy}: residual {residual:.3e}")
    return BoundState(u, energy, residual, decay_fit(u, spec.v), (float(sigma[0]), float(sigma[1])))


def rotation_deviation(u: LatticeState, v: Site) -> float:
    """Largest pairwise difference of |u| over the three neighbours of v."""
    mags = [abs(u.at(t)) for t, _ in neighbors(v)]
    return max(abs(x - y) for x, y in combinations(mags, 2))
