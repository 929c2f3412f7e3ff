"""
AA-stacked magnetic bilayer with a compatible defect.

H^b = I (x) H_phi + K (x) I couples the layers by a constant Hermitian 2x2 matrix K,
and the defect is D = M (x) V. When K and M commute, each joint eigenvector xi_i
spans an invariant hybrid space xi_i (x) H on which the bilayer acts as
H_phi + kappa_i + mu_i V. A defect state built in channel 1 at an energy inside the
band of channel 2 is an embedded eigenvalue.

States are stored layer-major: amplitudes[a, k] is the amplitude on layer a at the
k-th site of the region.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from src.backend.defect import DefectSpec, bound_state, build_defect, response
from src.backend.errors import (
    EnergyPreconditionError,
    ForcingChannelError,
    IncompatibleDefectError,
    InvalidRegionError,
    NotHermitianError,
)
from src.backend.hamiltonian import Flux, HermitianOperator, LatticeState, apply_H, torus_hamiltonian
from src.backend.lattice import Region, Site
from src.backend.resolvent import DecayFit, neumann_solve
from src.backend.spectral import band_structure

logger = logging.getLogger(__name__)

COMMUTATOR_TOL = 1e-12
DEGENERACY_TOL = 1e-12
CHANNEL_TOL = 1e-12
DEFAULT_MARGIN = 0.1

# Defaults for the embedded-curve demonstration: kappa = (0, 0.65), mu = (1, 0.6),
# both diagonal in xi = (1, 1)/sqrt 2, (1, -1)/sqrt 2.
DEFAULT_K = np.array([[0.325, -0.325], [-0.325, 0.325]], dtype=complex)
DEFAULT_M = np.array([[0.8, 0.2], [0.2, 0.8]], dtype=complex)


def _hermitian(matrix: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(matrix, dtype=complex)
    if a.shape != (2, 2):
        raise NotHermitianError(f"{name} must be 2x2, got shape {a.shape}")
    if np.abs(a - a.conj().T).max() > COMMUTATOR_TOL:
        raise NotHermitianError(f"{name} is not Hermitian")
    return a


def _fix_phase(xi: np.ndarray) -> np.ndarray:
    # first component real and non-negative; the second when the first vanishes
    pivot = xi[0] if abs(xi[0]) > 1e-12 else xi[1]
    return xi * (abs(pivot) / pivot)


@dataclass(frozen=True, eq=False)
class InterlayerPair:
    """Commuting interlayer coupling K and defect profile M with their joint eigenbasis."""
    K: np.ndarray
    M: np.ndarray
    kappa: np.ndarray  # (kappa_1, kappa_2), ascending
    mu: np.ndarray     # (mu_1, mu_2)
    xi: np.ndarray     # columns xi_1, xi_2

    def channel(self, i: int) -> Tuple[float, float, np.ndarray]:
        """(kappa_i, mu_i, xi_i) for channel i in {1, 2}."""
        return float(self.kappa[i - 1]), float(self.mu[i - 1]), self.xi[:, i - 1]


def hybridize(K: np.ndarray, M: np.ndarray) -> InterlayerPair:
    """
    Joint orthonormal eigenbasis of commuting Hermitian K and M.

    Channels are labeled with kappa ascending, ties broken by mu ascending. Each
    basis vector has its first component real and non-negative.

    Raises:
        NotHermitianError: If K or M is not Hermitian
        IncompatibleDefectError: If ||KM - MK|| exceeds 1e-12
    """
    K = _hermitian(K, "K")
    M = _hermitian(M, "M")
    commutator = float(np.abs(K @ M - M @ K).max())
    if commutator > COMMUTATOR_TOL:
        raise IncompatibleDefectError(f"K and M do not commute (||[K, M]|| = {commutator:.3e})")

    kw, kv = np.linalg.eigh(K)
    mw, mv = np.linalg.eigh(M)
    if abs(kw[1] - kw[0]) > DEGENERACY_TOL:
        basis = kv
    elif abs(mw[1] - mw[0]) > DEGENERACY_TOL:
        basis = mv
    else:
        basis = np.eye(2, dtype=complex)

    kappa = np.einsum("ai,ab,bi->i", basis.conj(), K, basis).real
    mu = np.einsum("ai,ab,bi->i", basis.conj(), M, basis).real
    order = sorted(range(2), key=lambda i: (kappa[i], mu[i]))
    xi = np.column_stack([_fix_phase(basis[:, i]) for i in order])
    return InterlayerPair(K, M, kappa[order], mu[order], xi)


@dataclass
class BilayerState:
    """Amplitudes on both layers over a shared region, shape (2, sites)."""
    region: Region
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2, len(self.region)):
            raise InvalidRegionError(
                f"bilayer state has shape {self.amplitudes.shape}, expected (2, {len(self.region)})"
            )

    @classmethod
    def product(cls, xi: np.ndarray, u: LatticeState) -> "BilayerState":
        """xi (x) u."""
        return cls(u.region, np.outer(xi, u.amplitudes))

    def layer(self, a: int) -> LatticeState:
        """Component on layer a in {1, 2}."""
        return LatticeState(self.region, self.amplitudes[a - 1])

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def apply_bilayer(
    flux: Flux,
    K: np.ndarray,
    spec: Optional[DefectSpec],
    M: Optional[np.ndarray],
    state: BilayerState,
) -> BilayerState:
    """(I (x) H_phi + K (x) I + M (x) V) applied to a bilayer state; no defect when spec is None."""
    out = np.stack([apply_H(flux, state.layer(a)).amplitudes for a in (1, 2)])
    out += np.asarray(K, dtype=complex) @ state.amplitudes
    if spec is not None:
        if M is None:
            raise IncompatibleDefectError("a defect needs its interlayer profile M")
        local = np.stack([spec.apply(state.layer(a)) for a in (1, 2)])
        out += np.asarray(M, dtype=complex) @ local
    return BilayerState(state.region, out)


def hybrid_components(pair: InterlayerPair, state: BilayerState) -> Tuple[LatticeState, LatticeState]:
    """Projections g_i = <xi_i, .> of a bilayer state onto the two hybrid channels."""
    g = pair.xi.conj().T @ state.amplitudes
    return LatticeState(state.region, g[0]), LatticeState(state.region, g[1])


@dataclass
class EmbeddedState:
    """Bilayer eigenstate built in hybrid channel 1."""
    pair: InterlayerPair
    spec: DefectSpec        # V = W / mu_1, acting through M (x) V
    single_layer: DefectSpec  # W from the shifted single-layer construction
    energy: float
    state: BilayerState
    residual: float
    decay: DecayFit


def embedded_state(
    K: np.ndarray,
    M: np.ndarray,
    flux: Flux,
    energy: float,
    v: Site,
    w: Site,
    region: Region,
    margin: float = DEFAULT_MARGIN,
) -> EmbeddedState:
    """
    Eigenstate of H^b + D at energy E0, supported in hybrid channel 1.

    Runs the single-layer defect construction at E0 - kappa_1, scales the defect by
    1/mu_1 and lifts the state to xi_1 (x) u.

    Raises:
        EnergyPreconditionError: If |E0 - kappa_1| < 3 + margin or mu_1 vanishes
    """
    pair = hybridize(K, M)
    kappa1, mu1, xi1 = pair.channel(1)
    if abs(mu1) <= DEGENERACY_TOL:
        raise EnergyPreconditionError("mu_1 vanishes; the defect cannot act on channel 1")
    shifted = energy - kappa1
    if abs(shifted) < 3.0 + margin:
        raise EnergyPreconditionError(
            f"E0 - kappa_1 = {shifted:.6g} lies within {margin} of the channel-1 band [-3, 3]"
        )

    logger.info(f"Building embedded state at E0={energy} (kappa_1={kappa1}, mu_1={mu1})")
    W = build_defect(response(flux, shifted, v, region), v, w)
    bound = bound_state(flux, W, shifted, region)
    spec = W.scaled(1.0 / mu1)

    state = BilayerState.product(xi1, bound.state)
    r = apply_bilayer(flux, pair.K, spec, pair.M, state).amplitudes - energy * state.amplitudes
    residual = float(np.linalg.norm(r)) / state.norm()
    return EmbeddedState(pair, spec, W, energy, state, residual, bound.decay)


@dataclass
class ChannelMembership:
    """Where E0 - kappa_i sits relative to the single-layer bands."""
    channel: int
    kappa: float
    shifted_energy: float
    inside: bool
    edge_distance: float


@dataclass
class EmbeddingReport:
    energy: float
    flux: Flux
    channels: List[ChannelMembership]

    @property
    def embedded(self) -> bool:
        """Outside channel 1's bands but inside channel 2's."""
        return not self.channels[0].inside and self.channels[1].inside


def embedding_check(
    energy: float,
    flux: Flux,
    K: np.ndarray,
    m1: int = 32,
    m2: int = 32,
    fatten: float = 0.0,
) -> EmbeddingReport:
    """Membership of E0 - kappa_i in the band union of band_structure(p/q), for both channels."""
    kappa = np.linalg.eigvalsh(_hermitian(K, "K"))
    bands = band_structure(flux, m1, m2)
    channels = [
        ChannelMembership(
            channel=i + 1,
            kappa=float(k),
            shifted_energy=energy - float(k),
            inside=bands.contains(energy - float(k), fatten),
            edge_distance=bands.edge_distance(energy - float(k)),
        )
        for i, k in enumerate(kappa)
    ]
    return EmbeddingReport(energy, flux, channels)


def forced_response(
    flux: Flux,
    K: np.ndarray,
    energy: float,
    f: BilayerState,
    M: Optional[np.ndarray] = None,
) -> BilayerState:
    """
    Response of the bilayer (no defect) to a forcing confined to hybrid channel 1.

    The channel basis comes from K, or from M when K is degenerate.

    Raises:
        ForcingChannelError: If f has a channel-2 component above 1e-12
        EnergyPreconditionError: If |E - kappa_1| <= 3
    """
    pair = hybridize(K, K if M is None else M)
    kappa1, _, xi1 = pair.channel(1)
    g1, g2 = hybrid_components(pair, f)
    if g2.norm() > CHANNEL_TOL * max(1.0, f.norm()):
        raise ForcingChannelError(f"forcing has a channel-2 component of norm {g2.norm():.3e}")
    if abs(energy - kappa1) <= 3.0:
        raise EnergyPreconditionError(f"E - kappa_1 = {energy - kappa1:.6g} lies in the channel-1 band")
    u = neumann_solve(flux, energy - kappa1, g1).state
    return BilayerState.product(xi1, u)


def bilayer_torus_hamiltonian(
    L1: int,
    L2: int,
    flux: Flux,
    K: np.ndarray,
    spec: Optional[DefectSpec] = None,
    M: Optional[np.ndarray] = None,
) -> HermitianOperator:
    """Dense I (x) H_torus + K (x) I (+ M (x) V) on the L1 x L2 torus, layer-major."""
    h = torus_hamiltonian(L1, L2, flux)
    n = h.dimension
    matrix = np.kron(np.eye(2), h.matrix) + np.kron(_hermitian(K, "K"), np.eye(n))
    if spec is not None:
        if M is None:
            raise IncompatibleDefectError("a defect needs its interlayer profile M")
        index = {s: k for k, s in enumerate(h.sites)}
        ix = [index[Site(s.n1 % L1, s.n2 % L2, s.sub)] for s in (spec.v, spec.w)]
        local = np.zeros((n, n), dtype=complex)
        local[np.ix_(ix, ix)] = spec.vtilde
        matrix += np.kron(_hermitian(M, "M"), local)
    return HermitianOperator.dense(matrix)
