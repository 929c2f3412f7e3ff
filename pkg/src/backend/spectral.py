"""
Dense Hermitian eigensolver, magnetic Bloch matrices and the Hofstadter butterfly.

At rational flux phi = 2 pi p / q the Landau-gauge Hamiltonian commutes with
shifts by (q, 0) and (0, 1). The magnetic unit cell holds q cells along e1
(sites ordered A_0, B_0, A_1, B_1, ...), giving a 2q x 2q Bloch matrix per
quasi-momentum (k1, k2).
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Tuple, Union

import numpy as np
import scipy.linalg as sla

from src.backend.errors import EigenConvergenceError, IrrationalFluxError, NotHermitianError
from src.backend.hamiltonian import HERMITIAN_TOL, Flux, HermitianOperator
from src.config import EigenSolver, settings

logger = logging.getLogger(__name__)

JACOBI_OFF_TOL = 1e-13
JACOBI_MAX_SWEEPS = 40
K_CHUNK = 128


def _rotate(a: np.ndarray, v: np.ndarray, p: int, q: int) -> None:
    """One complex Jacobi rotation zeroing a[:, p, q] across the whole stack, in place."""
    apq = a[:, p, q]
    r = np.abs(apq)
    active = r > 0.0
    if not active.any():
        return
    rs = np.where(active, r, 1.0)
    app = a[:, p, p].real
    aqq = a[:, q, q].real
    tau = (aqq - app) / (2.0 * rs)
    t = np.where(tau >= 0.0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
    t = np.where(active, t, 0.0)
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = t * c
    ph = np.where(active, apq / rs, 1.0)
    cph = ph.conj()

    # A <- A J with J = [[c, s], [-s e^{-ia}, c e^{-ia}]] on columns (p, q)
    ap = a[:, :, p].copy()
    aq = a[:, :, q].copy()
    a[:, :, p] = c[:, None] * ap - (s * cph)[:, None] * aq
    a[:, :, q] = s[:, None] * ap + (c * cph)[:, None] * aq
    # A <- J^H A
    rp = a[:, p, :].copy()
    rq = a[:, q, :].copy()
    a[:, p, :] = c[:, None] * rp - (s * ph)[:, None] * rq
    a[:, q, :] = s[:, None] * rp + (c * ph)[:, None] * rq
    a[:, p, q] = 0.0
    a[:, q, p] = 0.0
    a[:, p, p] = a[:, p, p].real
    a[:, q, q] = a[:, q, q].real

    vp = v[:, :, p].copy()
    vq = v[:, :, q].copy()
    v[:, :, p] = c[:, None] * vp - (s * cph)[:, None] * vq
    v[:, :, q] = s[:, None] * vp + (c * cph)[:, None] * vq


def jacobi_eigh(stack: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Cyclic Jacobi diagonalization of a stack of Hermitian matrices.

    Args:
        stack: Array of shape (batch, n, n)

    Returns:
        Tuple[np.ndarray, np.ndarray]: ascending eigenvalues (batch, n) and unitary
        eigenvector matrices (batch, n, n), eigenvectors in columns

    Raises:
        EigenConvergenceError: If the sweep cap is reached before every matrix converges
    """
    a = np.array(stack, dtype=complex)
    batch, n, _ = a.shape
    v = np.tile(np.eye(n, dtype=complex), (batch, 1, 1))
    scale = np.linalg.norm(a, axis=(1, 2))
    scale = np.where(scale > 0.0, scale, 1.0)
    off_diagonal = ~np.eye(n, dtype=bool)

    for sweep in range(JACOBI_MAX_SWEEPS + 1):
        off = np.sqrt((np.abs(a[:, off_diagonal]) ** 2).sum(axis=1))
        if np.all(off <= JACOBI_OFF_TOL * scale):
            break
        if sweep == JACOBI_MAX_SWEEPS:
            raise EigenConvergenceError(
                f"Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps "
                f"(worst off-diagonal norm {float((off / scale).max()):.3e})"
            )
        for p in range(n - 1):
            for q in range(p + 1, n):
                _rotate(a, v, p, q)

    w = np.diagonal(a, axis1=1, axis2=2).real.copy()
    order = np.argsort(w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1)
    v = np.take_along_axis(v, order[:, None, :], axis=2)
    return w, v


def _use_jacobi(n: int, solver: Optional[EigenSolver]) -> bool:
    solver = settings.eigensolver if solver is None else EigenSolver(solver)
    if solver is EigenSolver.AUTO:
        return n <= settings.jacobi_max_dimension
    return solver is EigenSolver.JACOBI


def eigh_stack(
    stack: np.ndarray, solver: Optional[EigenSolver] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Diagonalize a (batch, n, n) stack with the configured backend."""
    stack = np.asarray(stack, dtype=complex)
    n = stack.shape[-1]
    if _use_jacobi(n, solver):
        return jacobi_eigh(stack)
    pairs = [sla.eigh(m) for m in stack]
    return np.array([w for w, _ in pairs]), np.array([v for _, v in pairs])


def hermitian_eigen(
    matrix: Union[HermitianOperator, np.ndarray], solver: Optional[EigenSolver] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigen-decomposition of a dense Hermitian matrix.

    Args:
        matrix: Dense HermitianOperator or square array
        solver: Override for the configured eigensolver backend

    Returns:
        Tuple[np.ndarray, np.ndarray]: eigenvalues ascending, eigenvectors in columns

    Raises:
        NotHermitianError: If the input is not Hermitian within tolerance
    """
    if isinstance(matrix, HermitianOperator):
        if not matrix.is_dense:
            raise NotHermitianError("hermitian_eigen needs a dense operator; use assemble_dense")
        a = matrix.matrix
    else:
        a = HermitianOperator.dense(matrix, tol=HERMITIAN_TOL).matrix
    w, v = eigh_stack(a[None, :, :], solver)
    return w[0], v[0]


def bloch_stack(flux: Flux, k1: np.ndarray, k2: np.ndarray) -> np.ndarray:
    """Magnetic Bloch matrices for arrays of quasi-momenta, shape (len(k1), 2q, 2q)."""
    if not flux.is_rational:
        raise IrrationalFluxError(f"Bloch matrices need a rational flux p/q, got {flux}")
    q = flux.q
    k1 = np.atleast_1d(np.asarray(k1, dtype=float))
    k2 = np.atleast_1d(np.asarray(k2, dtype=float))
    j = np.arange(q)
    z1 = np.exp(1j * k1)
    z2 = np.exp(1j * k2)

    h = np.zeros((k1.size, 2 * q, 2 * q), dtype=complex)
    # A_j -> B_j and A_j -> B_j shifted by e2 (Harper phase exp(-i j phi))
    h[:, 2 * j, 2 * j + 1] = 1.0 + flux.phases(-j)[None, :] * z2[:, None]
    # A_j -> B_{j+1}; the last cell hops across the magnetic cell boundary
    across = np.ones((k1.size, q), dtype=complex)
    across[:, q - 1] = z1
    h[:, 2 * j, 2 * ((j + 1) % q) + 1] += across
    return h + np.conj(np.transpose(h, (0, 2, 1)))


def bloch_matrix(flux: Flux, k1: float, k2: float) -> HermitianOperator:
    """2q x 2q magnetic Bloch matrix at quasi-momentum (k1, k2)."""
    return HermitianOperator.dense(bloch_stack(flux, k1, k2)[0])


def zero_field_dispersion(k1: float, k2: float) -> Tuple[float, float]:
    """Closed-form zero-flux bands E = -/+ |1 + e^{ik1} + e^{ik2}|."""
    e = abs(1.0 + np.exp(1j * k1) + np.exp(1j * k2))
    return -e, e


@dataclass
class BandData:
    """Bloch spectrum of one rational flux on a uniform k-grid."""
    flux: Flux
    kgrid: Tuple[int, int]
    samples: np.ndarray  # (m1 * m2, 2q), ascending per k-point

    @property
    def band_count(self) -> int:
        return self.samples.shape[1]

    @property
    def intervals(self) -> np.ndarray:
        """(2q, 2) array of [emin, emax] per band index."""
        return np.column_stack([self.samples.min(axis=0), self.samples.max(axis=0)])

    def union(self) -> List[Tuple[float, float]]:
        """Band intervals with overlapping or touching ones merged."""
        merged: List[List[float]] = []
        for lo, hi in sorted(map(tuple, self.intervals.tolist())):
            if merged and lo <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        return [(lo, hi) for lo, hi in merged]

    def contains(self, energy: float, fatten: float = 0.0) -> bool:
        return any(lo - fatten <= energy <= hi + fatten for lo, hi in self.intervals.tolist())

    def edge_distance(self, energy: float) -> float:
        """Distance from `energy` to the nearest band edge."""
        return float(np.abs(self.intervals - energy).min())


def k_grid(m1: int, m2: int) -> Tuple[np.ndarray, np.ndarray]:
    """Uniform grid over [0, 2 pi)^2 including k = (0, 0); k1-major order."""
    k1, k2 = np.meshgrid(2 * np.pi * np.arange(m1) / m1, 2 * np.pi * np.arange(m2) / m2, indexing="ij")
    return k1.ravel(), k2.ravel()


def band_structure(flux: Flux, m1: int, m2: int, workers: Optional[int] = None) -> BandData:
    """
    Bloch bands of a rational flux on an m1 x m2 grid.

    k-points are diagonalized in fixed-size chunks, so the result does not depend
    on the worker count.

    Args:
        flux: Rational flux p/q
        m1, m2: Grid sizes (>= 4)
        workers: Thread cap; defaults to the configured worker count
    """
    if m1 < 4 or m2 < 4:
        raise ValueError(f"k-grid must be at least 4x4, got {m1}x{m2}")
    k1, k2 = k_grid(m1, m2)
    chunks = [slice(start, start + K_CHUNK) for start in range(0, k1.size, K_CHUNK)]

    def diagonalize(chunk: slice) -> np.ndarray:
        w, _ = eigh_stack(bloch_stack(flux, k1[chunk], k2[chunk]))
        return w

    workers = settings.worker_count() if workers is None else workers
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(diagonalize, chunks))
    else:
        parts = [diagonalize(c) for c in chunks]
    return BandData(flux=flux, kgrid=(m1, m2), samples=np.concatenate(parts, axis=0))


def farey(qmax: int) -> List[Flux]:
    """Reduced fractions p/q in [0, 1] with q <= qmax, ascending."""
    if qmax < 1:
        raise ValueError(f"qmax must be >= 1, got {qmax}")
    fractions = sorted({Fraction(p, q) for q in range(1, qmax + 1) for p in range(q + 1)})
    return [Flux.rational(f.numerator, f.denominator) for f in fractions]


def nearest_rational(alpha: float, qmax: int) -> Flux:
    """Farey fraction closest to alpha mod 1 (ties: smaller q, then smaller p)."""
    a = alpha - math.floor(alpha)
    return min(farey(qmax), key=lambda f: (abs(a - f.p / f.q), f.q, f.p))


def butterfly(qmax: int, m1: int, m2: int) -> List[BandData]:
    """
    Band data for every Farey fraction p/q in [0, 1] with q <= qmax.

    Fluxes are processed in parallel; results keep ascending p/q order.
    """
    fluxes = farey(qmax)
    logger.info(f"Computing butterfly over {len(fluxes)} fluxes on a {m1}x{m2} k-grid")
    with ThreadPoolExecutor(max_workers=settings.worker_count()) as pool:
        data = list(pool.map(lambda f: band_structure(f, m1, m2, workers=1), fluxes))
    logger.info("Butterfly complete")
    return data
