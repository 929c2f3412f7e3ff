"""
Single-layer magnetic Hamiltonian H_phi on truncated regions and tori.

Phases are kept as exact integer exponents (see lattice.neighbors) and are only
turned into complex numbers when an operator is built for a given flux. Rational
fluxes reduce the exponent modulo q before exponentiating, so H at p/q and at
(p mod q)/q are bit-identical.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from src.backend.errors import (
    DenseCapExceededError,
    InvalidRegionError,
    NotHermitianError,
    OutsideConvergenceRegionError,
    TorusShapeError,
)
from src.backend.lattice import (
    Region,
    Site,
    Sublattice,
    face_exponent_sum,
    hexagon,
    hop_exponent,
    neighbors,
    rotation_map,
)
from src.config import settings

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class Flux:
    """
    Magnetic flux per hexagonal face.

    Either a real angle phi (radians) or a reduced fraction p/q meaning
    phi = 2 pi p / q. Rational(0, 1) and Real(0) produce identical operators.
    """
    phi: float
    p: Optional[int] = None
    q: Optional[int] = None

    @classmethod
    def real(cls, phi: float) -> "Flux":
        return cls(float(phi))

    @classmethod
    def rational(cls, p: int, q: int) -> "Flux":
        if q < 1:
            raise ValueError(f"flux denominator must be >= 1, got {q}")
        g = math.gcd(p, q)
        p, q = p // g, q // g
        return cls(2.0 * math.pi * p / q, p, q)

    @classmethod
    def parse(cls, text: str) -> "Flux":
        """Parse ``"p/q"`` as a rational flux and anything else as radians."""
        text = text.strip()
        if "/" in text:
            num, den = text.split("/", 1)
            return cls.rational(int(num), int(den))
        return cls.real(float(text))

    @property
    def is_rational(self) -> bool:
        return self.q is not None

    @property
    def alpha(self) -> float:
        """phi / 2 pi."""
        if self.is_rational:
            return self.p / self.q
        return self.phi / (2.0 * math.pi)

    def phases(self, exponents: Union[np.ndarray, Sequence[int], int]) -> np.ndarray:
        """exp(i m phi) for integer exponents m."""
        m = np.asarray(exponents, dtype=np.int64)
        if self.is_rational:
            return np.exp(2j * np.pi * np.mod(m * self.p, self.q) / self.q)
        return np.exp(1j * m * self.phi)

    def __str__(self) -> str:
        if self.is_rational:
            return f"{self.p}/{self.q}"
        return repr(self.phi)


class Boundary(str, Enum):
    """Truncation rule for hops leaving a region."""
    OPEN = "open"    # hops leaving the region are dropped


@dataclass
class LatticeState:
    """Complex amplitude per enumerated site of a region."""
    region: Region
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (len(self.region),):
            raise ValueError(
                f"state has {self.amplitudes.shape} amplitudes, region {self.region.describe()} "
                f"has {len(self.region)} sites"
            )

    @classmethod
    def zeros(cls, region: Region) -> "LatticeState":
        return cls(region, np.zeros(len(region), dtype=complex))

    @classmethod
    def delta(cls, region: Region, site: Site) -> "LatticeState":
        k = region.lookup(site)
        if k is None:
            raise InvalidRegionError(f"{site} is not in {region.describe()}")
        state = cls.zeros(region)
        state.amplitudes[k] = 1.0
        return state

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def at(self, site: Site) -> complex:
        k = self.region.lookup(site)
        return 0j if k is None else complex(self.amplitudes[k])

    def scaled(self, c: complex) -> "LatticeState":
        return LatticeState(self.region, c * self.amplitudes)


class HermitianOperator:
    """
    A Hermitian operator on the sites of a region or torus.

    Dense operators hold their matrix; matrix-free ones hold an apply closure
    (backed by a sparse matrix for region operators).
    """

    def __init__(
        self,
        dimension: int,
        matrix: Optional[np.ndarray] = None,
        apply: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        sites: Optional[Sequence[Site]] = None,
        sparse: Optional[sp.csr_matrix] = None,
    ) -> None:
        if (matrix is None) == (apply is None):
            raise ValueError("exactly one of matrix or apply must be given")
        self.dimension = dimension
        self.matrix = matrix
        self._apply = apply
        self.sites = tuple(sites) if sites is not None else None
        self.sparse = sparse

    @classmethod
    def dense(
        cls, matrix: np.ndarray, sites: Optional[Sequence[Site]] = None, tol: float = HERMITIAN_TOL
    ) -> "HermitianOperator":
        a = np.asarray(matrix, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise NotHermitianError(f"expected a square matrix, got shape {a.shape}")
        scale = max(1.0, float(np.abs(a).max(initial=0.0)))
        if np.abs(a - a.conj().T).max(initial=0.0) > tol * scale:
            raise NotHermitianError("matrix violates conjugate-transpose symmetry beyond tolerance")
        return cls(a.shape[0], matrix=a, sites=sites)

    @classmethod
    def matrix_free(
        cls,
        apply: Callable[[np.ndarray], np.ndarray],
        dimension: int,
        sites: Optional[Sequence[Site]] = None,
        sparse: Optional[sp.csr_matrix] = None,
    ) -> "HermitianOperator":
        return cls(dimension, apply=apply, sites=sites, sparse=sparse)

    @property
    def is_dense(self) -> bool:
        return self.matrix is not None

    def matvec(self, x: np.ndarray) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix @ x
        return self._apply(x)

    def __matmul__(self, x: np.ndarray) -> np.ndarray:
        return self.matvec(x)

    def to_dense(self) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix
        if self.sparse is not None:
            return self.sparse.toarray()
        return np.column_stack([self._apply(e) for e in np.eye(self.dimension, dtype=complex)])

    def hermiticity_defect(self, rng: np.random.Generator, trials: int = 5) -> float:
        """max |<x, A y> - <A x, y>| / (|x| |y|) over random complex vector pairs."""
        worst = 0.0
        for _ in range(trials):
            x = rng.normal(size=self.dimension) + 1j * rng.normal(size=self.dimension)
            y = rng.normal(size=self.dimension) + 1j * rng.normal(size=self.dimension)
            gap = abs(np.vdot(x, self.matvec(y)) - np.vdot(self.matvec(x), y))
            worst = max(worst, gap / (np.linalg.norm(x) * np.linalg.norm(y)))
        return worst

    def gershgorin_bound(self) -> float:
        """Largest absolute row sum (an upper bound on the operator norm)."""
        if self.sparse is not None:
            return float(np.asarray(abs(self.sparse).sum(axis=1)).max(initial=0.0))
        return float(np.abs(self.to_dense()).sum(axis=1).max(initial=0.0))


@lru_cache(maxsize=64)
def hopping_matrix(flux: Flux, region: Region) -> sp.csr_matrix:
    """Sparse H_phi on a region with open truncation."""
    rows, cols, exps = region.edges
    n = len(region)
    return sp.csr_matrix((flux.phases(exps), (rows, cols)), shape=(n, n))


def region_operator(flux: Flux, region: Region) -> HermitianOperator:
    """Matrix-free H_phi on a region (the default for resolvent work)."""
    h = hopping_matrix(flux, region)
    return HermitianOperator.matrix_free(h.dot, len(region), sites=region.sites, sparse=h)


def apply_H(flux: Flux, state: LatticeState, boundary: Boundary = Boundary.OPEN) -> LatticeState:
    """
    Apply H_phi to a state, dropping hops that leave the state's region.

    Args:
        flux: Magnetic flux per face
        state: Amplitudes on an enumerated region
        boundary: Truncation rule (only open truncation is supported)

    Returns:
        LatticeState: H_phi u on the same region
    """
    if boundary is not Boundary.OPEN:
        raise ValueError(f"unsupported boundary {boundary}")
    h = hopping_matrix(flux, state.region)
    return LatticeState(state.region, h @ state.amplitudes)


def assemble_dense(flux: Flux, region: Region, cap: Optional[int] = None) -> HermitianOperator:
    """
    Materialize H_phi on a region as a dense matrix.

    Raises:
        DenseCapExceededError: If the region holds more sites than the cap
    """
    cap = settings.dense_site_cap if cap is None else cap
    if len(region) > cap:
        raise DenseCapExceededError(
            f"{region.describe()} has {len(region)} sites, dense cap is {cap}"
        )
    return HermitianOperator.dense(hopping_matrix(flux, region).toarray(), sites=region.sites)


def _angle_array(op: HermitianOperator, angles) -> np.ndarray:
    if isinstance(angles, Mapping):
        if op.sites is None:
            raise ValueError("site-keyed angles need an operator with a site list")
        return np.array([angles[s] for s in op.sites], dtype=float)
    if callable(angles):
        if op.sites is None:
            raise ValueError("site-keyed angles need an operator with a site list")
        return np.array([angles(s) for s in op.sites], dtype=float)
    theta = np.asarray(angles, dtype=float)
    if theta.shape != (op.dimension,):
        raise ValueError(f"expected {op.dimension} angles, got {theta.shape}")
    return theta


def gauge_transform(op: HermitianOperator, angles) -> HermitianOperator:
    """
    Conjugate an operator by the diagonal unitary diag(exp(i angle(site))).

    Entry (x, y) is multiplied by exp(i (angle(x) - angle(y))); the spectrum and
    all off-diagonal moduli are unchanged.

    Args:
        op: Operator to transform
        angles: Per-site angles as an array in enumeration order, a Site mapping,
            or a callable Site -> radians
    """
    d = np.exp(1j * _angle_array(op, angles))
    if op.is_dense:
        return HermitianOperator.dense(d[:, None] * op.matrix * d.conj()[None, :], sites=op.sites)
    sparse = None
    if op.sparse is not None:
        sparse = sp.diags(d) @ op.sparse @ sp.diags(d.conj())
        sparse = sparse.tocsr()
    return HermitianOperator.matrix_free(
        lambda x: d * op.matvec(d.conj() * x), op.dimension, sites=op.sites, sparse=sparse
    )


def torus_sites(L1: int, L2: int) -> Tuple[Site, ...]:
    return tuple(
        Site(n1, n2, sub)
        for n1 in range(L1)
        for n2 in range(L2)
        for sub in (Sublattice.A, Sublattice.B)
    )


def torus_hamiltonian(L1: int, L2: int, flux: Flux) -> HermitianOperator:
    """
    Dense H_phi on an L1 x L2 torus at rational flux p/q.

    Cells wrap in both directions; n1 is taken mod L1, which keeps the Harper
    phase exp(-i n1 phi) single-valued because q divides L1. Hops that wrap onto
    the same pair of sites (L1 or L2 equal to 1) are summed.

    Raises:
        TorusShapeError: If the flux is not rational or q does not divide L1
    """
    if not flux.is_rational:
        raise TorusShapeError("torus operators need a rational flux p/q")
    if L1 < 1 or L2 < 1:
        raise TorusShapeError(f"torus sizes must be >= 1, got {L1}x{L2}")
    if L1 % flux.q:
        raise TorusShapeError(f"q={flux.q} does not divide L1={L1}")

    def index(n1: int, n2: int, sub: Sublattice) -> int:
        return 2 * ((n1 % L1) * L2 + (n2 % L2)) + (0 if sub is Sublattice.A else 1)

    rows, cols, exps = [], [], []
    for s in torus_sites(L1, L2):
        for t, m in neighbors(s):
            rows.append(index(s.n1, s.n2, s.sub))
            cols.append(index(t.n1, t.n2, t.sub))
            exps.append(m)
    dim = 2 * L1 * L2
    h = np.zeros((dim, dim), dtype=complex)
    np.add.at(h, (np.asarray(rows), np.asarray(cols)), flux.phases(exps))
    return HermitianOperator.dense(h, sites=torus_sites(L1, L2))


def chiral_signs(sites: Sequence[Site]) -> np.ndarray:
    """Diagonal of S = diag(+1 on A, -1 on B); S H S = -H."""
    return np.array([1.0 if s.sub is Sublattice.A else -1.0 for s in sites])


def face_flux_exponents(region: Region) -> List[int]:
    """Oriented exponent sums around every hexagonal face lying fully inside a region."""
    return [
        face_exponent_sum(s.n1, s.n2)
        for s in region.sites
        if s.sub is Sublattice.A and all(t in region for t in hexagon(s.n1, s.n2))
    ]


def rotation_gauge(flux: Flux, region: Region, center: Site) -> np.ndarray:
    """
    Gauge angles theta with R H R^-1 = G H G^-1, G = diag(exp(i theta)).

    The mismatch between rotated and original exponents on every edge is an
    integer cocycle; it is integrated along a breadth-first tree from the centre
    and checked on all remaining edges.

    Raises:
        InvalidRegionError: If the region is not invariant under the rotation
        ValueError: If the cocycle does not integrate (flux not preserved)
    """
    if not region.is_rotation_invariant(center):
        raise InvalidRegionError(f"{region.describe()} is not invariant under rotation about {center}")
    rows, cols, exps = region.edges
    sites = region.sites
    # rotated operator: H'[R s, R t] = H[s, t]
    mismatch = {}
    for k, j, m in zip(rows.tolist(), cols.tolist(), exps.tolist()):
        x, y = rotation_map(sites[k], center), rotation_map(sites[j], center)
        mismatch[(x, y)] = m - hop_exponent(x, y)

    chi = {center: 0}
    queue = deque([center])
    while queue:
        x = queue.popleft()
        for y, _ in neighbors(x):
            if y in region and y not in chi:
                chi[y] = chi[x] - mismatch[(x, y)]
                queue.append(y)
    for (x, y), delta in mismatch.items():
        if chi[x] - chi[y] != delta:
            raise ValueError(f"rotation mismatch does not integrate on edge {x} -> {y}")
    return flux.phi * np.array([chi[s] for s in sites], dtype=float)


def rotation_permutation(region: Region, center: Site) -> np.ndarray:
    """perm[k] = index of R(site k)."""
    return np.array([region.lookup(rotation_map(s, center)) for s in region.sites])


def recommended_radius(energy: float, tol: float) -> int:
    """
    Hop radius N with r^-N <= tol for r = (|E| - 1) / 2, plus a margin of 5 shells.

    Raises:
        OutsideConvergenceRegionError: If |E| <= 3
    """
    if abs(energy) <= 3.0:
        raise OutsideConvergenceRegionError(f"|E| = {abs(energy)} must exceed 3")
    r = (abs(energy) - 1.0) / 2.0
    return int(math.ceil(math.log(1.0 / tol) / math.log(r))) + 5


def truncation_estimate(energy: float, region: Region, center: Site) -> float:
    """r^-d with d the hop distance from `center` to the region boundary."""
    r = (abs(energy) - 1.0) / 2.0
    if r <= 1.0:
        return math.inf
    return r ** (-region.boundary_distance(center))


def dump_triplets(op: HermitianOperator) -> str:
    """Plain-text `row col re im` dump of the nonzero entries, rows sorted."""
    if op.sparse is not None:
        coo = op.sparse.tocoo()
        entries = sorted(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))
    else:
        a = op.to_dense()
        r, c = np.nonzero(a)
        entries = sorted(zip(r.tolist(), c.tolist(), a[r, c].tolist()))
    return "".join(f"{i} {j} {z.real:.17g} {z.imag:.17g}\n" for i, j, z in entries)
