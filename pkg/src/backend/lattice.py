"""
Honeycomb graph geometry for the magnetic tight-binding model.

Sites are addressed by an integer cell n = (n1, n2) and a sublattice A or B. The
hopping structure and the Landau-gauge phase exponents follow the single-layer
Hamiltonian

    (H u)_A(n) = u_B(n) + u_B(n + e1) + exp(-i n1 phi) u_B(n + e2)
    (H u)_B(n) = u_A(n) + u_A(n - e1) + exp(+i n1 phi) u_A(n - e2)

An entry ``(t, m)`` returned by ``neighbors(s)`` means H[s, t] = exp(i m phi).
With this convention the exponents summed around any hexagonal face, traversed
A(n) -> B(n+e1) -> A(n+e1) -> B(n+e1+e2) -> A(n+e2) -> B(n+e2) -> A(n), equal -1.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.backend.errors import InvalidRegionError

logger = logging.getLogger(__name__)


class Sublattice(str, Enum):
    """The two atoms of a honeycomb cell; A carries u1, B carries u2."""
    A = "A"
    B = "B"


@dataclass(frozen=True, order=True)
class Site:
    """Lattice address (n1, n2, sublattice). Ordering is lexicographic, A before B."""
    n1: int
    n2: int
    sub: Sublattice

    def shifted(self, d1: int, d2: int) -> "Site":
        return Site(self.n1 + d1, self.n2 + d2, self.sub)

    def __str__(self) -> str:
        return f"{self.sub.value}({self.n1},{self.n2})"


def site_a(n1: int, n2: int) -> Site:
    return Site(n1, n2, Sublattice.A)


def site_b(n1: int, n2: int) -> Site:
    return Site(n1, n2, Sublattice.B)


ORIGIN = site_a(0, 0)


def neighbors(s: Site) -> List[Tuple[Site, int]]:
    """
    The three neighbours of a site with their Harper phase exponents.

    Args:
        s: Site whose row of the Hamiltonian is requested

    Returns:
        List[Tuple[Site, int]]: pairs (t, m) with H[s, t] = exp(i m phi). Reversed
        edges carry negated exponents.
    """
    n1, n2 = s.n1, s.n2
    if s.sub is Sublattice.A:
        return [
            (site_b(n1, n2), 0),
            (site_b(n1 + 1, n2), 0),
            (site_b(n1, n2 + 1), -n1),
        ]
    return [
        (site_a(n1, n2), 0),
        (site_a(n1 - 1, n2), 0),
        (site_a(n1, n2 - 1), n1),
    ]


def is_adjacent(s: Site, t: Site) -> bool:
    return any(x == t for x, _ in neighbors(s))


def hop_exponent(s: Site, t: Site) -> int:
    """Phase exponent of H[s, t] for adjacent sites."""
    for x, m in neighbors(s):
        if x == t:
            return m
    raise ValueError(f"{s} and {t} are not adjacent")


def _rotate_cell(n1: int, n2: int) -> Tuple[int, int]:
    # L(n1, n2) = (-n1 - n2, n1), L^3 = identity
    return -n1 - n2, n1


def rotation_map(s: Site, center: Site = ORIGIN) -> Site:
    """
    Order-3 rotation of the honeycomb graph about an A-site.

    About A(0,0): A(n) -> A(L n), B(n) -> B(L n + e1) with L(n1, n2) = (-n1 - n2, n1).
    Other A-centres are handled by translating to the origin and back. The
    neighbours of the centre are permuted cyclically B(0,0) -> B(1,0) -> B(0,1).

    Raises:
        InvalidRegionError: If the centre is not on sublattice A
    """
    if center.sub is not Sublattice.A:
        raise InvalidRegionError(f"rotation centre must be an A-site, got {center}")
    m1, m2 = _rotate_cell(s.n1 - center.n1, s.n2 - center.n2)
    if s.sub is Sublattice.B:
        m1 += 1
    return Site(m1 + center.n1, m2 + center.n2, s.sub)


def hexagon(n1: int, n2: int) -> Tuple[Site, ...]:
    """Vertices of the hexagonal face anchored at A(n1, n2), in traversal order."""
    return (
        site_a(n1, n2),
        site_b(n1 + 1, n2),
        site_a(n1 + 1, n2),
        site_b(n1 + 1, n2 + 1),
        site_a(n1, n2 + 1),
        site_b(n1, n2 + 1),
    )


def face_exponent_sum(n1: int, n2: int) -> int:
    """Sum of the oriented phase exponents around the face anchored at A(n1, n2)."""
    ring = hexagon(n1, n2)
    return sum(hop_exponent(ring[k], ring[(k + 1) % 6]) for k in range(6))


class RegionKind(str, Enum):
    BOX = "box"
    BALL = "ball"


@dataclass(frozen=True)
class Region:
    """
    Finite truncation of the honeycomb graph with a fixed linear site enumeration.

    Sites are ordered lexicographically by (n1, n2) with A before B, so matrix dumps
    are reproducible. Regions compare and hash by their defining parameters.
    """
    kind: RegionKind
    half_width: Optional[int] = None
    center: Optional[Site] = None
    radius: Optional[int] = None

    @classmethod
    def box(cls, half_width: int) -> "Region":
        """Cells |n1| <= N, |n2| <= N, both sublattices."""
        if half_width < 1:
            raise InvalidRegionError(f"box half-width must be >= 1, got {half_width}")
        return cls(RegionKind.BOX, half_width=half_width)

    @classmethod
    def ball(cls, center: Site, radius: int) -> "Region":
        """Sites within hop distance `radius` of `center`."""
        if radius < 1:
            raise InvalidRegionError(f"ball radius must be >= 1, got {radius}")
        return cls(RegionKind.BALL, center=center, radius=radius)

    @cached_property
    def sites(self) -> Tuple[Site, ...]:
        if self.kind is RegionKind.BOX:
            n = self.half_width
            return tuple(
                Site(n1, n2, sub)
                for n1 in range(-n, n + 1)
                for n2 in range(-n, n + 1)
                for sub in (Sublattice.A, Sublattice.B)
            )
        reached = _bfs(self.center, self.radius)
        return tuple(sorted(reached))

    @cached_property
    def _index(self) -> Dict[Site, int]:
        return {s: k for k, s in enumerate(self.sites)}

    def __len__(self) -> int:
        return len(self.sites)

    def __contains__(self, site: Site) -> bool:
        return site in self._index

    def lookup(self, site: Site) -> Optional[int]:
        """Linear index of a site, or None when the site is absent."""
        return self._index.get(site)

    def describe(self) -> str:
        if self.kind is RegionKind.BOX:
            return f"Box({self.half_width})"
        return f"Ball({self.center}, {self.radius})"

    @cached_property
    def edges(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Oriented in-region hops as (rows, cols, exponents) with H[row, col] = e^{i m phi}."""
        rows: List[int] = []
        cols: List[int] = []
        exps: List[int] = []
        index = self._index
        for k, s in enumerate(self.sites):
            for t, m in neighbors(s):
                j = index.get(t)
                if j is not None:
                    rows.append(k)
                    cols.append(j)
                    exps.append(m)
        return (
            np.asarray(rows, dtype=np.int64),
            np.asarray(cols, dtype=np.int64),
            np.asarray(exps, dtype=np.int64),
        )

    @cached_property
    def sublattice_signs(self) -> np.ndarray:
        """+1 on A, -1 on B (the chiral operator S)."""
        return np.array([1.0 if s.sub is Sublattice.A else -1.0 for s in self.sites])

    def hop_distances(self, center: Site) -> np.ndarray:
        """Hop distance from `center` along in-region paths; -1 where unreachable."""
        start = self.lookup(center)
        if start is None:
            raise InvalidRegionError(f"{center} is not in {self.describe()}")
        dist = np.full(len(self), -1, dtype=np.int64)
        dist[start] = 0
        queue = deque([center])
        while queue:
            s = queue.popleft()
            d = dist[self._index[s]]
            for t, _ in neighbors(s):
                j = self._index.get(t)
                if j is not None and dist[j] < 0:
                    dist[j] = d + 1
                    queue.append(t)
        return dist

    def boundary_distance(self, center: Site) -> int:
        """Hop distance from `center` to the nearest site with a neighbour outside the region."""
        dist = self.hop_distances(center)
        rows, _, _ = self.edges
        degree = np.bincount(rows, minlength=len(self))
        boundary = np.flatnonzero((degree < 3) & (dist >= 0))
        if boundary.size == 0:
            return int(dist.max()) + 1
        return int(dist[boundary].min())

    def is_rotation_invariant(self, center: Site) -> bool:
        return all(rotation_map(s, center) in self for s in self.sites)


def _bfs(center: Site, radius: int) -> List[Site]:
    seen = {center: 0}
    queue = deque([center])
    while queue:
        s = queue.popleft()
        d = seen[s]
        if d == radius:
            continue
        for t, _ in neighbors(s):
            if t not in seen:
                seen[t] = d + 1
                queue.append(t)
    logger.debug(f"Ball around {center} with radius {radius} holds {len(seen)} sites")
    return list(seen)


def enumerate_region(region: Region) -> Tuple[Site, ...]:
    """Deterministic site list of a region (lexicographic cells, A before B)."""
    return region.sites
