import pytest

from src.backend.errors import InvalidRegionError
from src.backend.lattice import (
    ORIGIN,
    Region,
    Sublattice,
    enumerate_region,
    face_exponent_sum,
    hop_exponent,
    is_adjacent,
    neighbors,
    rotation_map,
    site_a,
    site_b,
)


def test_neighbors_of_a_site():
    assert neighbors(site_a(2, 5)) == [
        (site_b(2, 5), 0),
        (site_b(3, 5), 0),
        (site_b(2, 6), -2),
    ]


def test_neighbors_of_b_site():
    assert neighbors(site_b(2, 5)) == [
        (site_a(2, 5), 0),
        (site_a(1, 5), 0),
        (site_a(2, 4), 2),
    ]


def test_reverse_edges_negate_exponents():
    for n1 in range(-3, 4):
        for n2 in range(-3, 4):
            for s in (site_a(n1, n2), site_b(n1, n2)):
                for t, m in neighbors(s):
                    assert hop_exponent(t, s) == -m


def test_exponent_from_b01_to_origin_is_zero():
    assert hop_exponent(site_b(0, 1), ORIGIN) == 0


def test_bipartite():
    for s in (site_a(1, -2), site_b(-4, 3)):
        assert all(t.sub is not s.sub for t, _ in neighbors(s))


def test_face_sums_are_minus_one():
    for n1 in range(-4, 5):
        for n2 in range(-4, 5):
            assert face_exponent_sum(n1, n2) == -1


def test_rotation_permutes_origin_neighbors():
    assert rotation_map(site_b(0, 0)) == site_b(1, 0)
    assert rotation_map(site_b(1, 0)) == site_b(0, 1)
    assert rotation_map(site_b(0, 1)) == site_b(0, 0)


def test_rotation_is_order_three_automorphism():
    for n1 in range(-3, 4):
        for n2 in range(-3, 4):
            for s in (site_a(n1, n2), site_b(n1, n2)):
                assert rotation_map(rotation_map(rotation_map(s))) == s
                for t, _ in neighbors(s):
                    assert is_adjacent(rotation_map(s), rotation_map(t))


def test_rotation_about_other_center():
    center = site_a(2, -1)
    assert rotation_map(center, center) == center
    assert rotation_map(site_b(2, -1), center) == site_b(3, -1)


def test_rotation_center_must_be_a_site():
    with pytest.raises(InvalidRegionError):
        rotation_map(ORIGIN, site_b(0, 0))


def test_box_enumeration_order():
    box = Region.box(1)
    assert len(box) == 18
    assert box.sites[0] == site_a(-1, -1)
    assert box.sites[1] == site_b(-1, -1)
    assert box.sites[-1] == site_b(1, 1)
    assert box.lookup(ORIGIN) == 8


def test_ball_sizes():
    assert len(Region.ball(ORIGIN, 1)) == 4
    assert len(Region.ball(ORIGIN, 2)) == 10


def test_ball_is_sorted_and_deterministic():
    a = Region.ball(ORIGIN, 5).sites
    assert list(a) == sorted(a)
    assert a == Region.ball(ORIGIN, 5).sites


@pytest.mark.parametrize("make", [lambda: Region.box(0), lambda: Region.ball(ORIGIN, 0)])
def test_invalid_regions(make):
    with pytest.raises(InvalidRegionError):
        make()


def test_ball_is_rotation_invariant():
    assert Region.ball(ORIGIN, 7).is_rotation_invariant(ORIGIN)
    assert not Region.box(3).is_rotation_invariant(ORIGIN)


def test_hop_distances_and_boundary():
    ball = Region.ball(ORIGIN, 6)
    dist = ball.hop_distances(ORIGIN)
    assert dist.min() == 0
    assert dist.max() == 6
    assert ball.boundary_distance(ORIGIN) == 6


def test_edges_are_symmetric():
    rows, cols, exps = Region.box(2).edges
    forward = {(r, c): m for r, c, m in zip(rows.tolist(), cols.tolist(), exps.tolist())}
    assert all(forward[(c, r)] == -m for (r, c), m in forward.items())


def test_sublattice_signs():
    box = Region.box(1)
    signs = box.sublattice_signs
    assert all((signs[k] > 0) == (s.sub is Sublattice.A) for k, s in enumerate(box.sites))


def test_enumeration_is_a_bijection():
    ball = Region.ball(site_a(1, -1), 4)
    sites = enumerate_region(ball)
    assert [ball.lookup(s) for s in sites] == list(range(len(ball)))
    assert ball.lookup(site_a(40, 40)) is None
