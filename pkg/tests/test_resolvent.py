import logging

import numpy as np
import pytest

from src.backend.errors import (
    DecayFitError,
    InvalidRegionError,
    IterationCapError,
    OutsideConvergenceRegionError,
    RegionTooSmallError,
)
from src.backend.hamiltonian import Flux, LatticeState, assemble_dense
from src.backend.lattice import ORIGIN, Region, site_a, site_b
from src.backend.resolvent import (
    ResolventMoments,
    check_region,
    decay_fit,
    green_block,
    neumann_solve,
)

PHI0 = 0.7
E0 = 3.5


def test_far_energy_is_nearly_diagonal():
    box = Region.box(3)
    u = neumann_solve(Flux.real(PHI0), 1000.0, LatticeState.delta(box, ORIGIN)).state
    assert u.at(ORIGIN) == pytest.approx(-1e-3, rel=1e-5)
    assert abs(u.at(site_b(0, 0))) == pytest.approx(1e-6, rel=1e-3)


def test_energy_inside_spectrum_hull_is_rejected():
    with pytest.raises(OutsideConvergenceRegionError):
        neumann_solve(Flux.real(PHI0), 2.5, LatticeState.delta(Region.box(2), ORIGIN))


def test_zero_forcing_returns_zero():
    box = Region.box(2)
    result = neumann_solve(Flux.real(PHI0), E0, LatticeState.zeros(box))
    assert result.iterations == 0
    assert result.state.norm() == 0.0


def test_matches_dense_solve(rng):
    box = Region.box(8)
    flux = Flux.real(PHI0)
    f = rng.normal(size=len(box)) + 1j * rng.normal(size=len(box))
    h = assemble_dense(flux, box).matrix
    expected = np.linalg.solve(h - E0 * np.eye(len(box)), f)
    result = neumann_solve(flux, E0, LatticeState(box, f))
    assert np.allclose(result.state.amplitudes, expected, atol=1e-10)
    assert result.max_term_ratio <= 3.0 / E0 + 1e-12


def test_iteration_cap():
    with pytest.raises(IterationCapError):
        neumann_solve(Flux.real(PHI0), E0, LatticeState.delta(Region.box(4), ORIGIN), max_terms=3)


def test_green_block_is_hermitian(ball40, defect_sites):
    v, w = defect_sites
    block = green_block(Flux.real(PHI0), E0, v, w, ball40)
    assert block.hermiticity_defect() <= 1e-10
    assert block.entries[0, 0].real < 0


def test_moments_match_green_block(ball40, defect_sites):
    v, w = defect_sites
    flux = Flux.real(PHI0)
    moments = ResolventMoments(flux, ball40, v, w)
    for energy in (3.5, -4.0, 6.0):
        block = green_block(flux, energy, v, w, ball40)
        assert np.allclose(moments.green(energy), block.entries, atol=1e-10)


def test_moment_table_grows_lazily(ball40, defect_sites):
    moments = ResolventMoments(Flux.real(PHI0), ball40, *defect_sites)
    assert len(moments) == 0
    moments.green(10.0)
    few = len(moments)
    moments.green(3.5)
    assert len(moments) > few


def test_diagonal_green_increases_with_energy(ball40, defect_sites):
    moments = ResolventMoments(Flux.real(PHI0), ball40, *defect_sites)
    values = [moments.green(e)[0, 0].real for e in (3.5, 4.0, 5.0, 8.0)]
    assert values == sorted(values)
    assert values[-1] < 0


def test_green_block_is_stable_under_larger_region(ball40, defect_sites):
    v, w = defect_sites
    flux = Flux.real(PHI0)
    small = green_block(flux, E0, v, w, ball40)
    large = green_block(flux, E0, v, w, Region.ball(ORIGIN, 45))
    assert np.abs(small.entries - large.entries).max() <= 1e-8


def test_moments_need_sites_in_region():
    with pytest.raises(InvalidRegionError):
        ResolventMoments(Flux.real(PHI0), Region.box(1), ORIGIN, site_b(5, 5))


def test_green_block_needs_adjacent_sites(ball40):
    with pytest.raises(InvalidRegionError):
        green_block(Flux.real(PHI0), E0, ORIGIN, site_a(1, 0), ball40)


def test_small_region_is_rejected(defect_sites, caplog):
    v, w = defect_sites
    small = Region.ball(v, 5)
    with pytest.raises(RegionTooSmallError):
        check_region(E0, small, v)
    with pytest.raises(RegionTooSmallError):
        green_block(Flux.real(PHI0), E0, v, w, small)
    with caplog.at_level(logging.WARNING):
        green_block(Flux.real(PHI0), E0, v, w, small, strict=False)
    assert "too small" in caplog.text


def test_decay_fit_recovers_synthetic_rate():
    ball = Region.ball(ORIGIN, 10)
    dist = ball.hop_distances(ORIGIN)
    fit = decay_fit(LatticeState(ball, 2.0 * np.exp(-0.5 * dist)), ORIGIN)
    assert fit.gamma == pytest.approx(0.5, abs=1e-10)
    assert fit.prefactor == pytest.approx(2.0, rel=1e-10)
    assert fit.shells == 11
    assert fit.residual < 1e-10


def test_decay_fit_needs_three_shells():
    ball = Region.ball(ORIGIN, 4)
    with pytest.raises(DecayFitError):
        decay_fit(LatticeState.delta(ball, ORIGIN), ORIGIN)


def test_resolvent_response_decays(ball40):
    u = neumann_solve(Flux.real(PHI0), E0, LatticeState.delta(ball40, ORIGIN)).state
    fit = decay_fit(u, ORIGIN)
    assert fit.gamma >= 0.9 * np.log((E0 - 1.0) / 2.0)
