import math
from dataclasses import replace

import numpy as np
import pytest

from src.backend import curve as curve_module
from src.backend.bilayer import DEFAULT_K, DEFAULT_M
from src.backend.curve import curve_to_fig5, flag_embedded, track_curve
from src.backend.defect import build_defect, response
from src.backend.errors import BandEdgeError, SampleRejectedError, SecularNotZeroError
from src.backend.hamiltonian import Flux
from src.backend.lattice import ORIGIN, site_b
from src.backend.spectral import butterfly

E0 = 3.5
PHI0 = 0.7

pytestmark = pytest.mark.slow


def test_short_track_from_seed(built_defect, ball40):
    _, _, spec = built_defect
    curve = track_curve(spec, 0.0, 1.0, PHI0, PHI0 + 0.2, 4, E0, ball40)
    assert len(curve.samples) == 5
    assert curve.samples[0].energy == pytest.approx(E0, abs=1e-9)
    assert curve.phis == pytest.approx(np.linspace(PHI0, PHI0 + 0.2, 5))
    for sample in curve.samples:
        assert sample.secular_residual <= 1e-9
        assert sample.state_residual <= 1e-8
        assert sample.gamma >= 0.9 * math.log((abs(sample.energy) - 1.0) / 2.0)


def test_tracking_is_deterministic(built_defect, ball40):
    _, _, spec = built_defect
    first = track_curve(spec, 0.0, 1.0, PHI0, PHI0 + 0.1, 2, E0, ball40)
    second = track_curve(spec, 0.0, 1.0, PHI0, PHI0 + 0.1, 2, E0, ball40)
    assert np.array_equal(first.energies, second.energies)


def test_seed_must_be_a_root(built_defect, ball40):
    _, _, spec = built_defect
    with pytest.raises(SecularNotZeroError):
        track_curve(spec, 0.0, 1.0, PHI0, PHI0 + 0.1, 2, 3.6, ball40)


def test_seed_near_band_is_rejected(built_defect, ball40):
    _, _, spec = built_defect
    with pytest.raises(BandEdgeError):
        track_curve(spec, 0.0, 1.0, PHI0, PHI0 + 0.1, 2, 3.05, ball40)


def _spoil_second_bound_state(monkeypatch, **changes):
    original = curve_module.bound_state
    calls = []

    def spoiled(*args, **kwargs):
        bound = original(*args, **kwargs)
        calls.append(bound)
        return replace(bound, **changes) if len(calls) == 2 else bound

    monkeypatch.setattr(curve_module, "bound_state", spoiled)


def test_sample_with_large_residual_is_rejected(built_defect, ball40, monkeypatch):
    _, _, spec = built_defect
    _spoil_second_bound_state(monkeypatch, residual=1e-3)
    with pytest.raises(SampleRejectedError) as info:
        track_curve(spec, 0.0, 1.0, PHI0, PHI0 + 0.1, 2, E0, ball40)
    assert info.value.last_sample.phi == pytest.approx(PHI0)
    assert info.value.last_sample.energy == pytest.approx(E0, abs=1e-9)


def test_sample_decaying_too_slowly_is_rejected(built_defect, ball40, monkeypatch):
    _, _, spec = built_defect
    monkeypatch.setattr(curve_module, "gamma_bound", lambda energy: math.inf)
    with pytest.raises(SampleRejectedError) as info:
        track_curve(spec, 0.0, 1.0, PHI0, PHI0 + 0.1, 2, E0, ball40)
    assert info.value.last_sample is None


def test_steps_must_be_positive(built_defect, ball40):
    _, _, spec = built_defect
    with pytest.raises(ValueError):
        track_curve(spec, 0.0, 1.0, PHI0, PHI0 + 0.1, 0, E0, ball40)


@pytest.fixture(scope="module")
def full_turn(ball40):
    spec = build_defect(response(Flux.real(0.0), E0, ORIGIN, ball40), ORIGIN, site_b(0, 0))
    return curve_to_fig5(
        DEFAULT_K, DEFAULT_M, spec, 0.0, 2.0 * math.pi, 200, E0, ball40,
        qmax=6, m1=8, m2=8, fatten=1e-9,
    )


def test_curve_closes_over_a_period(full_turn):
    energies = full_turn.curve.energies
    assert len(energies) == 201
    assert energies[-1] == pytest.approx(energies[0], abs=1e-8)


def test_curve_is_smooth(full_turn):
    energies = full_turn.curve.energies
    assert np.abs(np.diff(energies)).max() <= 0.2
    assert np.all(np.abs(energies) >= 3.1)
    second = np.abs(np.diff(energies, 2))
    assert second.max() <= 10.0 * np.median(second)


def test_every_sample_is_verified(full_turn):
    for sample in full_turn.curve.samples:
        assert sample.state_residual <= 1e-8
        assert sample.gamma >= 0.9 * math.log((abs(sample.energy) - 1.0) / 2.0)


def test_curve_enters_second_channel_continuum(full_turn):
    assert full_turn.kappa == pytest.approx((0.0, 0.65))
    assert full_turn.flags[0]
    assert full_turn.embedded_count > 0
    assert [str(r) for r in full_turn.rationals[:1]] == ["0/1"]


def test_far_shift_flags_nothing(full_turn):
    samples, _ = flag_embedded(full_turn.curve, 100.0, full_turn.bands, full_turn.qmax)
    assert not any(s.embedded for s in samples)


def test_fattening_only_adds_flags(full_turn):
    bands = butterfly(6, 8, 8)
    plain, _ = flag_embedded(full_turn.curve, 0.65, bands, 6)
    fat, _ = flag_embedded(full_turn.curve, 0.65, bands, 6, fatten=0.5)
    for a, b in zip(plain, fat):
        assert b.embedded or not a.embedded
