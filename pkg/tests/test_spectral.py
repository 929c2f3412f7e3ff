import numpy as np
import pytest

from src.backend.errors import IrrationalFluxError, NotHermitianError
from src.backend.hamiltonian import Flux, region_operator, torus_hamiltonian
from src.backend.lattice import Region
from src.backend.spectral import (
    BandData,
    band_structure,
    bloch_matrix,
    butterfly,
    eigh_stack,
    farey,
    hermitian_eigen,
    jacobi_eigh,
    k_grid,
    nearest_rational,
    zero_field_dispersion,
)
from src.config import EigenSolver


def _random_hermitian(rng, batch, n):
    a = rng.normal(size=(batch, n, n)) + 1j * rng.normal(size=(batch, n, n))
    return a + np.conj(np.transpose(a, (0, 2, 1)))


def test_jacobi_matches_lapack(rng):
    stack = _random_hermitian(rng, 6, 10)
    w, v = jacobi_eigh(stack)
    for k in range(6):
        assert np.allclose(w[k], np.linalg.eigvalsh(stack[k]), atol=1e-11)
        assert np.allclose(stack[k] @ v[k], v[k] * w[k], atol=1e-10)
        assert np.allclose(v[k].conj().T @ v[k], np.eye(10), atol=1e-12)


def test_jacobi_handles_diagonal_input():
    w, v = jacobi_eigh(np.diag([3.0, -1.0, 2.0])[None, :, :])
    assert np.array_equal(w[0], [-1.0, 2.0, 3.0])
    assert np.allclose(np.abs(v[0]).sum(axis=0), 1.0)


def test_backends_agree(rng):
    stack = _random_hermitian(rng, 3, 8)
    w_jacobi, _ = eigh_stack(stack, EigenSolver.JACOBI)
    w_lapack, _ = eigh_stack(stack, EigenSolver.LAPACK)
    assert np.allclose(w_jacobi, w_lapack, atol=1e-11)


def test_hermitian_eigen_rejects_bad_input():
    with pytest.raises(NotHermitianError):
        hermitian_eigen(np.array([[0.0, 1.0], [0.5, 0.0]]))
    with pytest.raises(NotHermitianError):
        hermitian_eigen(region_operator(Flux.real(0.0), Region.box(1)))


def test_bloch_matrix_at_zero_flux():
    h = bloch_matrix(Flux.rational(0, 1), 0.0, 0.0).matrix
    assert np.allclose(h, [[0, 3], [3, 0]])


def test_irrational_flux_has_no_bands():
    with pytest.raises(IrrationalFluxError):
        band_structure(Flux.real(0.7), 8, 8)


def test_grid_too_small():
    with pytest.raises(ValueError):
        band_structure(Flux.rational(1, 3), 3, 8)


def test_k_grid_contains_origin():
    k1, k2 = k_grid(4, 6)
    assert k1.size == 24
    assert (k1[0], k2[0]) == (0.0, 0.0)


def test_zero_field_band_edges():
    data = band_structure(Flux.rational(0, 1), 36, 36)
    assert data.band_count == 2
    lower, upper = data.intervals
    assert lower == pytest.approx([-3.0, 0.0], abs=1e-12)
    assert upper == pytest.approx([0.0, 3.0], abs=1e-12)
    (lo, hi), = data.union()
    assert (lo, hi) == pytest.approx((-3.0, 3.0), abs=1e-12)


def test_zero_field_matches_closed_form():
    data = band_structure(Flux.rational(0, 1), 8, 8)
    k1, k2 = k_grid(8, 8)
    expected = np.array([zero_field_dispersion(a, b) for a, b in zip(k1, k2)])
    assert np.allclose(data.samples, expected, atol=1e-12)


def test_spectrum_is_symmetric():
    data = band_structure(Flux.rational(2, 7), 8, 8)
    assert data.band_count == 14
    assert np.allclose(data.samples, -data.samples[:, ::-1], atol=1e-12)


def test_flux_periodicity_is_exact():
    a = band_structure(Flux.rational(1, 3), 8, 8)
    b = band_structure(Flux.rational(4, 3), 8, 8)
    assert np.array_equal(a.samples, b.samples)


def test_mirror_flux_has_same_bands():
    for flux in farey(8):
        mirror = Flux.rational(flux.q - flux.p, flux.q)
        a = band_structure(flux, 8, 8).intervals
        b = band_structure(mirror, 8, 8).intervals
        assert np.abs(a - b).max() <= 1e-10, str(flux)


def test_result_independent_of_worker_count():
    one = band_structure(Flux.rational(1, 5), 24, 24, workers=1)
    many = band_structure(Flux.rational(1, 5), 24, 24, workers=4)
    assert np.array_equal(one.samples, many.samples)


def test_torus_eigenvalues_lie_in_bands():
    flux = Flux.rational(1, 3)
    data = band_structure(flux, 12, 12)
    w = np.linalg.eigvalsh(torus_hamiltonian(6, 3, flux).matrix)
    assert all(data.contains(e, fatten=1e-9) for e in w)


@pytest.mark.slow
def test_torus_spectra_lie_in_bands_up_to_q8():
    for flux in farey(8):
        data = band_structure(flux, 24, 24)
        w = np.linalg.eigvalsh(torus_hamiltonian(3 * flux.q, 6, flux).matrix)
        assert all(data.contains(e, fatten=1e-8) for e in w), str(flux)


def test_farey_sequence():
    fluxes = farey(10)
    assert len(fluxes) == 33
    assert str(fluxes[0]) == "0/1"
    assert str(fluxes[-1]) == "1/1"
    alphas = [f.alpha for f in fluxes]
    assert alphas == sorted(alphas)
    with pytest.raises(ValueError):
        farey(0)


def test_nearest_rational():
    assert str(nearest_rational(0.3, 10)) == "3/10"
    assert str(nearest_rational(1.5, 4)) == "1/2"
    # equidistant from 0/1 and 1/1: smaller p wins
    assert str(nearest_rational(0.5, 1)) == "0/1"


def test_butterfly_order_and_size():
    data = butterfly(3, 4, 4)
    assert [str(d.flux) for d in data] == ["0/1", "1/3", "1/2", "2/3", "1/1"]
    assert [d.band_count for d in data] == [2, 6, 4, 6, 2]


def test_band_data_queries():
    samples = np.array([[-2.0, -1.0, 1.0, 2.0], [-1.0, -0.5, 0.5, 1.0]])
    data = BandData(flux=Flux.rational(1, 2), kgrid=(1, 2), samples=samples)
    assert data.union() == [(-2.0, -0.5), (0.5, 2.0)]
    assert data.contains(-0.5)
    assert not data.contains(0.0)
    assert data.contains(0.47, fatten=0.05)
    assert data.edge_distance(0.0) == pytest.approx(0.5)
