"""
Invariant suite behind the ``verify`` subcommand.
Each check runs a desk-scale version of a model invariant against an oracle and
reports the worst deviation it measured. A check that raises counts as failed.
"""
import logging
import math
from typing import Callable, List, Tuple

import numpy as np
from pydantic import BaseModel

from src.backend.bilayer import (
    DEFAULT_K,
    DEFAULT_M,
    BilayerState,
    apply_bilayer,
    bilayer_torus_hamiltonian,
    embedded_state,
    embedding_check,
    hybrid_components,
    hybridize,
)
from src.backend.curve import track_curve
from src.backend.defect import build_defect, response
from src.backend.hamiltonian import (
    Flux,
    LatticeState,
    assemble_dense,
    face_flux_exponents,
    gauge_transform,
    region_operator,
    torus_hamiltonian,
)
from src.backend.lattice import ORIGIN, Region, site_b
from src.backend.resolvent import neumann_solve
from src.backend.spectral import band_structure, farey, hermitian_eigen
from src.infra.telemetry import get_tracer
from src.service.defect_service import DefectService

logger = logging.getLogger(__name__)
tracer = get_tracer(__name__)

SEED = 20240611

# E0 - kappa_2 falls in the top band of 1/3 and in [-3, 3] at zero flux
EMBEDDED_E0 = 3.16
EMBEDDED_RADIUS = 100


class CheckResult(BaseModel):
    name: str
    passed: bool
    value: float
    detail: str


class VerifyReport(BaseModel):
    passed: bool
    checks: List[CheckResult]


Check = Callable[[np.random.Generator], Tuple[bool, float, str]]


def _zero_field(rng: np.random.Generator) -> Tuple[bool, float, str]:
    edges = band_structure(Flux.rational(0, 1), 32, 32).samples
    dirac = band_structure(Flux.rational(0, 1), 36, 36).samples
    err = max(abs(edges.max() - 3.0), abs(edges.min() + 3.0), float(np.abs(dirac).min()))
    return err <= 1e-9, err, "band edges at +-3 (32x32) and touching at 0 (36x36)"


def _torus_in_bands(rng: np.random.Generator) -> Tuple[bool, float, str]:
    worst = 0.0
    for flux in farey(8):
        bands = band_structure(flux, 24, 24)
        eig = np.linalg.eigvalsh(torus_hamiltonian(3 * flux.q, 6, flux).matrix)
        lo, hi = bands.intervals[:, 0], bands.intervals[:, 1]
        gaps = np.maximum(lo[None, :] - eig[:, None], eig[:, None] - hi[None, :]).clip(min=0.0)
        worst = max(worst, float(gaps.min(axis=1).max()))
    return worst <= 1e-8, worst, "torus eigenvalues inside the Bloch band union, q <= 8"


def _chiral_symmetry(rng: np.random.Generator) -> Tuple[bool, float, str]:
    worst = 0.0
    for flux in farey(5):
        w = band_structure(flux, 8, 8).samples
        worst = max(worst, float(np.abs(w + w[:, ::-1]).max()))
    return worst <= 1e-10, worst, "band spectrum symmetric under E -> -E"


def _periodicity(rng: np.random.Generator) -> Tuple[bool, float, str]:
    worst = 0.0
    for flux in farey(5):
        shifted = Flux.rational(flux.p + flux.q, flux.q)
        a = band_structure(flux, 8, 8).samples
        b = band_structure(shifted, 8, 8).samples
        mirror = band_structure(Flux.rational(flux.q - flux.p, flux.q), 8, 8).intervals
        worst = max(worst, float(np.abs(a - b).max()))
        worst = max(worst, float(np.abs(band_structure(flux, 8, 8).intervals - mirror).max()))
    return worst <= 1e-10, worst, "bands invariant under phi -> phi + 2 pi and alpha -> 1 - alpha"


def _gauge_invariance(rng: np.random.Generator) -> Tuple[bool, float, str]:
    flux = Flux.rational(1, 3)
    h = torus_hamiltonian(12, 4, flux)
    reference = np.linalg.eigvalsh(h.matrix)
    worst = 0.0
    for _ in range(20):
        g = gauge_transform(h, rng.uniform(0.0, 2.0 * math.pi, h.dimension))
        worst = max(worst, float(np.abs(np.linalg.eigvalsh(g.matrix) - reference).max()))
    return worst <= 1e-10, worst, "20 random gauges on the 12x4 torus at 1/3"


def _face_flux(rng: np.random.Generator) -> Tuple[bool, float, str]:
    sums = face_flux_exponents(Region.box(3))
    bad = sum(1 for s in sums if s != -1)
    return bad == 0 and len(sums) > 0, float(bad), f"{len(sums)} faces of Box(3) carry exponent sum -1"


def _hermiticity(rng: np.random.Generator) -> Tuple[bool, float, str]:
    defect = region_operator(Flux.real(0.7), Region.box(6)).hermiticity_defect(rng)
    return defect <= 1e-12, defect, "<x, H y> = <H x, y> on Box(6)"


def _neumann_vs_dense(rng: np.random.Generator) -> Tuple[bool, float, str]:
    flux = Flux.real(0.7)
    region = Region.box(6)
    h = assemble_dense(flux, region).matrix
    worst = 0.0
    for energy in (3.2, 4.0, 10.0):
        f = np.zeros(len(region), dtype=complex)
        f[rng.choice(len(region), 4, replace=False)] = rng.normal(size=4) + 1j * rng.normal(size=4)
        u = neumann_solve(flux, energy, LatticeState(region, f)).state.amplitudes
        exact = np.linalg.solve(h - energy * np.eye(len(region)), f)
        worst = max(worst, float(np.linalg.norm(u - exact) / np.linalg.norm(exact)))
    return worst <= 1e-9, worst, "Neumann series against dense solves on Box(6)"


def _defect_state(rng: np.random.Generator) -> Tuple[bool, float, str]:
    report = DefectService().single_layer(Flux.real(0.7), 3.5, 40).report
    ok = report.passed and report.rotation_deviation <= 1e-8
    return ok, report.state_residual, f"residual, gamma {report.gamma:.3f} and rotation symmetry at E=3.5"


def _eigenvalue_isolation(rng: np.random.Generator) -> Tuple[bool, float, str]:
    flux, energy = Flux.real(0.7), 3.5
    spec = build_defect(response(flux, energy, ORIGIN, Region.ball(ORIGIN, 40)), ORIGIN, site_b(0, 0))
    box = Region.box(10)
    h = assemble_dense(flux, box).matrix
    ix = [box.lookup(spec.v), box.lookup(spec.w)]
    h[np.ix_(ix, ix)] += spec.vtilde
    w, _ = hermitian_eigen(h)
    near = w[np.abs(w - energy) <= 0.05]
    gap = float(np.abs(near - energy).min()) if near.size else math.inf
    return near.size == 1, gap, f"{near.size} eigenvalue(s) of H + V on Box(10) within 0.05 of E"


def _bilayer(rng: np.random.Generator) -> Tuple[bool, float, str]:
    flux = Flux.rational(1, 3)
    pair = hybridize(DEFAULT_K, DEFAULT_M)
    region = Region.ball(ORIGIN, EMBEDDED_RADIUS)
    result = embedded_state(DEFAULT_K, DEFAULT_M, flux, EMBEDDED_E0, ORIGIN, site_b(0, 0), region)
    embedded = all(
        embedding_check(EMBEDDED_E0, at, DEFAULT_K, 24, 24).embedded for at in (Flux.rational(0, 1), flux)
    )

    small = Region.box(4)
    spec = result.spec
    cross = 0.0
    for _ in range(10):
        g = rng.normal(size=len(small)) + 1j * rng.normal(size=len(small))
        state = BilayerState.product(pair.xi[:, 0], LatticeState(small, g))
        _, leak = hybrid_components(pair, apply_bilayer(flux, pair.K, spec, pair.M, state))
        cross = max(cross, leak.norm() / state.norm())

    h1 = np.linalg.eigvalsh(torus_hamiltonian(3, 3, flux).matrix)
    union = np.sort(np.concatenate([h1 + pair.kappa[0], h1 + pair.kappa[1]]))
    bilayer = np.linalg.eigvalsh(bilayer_torus_hamiltonian(3, 3, flux, DEFAULT_K).matrix)
    spread = float(np.abs(bilayer - union).max())

    worst = max(result.residual, cross, spread)
    ok = embedded and result.residual <= 1e-8 and cross <= 1e-12 and spread <= 1e-10
    return ok, worst, f"E0={EMBEDDED_E0} embedded at 0/1 and 1/3, residual, cross-coupling and torus spectrum"


def _short_curve(rng: np.random.Generator) -> Tuple[bool, float, str]:
    pair = hybridize(DEFAULT_K, DEFAULT_M)
    kappa1, mu1, _ = pair.channel(1)
    region = Region.ball(ORIGIN, 40)
    energy = kappa1 + 3.5
    u = response(Flux.real(0.0), energy - kappa1, ORIGIN, region)
    spec = build_defect(u, ORIGIN, site_b(0, 0)).scaled(1.0 / mu1)
    curve = track_curve(spec, kappa1, mu1, 0.0, 0.5, 10, energy, region)
    worst = max(s.state_residual for s in curve.samples)
    return worst <= 1e-8, worst, f"{len(curve.samples)} tracked samples on [0, 0.5]"


CHECKS: List[Tuple[str, Check]] = [
    ("zero_field_bands", _zero_field),
    ("torus_in_bands", _torus_in_bands),
    ("chiral_symmetry", _chiral_symmetry),
    ("flux_periodicity", _periodicity),
    ("gauge_invariance", _gauge_invariance),
    ("face_flux", _face_flux),
    ("hermiticity", _hermiticity),
    ("neumann_vs_dense", _neumann_vs_dense),
    ("defect_state", _defect_state),
    ("eigenvalue_isolation", _eigenvalue_isolation),
    ("bilayer", _bilayer),
    ("short_curve", _short_curve),
]


def run_checks() -> VerifyReport:
    """Run every check with a fixed RNG seed and collect the results."""
    rng = np.random.default_rng(SEED)
    results: List[CheckResult] = []
    with tracer.start_as_current_span("verify"):
        for name, check in CHECKS:
            try:
                passed, value, detail = check(rng)
            except Exception as e:
                logger.error(f"Check {name} raised: {e}")
                passed, value, detail = False, math.nan, str(e)
            logger.info(f"Check {name}: {'ok' if passed else 'FAILED'} ({value:.3e})")
            results.append(CheckResult(name=name, passed=passed, value=value, detail=detail))
    return VerifyReport(passed=all(r.passed for r in results), checks=results)
