import xml.etree.ElementTree as ET

import numpy as np
import pytest

from src.backend.curve import CurveSample, EnergyCurve
from src.backend.defect import DefectSpec
from src.backend.errors import EmptyDataError
from src.backend.hamiltonian import Flux
from src.backend.lattice import ORIGIN, Region, site_b
from src.backend.spectral import BandData
from src.service.render import RenderStyle, render_svg

SVG = "{http://www.w3.org/2000/svg}"


def _group(svg: str, gid: str) -> ET.Element:
    root = ET.fromstring(svg)
    for element in root.iter(f"{SVG}g"):
        if element.get("id") == gid:
            return element
    raise AssertionError(f"no group {gid}")


def _bands():
    zero = BandData(Flux.rational(0, 1), (2, 1), np.array([[-3.0, 3.0], [-1.0, 1.0]]))
    half = BandData(
        Flux.rational(1, 2), (2, 1), np.array([[-2.5, -1.0, 1.0, 2.5], [-2.0, -0.5, 0.5, 2.0]])
    )
    return [zero, half]


def _curve():
    spec = DefectSpec(ORIGIN, site_b(0, 0), np.zeros((2, 2)))
    samples = [CurveSample(phi, 3.5 + 0.1 * np.sin(phi), 0.0, 0.0, 0.3) for phi in np.linspace(0, 6.0, 7)]
    return EnergyCurve(spec, 0.0, 1.0, Region.box(1), samples)


def test_single_flux_draws_one_segment_per_band():
    svg = render_svg(_bands()[:1])
    paths = list(_group(svg, "butterfly-1").iter(f"{SVG}path"))
    assert len(paths) == 2


def test_viewport():
    svg = render_svg(_bands())
    root = ET.fromstring(svg)
    assert root.get("viewBox") == "0 0 1200 900"


def test_output_is_byte_identical():
    style = RenderStyle(shifts=(0.0, 0.65), title="butterfly")
    assert render_svg(_bands(), _curve(), style) == render_svg(_bands(), _curve(), style)


def test_overlay_layers():
    svg = render_svg(_bands(), _curve(), RenderStyle(shifts=(0.0, 0.65)))
    for gid in ("butterfly-1", "butterfly-2", "energy-curve"):
        assert _group(svg, gid) is not None
    assert len(list(_group(svg, "butterfly-2").iter(f"{SVG}path"))) == 6


def test_curve_alone():
    svg = render_svg(curve=_curve())
    assert _group(svg, "energy-curve") is not None
    assert "butterfly-1" not in svg


def test_nothing_to_draw():
    with pytest.raises(EmptyDataError):
        render_svg()
    with pytest.raises(EmptyDataError):
        render_svg(curve=EnergyCurve(_curve().spec, 0.0, 1.0, Region.box(1), []))
