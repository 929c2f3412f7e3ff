"""
SVG rendering of butterflies and defect-energy curves.

Figures are built on a bare matplotlib Figure (no pyplot state) and serialized
with a fixed hash salt and no date stamp, so identical inputs give byte-identical
documents. Each butterfly copy is a LineCollection with group id ``butterfly-<i>``
holding one vertical segment per band interval; the curve is the group
``energy-curve``.
"""
import io
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from matplotlib import rc_context
from matplotlib.collections import LineCollection
from matplotlib.figure import Figure

from src.backend.curve import EnergyCurve
from src.backend.errors import EmptyDataError
from src.backend.spectral import BandData

logger = logging.getLogger(__name__)

WIDTH = 1200
HEIGHT = 900
DPI = 72
SVG_RC = {"svg.hashsalt": "magnon", "svg.fonttype": "none"}


@dataclass(frozen=True)
class RenderStyle:
    """Layout options; one butterfly copy is drawn per entry of `shifts`."""
    shifts: Tuple[float, ...] = (0.0,)
    colors: Tuple[str, ...] = ("#1f4e79", "#b03a2e", "#2e7d32")
    curve_color: str = "#000000"
    title: Optional[str] = None


def render_svg(
    bands: Sequence[BandData] = (),
    curve: Optional[EnergyCurve] = None,
    style: RenderStyle = RenderStyle(),
) -> str:
    """
    Render band intervals against alpha = phi / 2 pi, optionally with an E_phi curve.

    Args:
        bands: Band data per rational flux
        curve: Curve to overlay as a polyline
        style: Energy shifts, colors and title

    Returns:
        str: Self-contained SVG document with a 1200x900 viewport

    Raises:
        EmptyDataError: If there is nothing to draw
    """
    if not bands and (curve is None or not curve.samples):
        raise EmptyDataError("render_svg needs band data or a non-empty curve")

    fig = Figure(figsize=(WIDTH / DPI, HEIGHT / DPI), dpi=DPI)
    ax = fig.add_axes((0.08, 0.08, 0.88, 0.86))
    lo, hi = -3.0 + min(style.shifts), 3.0 + max(style.shifts)

    if bands:
        for i, shift in enumerate(style.shifts):
            segments = [
                [(b.flux.alpha, emin + shift), (b.flux.alpha, emax + shift)]
                for b in bands
                for emin, emax in b.intervals.tolist()
            ]
            ax.add_collection(
                LineCollection(
                    segments,
                    colors=style.colors[i % len(style.colors)],
                    linewidths=1.0,
                    gid=f"butterfly-{i + 1}",
                )
            )

    if curve is not None and curve.samples:
        points = [(s.phi / (2.0 * math.pi), s.energy) for s in curve.samples]
        ax.add_collection(
            LineCollection([points], colors=style.curve_color, linewidths=1.0, gid="energy-curve")
        )
        lo = min(lo, min(e for _, e in points))
        hi = max(hi, max(e for _, e in points))
        xs = [x for x, _ in points]
        ax.set_xlim(min(0.0, min(xs)), max(1.0, max(xs)))
    else:
        ax.set_xlim(0.0, 1.0)

    pad = 0.02 * (hi - lo)
    ax.set_ylim(lo - pad, hi + pad)
    ax.set_xlabel("phi / 2 pi")
    ax.set_ylabel("E")
    if style.title:
        ax.set_title(style.title)

    buffer = io.BytesIO()
    with rc_context(SVG_RC):
        fig.savefig(buffer, format="svg", metadata={"Date": None})
    logger.debug(f"Rendered SVG with {len(bands)} fluxes")
    return buffer.getvalue().decode("utf-8")
