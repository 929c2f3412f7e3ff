"""
CSV and plain-text writers for pipeline outputs.
Every file uses LF line endings and 17-significant-digit floats; rows follow the
deterministic order of the data they come from.
"""
import csv
import io
import logging
from pathlib import Path
from typing import Iterable, List, Sequence, Union

from src.backend.bilayer import BilayerState
from src.backend.curve import CurveSample
from src.backend.hamiltonian import HermitianOperator, LatticeState, dump_triplets
from src.backend.spectral import BandData

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

BUTTERFLY_HEADER = ["p", "q", "alpha", "band_index", "emin", "emax"]
STATE_HEADER = ["n1", "n2", "sublattice", "re", "im"]
BILAYER_HEADER = ["layer"] + STATE_HEADER
CURVE_HEADER = ["phi", "E", "secular_residual", "state_residual", "gamma", "embedded_flag"]


def fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _write(path: PathLike, text: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(text)
    logger.info(f"Wrote {path}")


def butterfly_csv(data: Sequence[BandData]) -> str:
    """One row per (flux, band) with the band's [emin, emax]."""
    rows: List[List[str]] = []
    for bands in data:
        f = bands.flux
        for index, (lo, hi) in enumerate(bands.intervals.tolist()):
            rows.append([str(f.p), str(f.q), fmt(f.alpha), str(index), fmt(lo), fmt(hi)])
    return _csv_text(BUTTERFLY_HEADER, rows)


def state_rows(state: LatticeState) -> List[List[str]]:
    return [
        [str(s.n1), str(s.n2), s.sub.value, fmt(z.real), fmt(z.imag)]
        for s, z in zip(state.region.sites, state.amplitudes.tolist())
    ]


def state_csv(state: LatticeState) -> str:
    return _csv_text(STATE_HEADER, state_rows(state))


def bilayer_csv(state: BilayerState) -> str:
    rows = [[str(a)] + row for a in (1, 2) for row in state_rows(state.layer(a))]
    return _csv_text(BILAYER_HEADER, rows)


def curve_csv(samples: Sequence[CurveSample]) -> str:
    def flag(s: CurveSample) -> str:
        return "" if s.embedded is None else str(int(s.embedded))

    rows = [
        [fmt(s.phi), fmt(s.energy), fmt(s.secular_residual), fmt(s.state_residual), fmt(s.gamma), flag(s)]
        for s in samples
    ]
    return _csv_text(CURVE_HEADER, rows)


def write_butterfly(path: PathLike, data: Sequence[BandData]) -> None:
    _write(path, butterfly_csv(data))


def write_state(path: PathLike, state: LatticeState) -> None:
    _write(path, state_csv(state))


def write_bilayer(path: PathLike, state: BilayerState) -> None:
    _write(path, bilayer_csv(state))


def write_curve(path: PathLike, samples: Sequence[CurveSample]) -> None:
    _write(path, curve_csv(samples))


def write_triplets(path: PathLike, op: HermitianOperator) -> None:
    _write(path, dump_triplets(op))


def write_text(path: PathLike, text: str) -> None:
    _write(path, text)
