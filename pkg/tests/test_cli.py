import json
from pathlib import Path

import pytest

from src.cli.router import dispatch

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def test_butterfly_csv_covers_farey_fluxes(tmp_path):
    out = tmp_path / "butterfly.csv"
    assert dispatch(["butterfly", "--config", str(FIXTURES / "butterfly.conf"), "--kgrid", "4", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "p,q,alpha,band_index,emin,emax"
    fluxes = {tuple(line.split(",")[:2]) for line in lines[1:]}
    assert len(fluxes) == 33
    assert len(lines) - 1 == sum(2 * int(q) for _, q in fluxes)


def test_butterfly_outputs_are_deterministic(tmp_path):
    runs = []
    for name in ("a", "b"):
        csv_path, svg_path = tmp_path / f"{name}.csv", tmp_path / f"{name}.svg"
        code = dispatch(["butterfly", "--qmax", "4", "--kgrid", "6", "--out", str(csv_path), "--svg", str(svg_path)])
        assert code == 0
        runs.append((csv_path.read_bytes(), svg_path.read_bytes()))
    assert runs[0] == runs[1]
    assert b'id="butterfly-1"' in runs[0][1]


def test_butterfly_to_stdout(capsys):
    assert dispatch(["butterfly", "--qmax", "1", "--kgrid", "4"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 1 + 4


def test_bands_for_one_flux(capsys):
    assert dispatch(["bands", "--flux", "1/3", "--kgrid", "6"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 1 + 6
    assert all(line.startswith("1,3,") for line in lines[1:])


def test_bands_need_rational_flux(capsys):
    assert dispatch(["bands", "--flux", "0.7"]) == 1
    assert "rational" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["spin"],
        ["butterfly", "--bogus", "1"],
        ["bands", "--kgrid", "many"],
        ["verify", "--qmax", "3"],
    ],
)
def test_usage_errors(argv):
    assert dispatch(argv) == 2


def test_bad_config_file(tmp_path, capsys):
    path = tmp_path / "bad.conf"
    path.write_text("qmax = 4\ncolour = blue\n")
    assert dispatch(["butterfly", "--config", str(path)]) == 2
    assert "invalid configuration" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert dispatch(["butterfly", "--config", str(tmp_path / "absent.conf")]) == 2


def test_defect_report(tmp_path, capsys):
    state, dump = tmp_path / "state.csv", tmp_path / "h.txt"
    code = dispatch(
        ["defect", "--config", str(FIXTURES / "defect.conf"), "--out", str(state), "--dump", str(dump)]
    )
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"]
    assert report["flux"] == "0.7"
    assert report["state_residual"] <= 1e-8
    assert report["gamma"] >= report["gamma_bound"]
    assert report["defect_sites"] == ["A(0,0)", "B(0,0)"]
    assert len(state.read_text().splitlines()) == report["sites"] + 1
    first = dump.read_text().splitlines()[0].split()
    assert len(first) == 4


def test_single_site_defect_report(capsys):
    assert dispatch(["defect", "--config", str(FIXTURES / "defect.conf"), "--single-site"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["vtilde_re"][1][1] == 0.0
    assert report["passed"]


def test_defect_inside_band_is_a_domain_error():
    assert dispatch(["defect", "--flux", "0.7", "--E0", "2.5"]) == 1


def test_embedded_report(tmp_path, capsys):
    out = tmp_path / "bilayer.csv"
    code = dispatch(["embedded", "--config", str(FIXTURES / "embedded.conf"), "--out", str(out)])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"]
    assert report["embedded"]
    assert report["energy"] == pytest.approx(3.16)
    assert report["kappa"] == pytest.approx([0.0, 0.65])
    assert report["mu"] == pytest.approx([1.0, 0.6])
    assert report["nearest_rational"] == "1/3"
    assert [c["channel"] for c in report["channels"]] == [1, 2]
    assert not report["channels"][0]["inside"]
    assert report["channels"][1]["inside"]
    assert out.read_text().splitlines()[0] == "layer,n1,n2,sublattice,re,im"


@pytest.mark.slow
def test_short_curve(tmp_path):
    out, svg = tmp_path / "curve.csv", tmp_path / "curve.svg"
    argv = [
        "curve", "--config", str(FIXTURES / "fig5.conf"),
        "--phi-end", "0.2", "--steps", "4", "--qmax", "3", "--kgrid", "4",
        "--out", str(out), "--svg", str(svg),
    ]
    assert dispatch(argv) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "phi,E,secular_residual,state_residual,gamma,embedded_flag"
    assert len(lines) == 6
    assert {line.rsplit(",", 1)[1] for line in lines[1:]} <= {"0", "1"}
    text = svg.read_text()
    for gid in ("butterfly-1", "butterfly-2", "energy-curve"):
        assert f'id="{gid}"' in text


@pytest.mark.slow
def test_verify_suite(tmp_path, capsys):
    out = tmp_path / "verify.json"
    assert dispatch(["verify", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["passed"]
    assert all(check["passed"] for check in report["checks"])


def test_main_entry_point(capsys):
    from src.main import main

    assert main(["bands", "--flux", "1/2", "--kgrid", "4"]) == 0
    assert capsys.readouterr().out.startswith("p,q,alpha")
