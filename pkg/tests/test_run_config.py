from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from src.backend.bilayer import DEFAULT_K, DEFAULT_M
from src.cli.run_config import RunConfig, matrix_from_reals, parse_pairs

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def test_defaults():
    config = RunConfig()
    assert config.flux_value.q == 3
    assert np.allclose(config.k_matrix, DEFAULT_K)
    assert np.allclose(config.m_matrix, DEFAULT_M)


def test_parse_pairs_skips_comments_and_blanks():
    pairs = parse_pairs("# header\n\nqmax = 4  # inline\n flux=1/2\n")
    assert pairs == {"qmax": "4", "flux": "1/2"}


@pytest.mark.parametrize("text", ["qmax 4\n", "qmax = 4\nqmax = 5\n"])
def test_parse_pairs_errors(text):
    with pytest.raises(ValueError):
        parse_pairs(text)


def test_fixture_configs_load():
    for path in sorted(FIXTURES.glob("*.conf")):
        RunConfig.read(path)


def test_curve_fixture_values():
    config = RunConfig.read(FIXTURES / "fig5.conf")
    assert config.steps == 200
    assert config.qmax == 12
    assert np.allclose(config.k_matrix, DEFAULT_K)
    assert np.allclose(config.m_matrix, DEFAULT_M)


def test_round_trip():
    config = RunConfig.read(FIXTURES / "fig5.conf")
    assert RunConfig.parse_text(config.to_text()) == config


def test_overrides_win():
    config = RunConfig.read(FIXTURES / "butterfly.conf", {"qmax": 3, "out": None})
    assert config.qmax == 3
    assert config.kgrid == 24


@pytest.mark.parametrize(
    "text",
    [
        "bogus = 1\n",
        "kgrid = 2\n",
        "flux = one third\n",
        "K = 0 0 1 0 0 0 0 0\n",
        "M = 1 0 0\n",
        "fatten = 0\n",
    ],
)
def test_invalid_configs(text):
    with pytest.raises(ValidationError):
        RunConfig.parse_text(text)


def test_matrix_from_reals():
    m = matrix_from_reals((1, 0, 0, -2, 0, 2, 3, 0))
    assert np.array_equal(m, np.array([[1, -2j], [2j, 3]]))
