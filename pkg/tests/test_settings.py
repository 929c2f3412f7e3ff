import os

import pytest
from pydantic import ValidationError

from src.config import EigenSolver, Settings
from src.infra.telemetry import configure_telemetry, get_tracer


def test_worker_count():
    assert Settings(threads=3).worker_count() == 3
    assert Settings(threads=0).worker_count() == (os.cpu_count() or 1)


def test_eigensolver_from_text():
    assert Settings(eigensolver="lapack").eigensolver is EigenSolver.LAPACK
    with pytest.raises(ValidationError):
        Settings(eigensolver="qr")


def test_settings_are_frozen():
    config = Settings()
    with pytest.raises(ValidationError):
        config.threads = 2


def test_telemetry_disabled_by_default():
    assert configure_telemetry(Settings(enable_telemetry=False)) is False
    with get_tracer(__name__).start_as_current_span("noop") as span:
        span.set_attribute("key", 1)
