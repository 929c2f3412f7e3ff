"""
Main entry point for the magnon command-line toolkit.
Loads the environment, configures logging and optional OpenTelemetry tracing, and
hands the command line to the CLI router.

Usage:
    python -m src.main <butterfly|bands|defect|embedded|curve|verify> [--config FILE] [flags]
"""
import logging
import sys
from typing import List, Optional

from dotenv import load_dotenv

# Load environment variables from .env file as early as possible
# so that settings see them when src.config is first imported
load_dotenv()

from src.cli.router import dispatch
from src.config import settings
from src.infra.telemetry import configure_telemetry

# Log to stderr; stdout carries CSV and JSON reports
logging.basicConfig(
    level=getattr(logging, settings.log_level.upper(), logging.INFO),
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    stream=sys.stderr,
)

logger = logging.getLogger(__name__)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one subcommand.

    Args:
        argv: Arguments without the program name (defaults to sys.argv[1:])

    Returns:
        int: process exit code (0 success, 1 domain error, 2 usage error)
    """
    configure_telemetry(settings)
    return dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())
