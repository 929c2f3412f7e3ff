"""
Command-line router.
Defines the subcommands of the toolkit, merges config files with command-line
flags and dispatches to the service layer. Exit codes: 0 on success, 1 when a
pipeline raises a domain error, 2 on usage or configuration errors.
"""
import argparse
import json
import logging
import sys
from typing import Any, Callable, Dict, List, Optional

from pydantic import ValidationError

from src.backend.errors import MagnonError
from src.backend.lattice import Region
from src.cli.run_config import RunConfig
from src.infra.verify import run_checks
from src.service import writers
from src.service.butterfly_service import ButterflyService
from src.service.curve_service import CurveService
from src.service.defect_service import DEFECT_SITES, DefectService, defect_operator

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2


def _print_json(payload: Dict[str, Any]) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def run_butterfly(config: RunConfig) -> int:
    service = ButterflyService()
    data = service.compute(config.qmax, config.kgrid)
    if config.out:
        writers.write_butterfly(config.out, data)
    else:
        sys.stdout.write(writers.butterfly_csv(data))
    if config.svg:
        writers.write_text(config.svg, service.render(data))
    return EXIT_OK


def run_bands(config: RunConfig) -> int:
    data = ButterflyService().bands(config.flux_value, config.kgrid)
    if config.out:
        writers.write_butterfly(config.out, [data])
    else:
        sys.stdout.write(writers.butterfly_csv([data]))
    return EXIT_OK


def run_defect(config: RunConfig) -> int:
    service = DefectService(config.residual_tol)
    outcome = service.single_layer(config.flux_value, config.E0, config.radius, config.single_site)
    if config.out:
        writers.write_state(config.out, outcome.bound.state)
    if config.dump:
        region = Region.ball(DEFECT_SITES[0], config.radius)
        writers.write_triplets(config.dump, defect_operator(config.flux_value, region, outcome.spec))
    _print_json(outcome.report.model_dump())
    return EXIT_OK if outcome.report.passed else EXIT_DOMAIN


def run_embedded(config: RunConfig) -> int:
    service = DefectService(config.residual_tol)
    outcome = service.embedded(
        config.k_matrix,
        config.m_matrix,
        config.flux_value,
        config.E0,
        config.radius,
        config.qmax,
        config.kgrid,
        margin=config.margin,
        fatten=config.fatten,
    )
    if config.out:
        writers.write_bilayer(config.out, outcome.result.state)
    _print_json(outcome.report.model_dump())
    return EXIT_OK if outcome.report.passed else EXIT_DOMAIN


def run_curve(config: RunConfig) -> int:
    service = CurveService()
    report = service.track(
        config.k_matrix,
        config.m_matrix,
        config.E0,
        config.phi_start,
        config.phi_end,
        config.steps,
        config.radius,
        config.qmax,
        config.kgrid,
        margin=config.margin,
        fatten=config.fatten,
    )
    if config.out:
        writers.write_curve(config.out, report.curve.samples)
    else:
        sys.stdout.write(writers.curve_csv(report.curve.samples))
    if config.svg:
        writers.write_text(config.svg, service.render(report))
    return EXIT_OK


def run_verify(config: RunConfig) -> int:
    report = run_checks()
    payload = report.model_dump()
    if config.out:
        writers.write_text(config.out, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    _print_json(payload)
    return EXIT_OK if report.passed else EXIT_DOMAIN


HANDLERS: Dict[str, Callable[[RunConfig], int]] = {
    "butterfly": run_butterfly,
    "bands": run_bands,
    "defect": run_defect,
    "embedded": run_embedded,
    "curve": run_curve,
    "verify": run_verify,
}

# Flags that map onto RunConfig keys; every flag defaults to None so that config
# file values survive unless overridden.
CONFIG_FLAGS = [
    "flux", "qmax", "kgrid", "E0", "radius", "single_site", "phi_start", "phi_end",
    "steps", "margin", "fatten", "residual_tol", "out", "svg", "dump",
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="magnon",
        description="Magnetic honeycomb spectra, defect eigenstates and embedded eigenvalue curves",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="Plain-text key = value config file")
        return p

    p = command("butterfly", "Band intervals for every flux p/q with q <= qmax")
    p.add_argument("--qmax", type=int)
    p.add_argument("--kgrid", type=int)
    p.add_argument("--out", help="CSV path (stdout when omitted)")
    p.add_argument("--svg", help="SVG path")

    p = command("bands", "Bloch bands for one rational flux")
    p.add_argument("--flux", help="p/q")
    p.add_argument("--kgrid", type=int)
    p.add_argument("--out", help="CSV path (stdout when omitted)")

    p = command("defect", "Defect eigenstate of the single layer")
    p.add_argument("--flux", help="p/q or radians")
    p.add_argument("--E0", dest="E0", type=float)
    p.add_argument("--radius", type=int)
    p.add_argument("--single-site", dest="single_site", action="store_const", const=True)
    p.add_argument("--residual-tol", dest="residual_tol", type=float)
    p.add_argument("--out", help="State CSV path")
    p.add_argument("--dump", help="Triplet dump of H + V")

    p = command("embedded", "Embedded eigenstate of the bilayer")
    p.add_argument("--flux", help="p/q or radians")
    p.add_argument("--E0", dest="E0", type=float)
    p.add_argument("--radius", type=int)
    p.add_argument("--qmax", type=int)
    p.add_argument("--kgrid", type=int)
    p.add_argument("--margin", type=float)
    p.add_argument("--fatten", type=float)
    p.add_argument("--residual-tol", dest="residual_tol", type=float)
    p.add_argument("--out", help="Bilayer state CSV path")

    p = command("curve", "Track the embedded eigenvalue across a flux interval")
    p.add_argument("--E0", dest="E0", type=float)
    p.add_argument("--phi-start", dest="phi_start", type=float)
    p.add_argument("--phi-end", dest="phi_end", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--radius", type=int)
    p.add_argument("--qmax", type=int)
    p.add_argument("--kgrid", type=int)
    p.add_argument("--margin", type=float)
    p.add_argument("--fatten", type=float)
    p.add_argument("--out", help="Curve CSV path (stdout when omitted)")
    p.add_argument("--svg", help="SVG path")

    p = command("verify", "Run the invariant suite")
    p.add_argument("--out", help="JSON report path")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    overrides = {key: getattr(args, key) for key in CONFIG_FLAGS if getattr(args, key, None) is not None}
    if args.config:
        return RunConfig.read(args.config, overrides)
    return RunConfig.model_validate(overrides)


def dispatch(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, load the run config and run the selected subcommand.

    Args:
        argv: Arguments without the program name (defaults to sys.argv[1:])

    Returns:
        int: process exit code
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    try:
        config = load_config(args)
    except (ValidationError, ValueError, OSError) as e:
        print(f"{parser.prog} {args.command}: invalid configuration: {e}", file=sys.stderr)
        return EXIT_USAGE

    logger.info(f"Running {args.command}")
    try:
        return HANDLERS[args.command](config)
    except MagnonError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"{parser.prog} {args.command}: {e}", file=sys.stderr)
        return EXIT_DOMAIN
