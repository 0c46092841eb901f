"""
Command-line entry point for the CIFC-CCM toolkit.

    python ccm_cli.py gauss-region --a-re 0 --a-im 0 --b-re 1 --b-im 0 --p1 3 --p2 12
    python ccm_cli.py regime-map --a-max 3 --b-max 3 --cells 60 --p1 1 --p2 1
    python ccm_cli.py gap-sweep --grid sweeps/default_sweep.json
    python ccm_cli.py dmc-capacity --channel channels/xor_identity.json --grid 16 --mode verify
    python ccm_cli.py fme --system systems/th2_pre.json --eliminate R1cp,R2c --prune --aliases th2
    python ccm_cli.py verify-all --quick

Exit codes: 0 success, 1 a check failed, 2 bad input or usage.
"""

import sys
import json
import time
import logging
import argparse
from pathlib import Path
from typing import Callable, Optional, Sequence, TypeVar

import yaml
from pydantic import ValidationError

from config import CcmConfig, get_config, reset_config, setup_logging
from acceptance_suite import verify_all
from artifact_writer import ArtifactWriter, write_json_atomic, to_json_text
from dmc_channel import Dmc, outer_bound_region, semidet_capacity_region, verify_semidet
from fme_symbolic import (
    TH2_ATOM_ALIASES, apply_substitutions, eliminate, load_system_file, prune, relabel_atoms,
    system_to_dict, th2_assumed_nonneg,
)
from gaussian_ccm import (
    GaussianChannelParams, inner_region, outer_region, regime_classify, time_division_region,
)
from regime_map import build_regime_map
from sweep_runner import SweepSpec, run_sweep


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_BAD_INPUT = 2

T = TypeVar("T")

ATOM_ALIASES = {"none": {}, "th2": TH2_ATOM_ALIASES}


class InputFileError(ValueError):
    """A user-supplied file is missing or malformed; the message names file and field."""


def _load_input(path: str, loader: Callable[[str], T]) -> T:
    try:
        return loader(path)
    except FileNotFoundError:
        raise InputFileError(f"{path}: file not found")
    except json.JSONDecodeError as e:
        raise InputFileError(f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}")
    except yaml.YAMLError as e:
        raise InputFileError(f"{path}: invalid YAML: {e}")
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"]) or "<root>"
        raise InputFileError(f"{path}: field '{field}': {first['msg']}")


def _out_dir(args: argparse.Namespace, config: CcmConfig, fallback: Optional[str] = None) -> Path:
    return Path(args.out or fallback or config.runtime.output_dir)


# ============================================================================
# COMMANDS
# ============================================================================

def cmd_gauss_region(args: argparse.Namespace, config: CcmConfig) -> int:
    params = GaussianChannelParams(complex(args.a_re, args.a_im), complex(args.b_re, args.b_im),
                                   args.p1, args.p2)
    resolution = args.resolution or config.grids.frontier_resolution
    regions = {
        "outer": outer_region(params, args.alpha_steps),
        "inner": inner_region(params, args.alpha_steps),
        "time_division": time_division_region(params, args.tau_steps),
    }
    writer = ArtifactWriter(_out_dir(args, config))
    for name, region in regions.items():
        writer.region(f"{name}.json", region)
    for name, region in regions.items():
        writer.frontier(f"frontier_{name}.csv", region, resolution)

    print(f"gauss-region: {regime_classify(params).value}, "
          f"outer sum {regions['outer'].max_sum_rate():.6f}, inner sum {regions['inner'].max_sum_rate():.6f}; "
          + writer.summary())
    return EXIT_OK


def cmd_regime_map(args: argparse.Namespace, config: CcmConfig) -> int:
    regime_map = build_regime_map(args.a_max, args.b_max, args.cells, args.p1, args.p2)
    writer = ArtifactWriter(_out_dir(args, config))
    writer.text("regime_map.csv", regime_map.to_csv())
    writer.binary("regime_map.svg", regime_map.to_svg())
    counts = ", ".join(f"{k}={v}" for k, v in regime_map.counts().items())
    print(f"regime-map: {counts}; " + writer.summary())
    return EXIT_OK


def cmd_gap_sweep(args: argparse.Namespace, config: CcmConfig) -> int:
    spec = _load_input(args.grid, SweepSpec.load)
    result = run_sweep(spec)
    writer = ArtifactWriter(_out_dir(args, config, spec.output_dir))
    writer.text("gap_sweep.csv", result.to_csv())

    acceptance = config.acceptance
    ok = result.within_bounds(acceptance.gap_bound_bits, acceptance.ratio_bound + acceptance.ratio_slack)
    print(f"gap-sweep: {len(result.rows)} points, max gap {result.max_gap:.6f} bits, "
          f"max ratio {result.max_ratio:.6f}, {'within' if ok else 'OUTSIDE'} bounds; " + writer.summary())
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_dmc_capacity(args: argparse.Namespace, config: CcmConfig) -> int:
    channel = _load_input(args.channel, Dmc.load)
    grid = args.grid or config.grids.dmc_grid_steps
    writer = ArtifactWriter(_out_dir(args, config))

    if args.mode == "outer":
        region = outer_bound_region(channel, grid)
    else:
        region = semidet_capacity_region(channel, grid)
    writer.region("region.json", region)
    writer.frontier("frontier.csv", region, config.grids.frontier_resolution)

    status = EXIT_OK
    note = f"max sum {region.max_sum_rate():.6f}"
    if args.mode == "verify":
        report = verify_semidet(channel, grid, config.tolerances.identity)
        writer.json("verification.json", report.to_dict())
        note = f"{report.passed}/{report.points} passed, worst {report.worst_deviation:.3e}"
        status = EXIT_OK if report.all_passed else EXIT_CHECK_FAILED

    print(f"dmc-capacity ({args.mode}, grid {grid}): {note}; " + writer.summary())
    return status


def cmd_fme(args: argparse.Namespace, config: CcmConfig) -> int:
    system, nonneg = _load_input(args.system, load_system_file)
    system = apply_substitutions(system)
    for var in [v.strip() for v in args.eliminate.split(",") if v.strip()]:
        system = eliminate(system, var)
    if args.prune:
        system = prune(system, nonneg or th2_assumed_nonneg(system))
    if args.aliases != "none":
        system = relabel_atoms(system, ATOM_ALIASES[args.aliases])

    data = system_to_dict(system)
    if args.output:
        write_json_atomic(args.output, data)
        target = args.output
    else:
        sys.stdout.write(to_json_text(data))
        target = "stdout"
    print(f"fme: {len(system.inequalities)} inequalities over {', '.join(system.variables)} -> {target}",
          file=sys.stderr if not args.output else sys.stdout)
    return EXIT_OK


def cmd_verify_all(args: argparse.Namespace, config: CcmConfig) -> int:
    spec = _load_input(args.spec, SweepSpec.load) if args.spec else SweepSpec()
    started = time.perf_counter()
    report = verify_all(spec, quick=args.quick, config=config)
    report.wall_clock_seconds = time.perf_counter() - started

    writer = ArtifactWriter(_out_dir(args, config, spec.output_dir))
    writer.json("run_report.json", report.to_dict())
    writer.json("run_timing.json", {"command": report.command, "input_digest": report.input_digest,
                                    "wall_clock_seconds": report.wall_clock_seconds})
    logger.info(f"verify-all finished in {report.wall_clock_seconds:.1f} s")
    print(f"verify-all: {report.summary()}; " + writer.summary())
    return EXIT_OK if report.all_passed else EXIT_CHECK_FAILED


# ============================================================================
# PARSER
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ccm", description="CIFC-CCM capacity region toolkit")
    parser.add_argument("--config", help="YAML configuration file (default: ccm_config.yaml)")
    parser.add_argument("--log-level", type=str.upper, choices=("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"),
                        help="Override the configured log level")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("gauss-region", help="Outer, inner and time-division regions of a Gaussian channel")
    for name in ("--a-re", "--a-im", "--b-re", "--b-im"):
        p.add_argument(name, type=float, default=0.0)
    p.add_argument("--p1", type=float, required=True)
    p.add_argument("--p2", type=float, required=True)
    p.add_argument("--alpha-steps", type=int, help="Power-split grid (default from config)")
    p.add_argument("--tau-steps", type=int, help="Time-division grid (default from config)")
    p.add_argument("--resolution", type=int, help="Frontier samples (default from config)")
    p.add_argument("--out", help="Output directory")
    p.set_defaults(handler=cmd_gauss_region)

    p = sub.add_parser("regime-map", help="Regime labels over a grid of real gains")
    p.add_argument("--a-max", type=float, default=3.0)
    p.add_argument("--b-max", type=float, default=3.0)
    p.add_argument("--cells", type=int, default=60)
    p.add_argument("--p1", type=float, default=1.0)
    p.add_argument("--p2", type=float, default=1.0)
    p.add_argument("--out", help="Output directory")
    p.set_defaults(handler=cmd_regime_map)

    p = sub.add_parser("gap-sweep", help="Additive and multiplicative gaps over a parameter grid")
    p.add_argument("--grid", required=True, help="Sweep spec JSON")
    p.add_argument("--out", help="Output directory")
    p.set_defaults(handler=cmd_gap_sweep)

    p = sub.add_parser("dmc-capacity", help="Outer bound / semi-deterministic capacity of a DMC")
    p.add_argument("--channel", required=True, help="Channel JSON")
    p.add_argument("--grid", type=int, help="Simplex grid denominator (default from config)")
    p.add_argument("--mode", choices=("outer", "semidet", "verify"), default="outer")
    p.add_argument("--out", help="Output directory")
    p.set_defaults(handler=cmd_dmc_capacity)

    p = sub.add_parser("fme", help="Fourier-Motzkin elimination on a symbolic system")
    p.add_argument("--system", required=True, help="System JSON")
    p.add_argument("--eliminate", required=True, help="Comma-separated variables, in order")
    p.add_argument("--prune", action="store_true", help="Drop redundant inequalities")
    p.add_argument("--aliases", choices=tuple(ATOM_ALIASES), default="none",
                   help="Rename atoms after elimination; th2 maps the Y2 atoms to their X1 forms")
    p.add_argument("--output", help="Output JSON file (default: stdout)")
    p.set_defaults(handler=cmd_fme)

    p = sub.add_parser("verify-all", help="Run every acceptance check")
    p.add_argument("--spec", help="Sweep spec JSON (default: built-in sweep)")
    p.add_argument("--quick", action="store_true", help="Smaller randomized suites and grids")
    p.add_argument("--out", help="Output directory")
    p.set_defaults(handler=cmd_verify_all)

    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_BAD_INPUT

    if not getattr(args, "handler", None):
        parser.print_usage(sys.stderr)
        return EXIT_BAD_INPUT

    try:
        if args.config:
            if not Path(args.config).is_file():
                raise InputFileError(f"{args.config}: file not found")
            reset_config()
            config = _load_input(args.config, get_config)
        else:
            config = get_config()
        setup_logging(config, args.log_level)
        logger.debug(f"effective configuration: {config.model_dump()}")
        return args.handler(args, config)
    except (ValueError, OSError) as e:
        # pydantic ValidationError and InputFileError are ValueErrors
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_INPUT


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
