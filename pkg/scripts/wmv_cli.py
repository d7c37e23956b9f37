# wmv-stability/scripts/wmv_cli.py

import sys
import argparse
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

# Add project root to Python path
project_root = Path(__file__).resolve().parent.parent
sys.path.append(str(project_root))

from wmv_stability import config
from wmv_stability.utils.experiments import (
    COMMANDS, ExperimentConfig,
    parse_floats, parse_grid, run
)
from wmv_stability.utils.output import validate_out_path

logger = logging.getLogger(__name__)


def configure_logging(verbose: bool = False, log_file: Optional[Path] = None) -> None:
    """Log to stderr (stdout carries the summary line) and optionally to a file."""
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file, encoding='utf-8'))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='Weighted majority voting correctness, sensitivity and stability experiments'
    )
    parser.add_argument('command', choices=COMMANDS, help='Experiment to run')
    parser.add_argument('--config', type=Path, help='JSON config file; flags override its fields')
    parser.add_argument('--echo-config', type=Path,
                       help='Write the effective config as JSON to this path')

    parser.add_argument('--trust', help='Comma-separated trust values in [0.5, 1]')
    parser.add_argument('--truth', help='Comma-separated trustworthiness values (default: trust)')
    parser.add_argument('--mode', choices=['direct', 'truth_varying', 'trust_varying'],
                       help='Sweep regime')
    parser.add_argument('--index', type=int, help='Varied source index')
    parser.add_argument('--index-j', type=int, help='Second source index for surfaces')
    parser.add_argument('--grid', help='MIN,MAX,POINTS')
    parser.add_argument('--grid-j', help='MIN,MAX,POINTS for the second surface axis')
    parser.add_argument('--dist',
                       help='KIND:key=value,... broadcast to all sources, or ;-separated per source')
    parser.add_argument('--delta', help='Support half-width(s) for the optimality bounds')
    parser.add_argument('--m', type=int, help='Size of the identical-source group')
    parser.add_argument('--rest', help='Comma-separated values of the non-identical sources')
    parser.add_argument('--preset', choices=config.FIGURE_PRESETS, help='Figure preset id')

    parser.add_argument('--exact', action='store_true', default=None,
                       help='Force exact enumeration')
    parser.add_argument('--runs', type=int, help='Monte Carlo runs')
    parser.add_argument('--seed', type=int, help='Master seed (required with --runs)')
    parser.add_argument('--workers', type=int, help='Sampling worker threads')

    parser.add_argument('--out', help='Output file, or directory for figure presets')
    parser.add_argument('--format', choices=config.OUTPUT_FORMATS, help='Output format')

    parser.add_argument('--log-file', type=Path, help='Also write logs to this file')
    parser.add_argument('--quiet', '-q', action='store_true', help='Disable progress bars')
    parser.add_argument('--verbose', '-v', action='store_true',
                       help='Enable verbose output')
    return parser


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    """
    Merge a config file (if any) with explicitly given flags.

    Args:
        args: Parsed command-line arguments

    Returns:
        ExperimentConfig: Validated configuration
    """
    data: Dict[str, Any] = {}
    if args.config:
        data = ExperimentConfig.from_json(args.config.read_text(encoding='utf-8')).to_dict()
    data['command'] = args.command

    overrides = {
        'trust': parse_floats(args.trust, 'trust') if args.trust else None,
        'truth': parse_floats(args.truth, 'truth') if args.truth else None,
        'mode': args.mode,
        'grid': parse_grid(args.grid) if args.grid else None,
        'grid_j': parse_grid(args.grid_j) if args.grid_j else None,
        'distribution': args.dist,
        'delta': parse_floats(args.delta, 'delta') if args.delta else None,
        'm': args.m,
        'rest': parse_floats(args.rest, 'rest') if args.rest else None,
        'preset': args.preset,
        'exact': args.exact,
        'runs': args.runs,
        'seed': args.seed,
        'workers': args.workers,
        'output': args.out,
        'format': args.format,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})

    indices = list(data.get('indices') or [0])
    if args.index is not None:
        indices[0] = args.index
    if args.index_j is not None:
        indices[1:] = [args.index_j]
    if len(indices) < 2:
        indices.append(1 if indices[0] != 1 else 0)
    data['indices'] = indices[:2]

    return ExperimentConfig.from_dict(data).validate()


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    configure_logging(args.verbose, args.log_file)

    try:
        cfg = build_config(args)
        if args.echo_config:
            validate_out_path(args.echo_config)
            args.echo_config.write_text(cfg.to_json() + '\n', encoding='utf-8')
            logger.info(f"Wrote config to {args.echo_config}")
    except ValueError as e:
        logger.error(f"Error: {str(e)}")
        if args.verbose:
            logger.exception("Full traceback:")
        return config.EXIT_CODES['validation']
    except OSError as e:
        logger.error(f"Error: {str(e)}")
        if args.verbose:
            logger.exception("Full traceback:")
        return config.EXIT_CODES['io']

    result = run(cfg, quiet=args.quiet)
    if result.status == config.EXIT_CODES['ok']:
        print(result.summary)
    return result.status


if __name__ == "__main__":
    sys.exit(main())
