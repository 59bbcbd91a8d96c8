# app.py
"""
Command-line entry point.

    python app.py layout   --config run.yaml [--out DIR]
    python app.py patterns --config run.yaml [--k 0 --k 3,1]
    python app.py simulate --config run.yaml [--scene scene.pgm] [--seed N] [--threads N]
    python app.py compare  --config run.yaml [--scene scene.pgm]
    python app.py chart    --config run.yaml

Exit codes: 0 ok, 2 config/parameter error, 3 I/O or format error, 4 numeric/dimension error.
"""
import argparse
import logging
import sys
from typing import Optional, Sequence

from modules.errors import (
    ConfigError,
    DimensionError,
    FormatError,
    IncompleteMeasurementError,
    NumericError,
    ParameterError,
    SceneError,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

COMMANDS = ('layout', 'patterns', 'simulate', 'compare', 'chart')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='uffsi',
        description="Foveated Fourier single-pixel imaging simulator.")
    parser.add_argument('-v', '--verbose', action='count', default=0, help="-v for INFO, -vv for DEBUG")
    sub = parser.add_subparsers(dest='command', required=True)

    for name, help_text in (
        ('layout', "build a cell layout; write layout.bin, cellmap.pgm and a summary"),
        ('patterns', "export phase-shifted foveated Fourier patterns as PGM"),
        ('simulate', "acquire and reconstruct a scene"),
        ('compare', "compare UFFSI with uniform HR/LR FSI at matched budgets"),
        ('chart', "write the synthetic test chart"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument('--config', required=True, help="run config (YAML)")
        p.add_argument('--out', default=None, help="output directory (overrides output.dir)")
        p.add_argument('--seed', type=int, default=None, help="noise seed (overrides seed)")
        p.add_argument('--threads', type=int, default=None, help="acquisition threads, 0 = all cores")
        p.add_argument('-v', '--verbose', action='count', default=0, dest='sub_verbose')
        if name in ('simulate', 'compare'):
            p.add_argument('--scene', default=None, help="scene image (PGM/PNG); the test chart if omitted")
        if name == 'patterns':
            p.add_argument('--k', action='append', default=None,
                           help="frequency to export: 'k' (circular) or 'k_u,k_v'; repeatable")
    return parser


def configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')


def run(args: argparse.Namespace) -> None:
    from config_loader import load_config

    # the whole config is validated before any command writes output
    cfg = load_config(args.config).with_overrides(seed=args.seed, out=args.out, threads=args.threads)

    if args.command == 'layout':
        from commands.cmd_layout import main
        main(cfg)
    elif args.command == 'patterns':
        from commands.cmd_patterns import main
        main(cfg, args.k)
    elif args.command == 'simulate':
        from commands.cmd_simulate import main
        main(cfg, args.scene)
    elif args.command == 'compare':
        from commands.cmd_compare import main
        main(cfg, args.scene)
    elif args.command == 'chart':
        from commands.cmd_chart import main
        main(cfg)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose + args.sub_verbose)
    try:
        run(args)
    except (ConfigError, ParameterError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (SceneError, FormatError, OSError) as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except (NumericError, DimensionError, IncompleteMeasurementError) as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
