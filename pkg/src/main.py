"""
Main entry point for the cooperative localization simulator.
Loads an experiment configuration, dispatches one experiment and writes
plot-ready CSV grids plus a summary.json into the output directory.
"""

import argparse
import logging
import math
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

# Add the parent directory to path so imports work correctly
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from localization.bounds import GridRow
from scenario.geometry import Scheme
from simulation.montecarlo import (run_area_sweep, run_cooperation_sweep, run_crb_map,
                                   run_missing_rss_sweep, run_mobile, run_static)
from simulation.records import artifact_header, write_csv, write_summary_json, write_trial_csv
from utils import __version__
from utils.config import (ExperimentConfig, config_from_dict, config_hash, config_to_dict,
                          read_config_data, validate_config)
from utils.errors import (ConfigError, DegenerateGeometryError, DivergenceError,
                          LocalizationError)
from utils.logging_setup import setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

COMMANDS = ('crb-map', 'simulate-static', 'sweep-cooperation', 'sweep-missing-rss',
            'simulate-mobile', 'validate-config', 'sweep-area')

GRID_COLUMNS = ['x', 'y', 'scheme', 'condition', 'metric', 'value_m']
POINT_COLUMNS = ['point', 'x', 'y', 'rms_m', 'eps_m', 'gap_m', 'crb_m', 'trials', 'failures']
COOPERATION_COLUMNS = ['n_targets', 'delta_m', 'eps_m', 'crb_m', 'rms_m', 'trials', 'failures']
MISSING_RSS_COLUMNS = ['n_targets', 'p_missing', 'rms_m', 'eps_m', 'trials', 'failures']
AREA_COLUMNS = ['side_m', 'scheme', 'condition', 'crb_m', 'eps_m']


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def _threads(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"threads must be >= 0, got {text}")
    return value


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors as a single error line."""

    def error(self, message: str):
        sys.stderr.write(error_line(ConfigError("arguments", message)) + "\n")
        sys.exit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    """Command-line parser with one subcommand per experiment."""
    common = CliParser(add_help=False)
    common.add_argument('--config', required=True, help='Experiment configuration (JSON or YAML)')
    common.add_argument('--out', default='./out', help='Output directory (default: ./out)')
    common.add_argument('--seed', type=_seed, default=None,
                        help='Random seed, overrides the configuration')
    common.add_argument('--threads', type=_threads, default=None,
                        help='Worker processes, 0 = one per CPU (default: $COTAR_THREADS or 1)')
    common.add_argument('--quiet', action='store_true', help='Only report warnings and errors')
    common.add_argument('--verbose', action='store_true', help='Show debug messages')

    parser = CliParser(
        description="Cooperative TOA/RSS localization simulator - bounds and Monte-Carlo experiments")
    commands = parser.add_subparsers(dest='command', required=True, metavar='COMMAND')
    descriptions = {
        'crb-map': 'Bounds maps over the anchor lattice, one CSV per scheme',
        'simulate-static': 'Monte-Carlo localization at static cluster positions',
        'sweep-cooperation': 'Bounds and RMS versus cluster size and grid spacing',
        'sweep-missing-rss': 'RMS versus the probability of missing neighbor RSS',
        'simulate-mobile': 'Tracking of a moving cluster with warm-started solves',
        'validate-config': 'Check a configuration file and report every problem',
        'sweep-area': 'Lattice-averaged bounds versus square size',
    }
    for name in COMMANDS:
        commands.add_parser(name, parents=[common], help=descriptions[name])
    return parser


def resolve_workers(threads: Optional[int]) -> int:
    """--threads, else $COTAR_THREADS, else 1; 0 means one per CPU."""
    if threads is None:
        env = os.environ.get('COTAR_THREADS')
        if env is None or not env.strip():
            return 1
        try:
            threads = int(env)
        except ValueError:
            raise ConfigError("COTAR_THREADS", f"must be an integer, got {env!r}") from None
        if threads < 0:
            raise ConfigError("COTAR_THREADS", f"must be >= 0, got {threads}")
    if threads == 0:
        return os.cpu_count() or 1
    return threads


def error_line(exc: BaseException) -> str:
    """Single machine-parsable line describing a failure."""
    if isinstance(exc, ConfigError):
        kind, field, message = 'config', exc.field, exc.message
    elif isinstance(exc, DegenerateGeometryError):
        kind, field, message = 'geometry', '-', str(exc)
    elif isinstance(exc, DivergenceError):
        kind, field, message = 'divergence', '-', str(exc)
    elif isinstance(exc, OSError):
        kind, field, message = 'io', '-', str(exc)
    else:
        kind, field, message = 'runtime', '-', str(exc)
    message = message.replace('\\', '\\\\').replace('"', '\\"').replace('\n', ' ')
    return f'error kind={kind} field={field} message="{message}"'


class Runner:
    """Runs one command and writes its artifacts."""

    def __init__(self, args: argparse.Namespace, config: ExperimentConfig, workers: int):
        self.args = args
        self.config = config
        self.workers = workers
        self.out = Path(args.out)
        self.header = artifact_header(__version__, config_hash(config), config.seed)

    def say(self, message: str):
        if not self.args.quiet:
            print(message)

    def summary(self, command: str, results: Dict[str, Any], files: List[Path]) -> Path:
        payload = {
            'tool': 'cotar-sim',
            'version': __version__,
            'command': command,
            'seed': self.config.seed,
            'config_sha256': config_hash(self.config),
            'config': config_to_dict(self.config),
            'results': results,
            'files': sorted(path.name for path in files),
        }
        return write_summary_json(self.out / 'summary.json', payload)

    def crb_map(self) -> Dict[str, Any]:
        rows = run_crb_map(self.config)
        center = self.config.area_side_m / 2.0
        files, results = [], {}
        for scheme in Scheme:
            scheme_rows = [row for row in rows if row.scheme == scheme.value]
            files.append(write_csv(self.out / f'crb_map_{scheme.value}.csv', GRID_COLUMNS,
                                   (_grid_values(row) for row in scheme_rows), self.header))
            results[scheme.value] = _map_summary(scheme_rows, center)
            self.say(f"   {scheme.value:>9}: center CRB {results[scheme.value]['center_crb_m']:.3f} m")
        return {'results': results, 'files': files}

    def simulate_static(self) -> Dict[str, Any]:
        result = run_static(self.config, self.workers)
        points = write_csv(self.out / 'static_points.csv', POINT_COLUMNS,
                           ([p.index, p.x, p.y, p.rms, p.eps, p.gap, p.crb, p.trials, p.failures]
                            for p in result.points), self.header)
        trials = write_trial_csv(self.out / 'trials.csv', result.records, self.header)
        summary = result.summary()
        center = result.nearest(self.config.area_side_m / 2.0, self.config.area_side_m / 2.0)
        summary['center'] = {'x': center.x, 'y': center.y, 'rms_m': center.rms, 'eps_m': center.eps}
        self.say(f"   center RMS {center.rms:.3f} m (bound {center.eps:.3f} m), "
                 f"{result.failures} failed trials")
        return {'results': summary, 'files': [points, trials]}

    def sweep_cooperation(self) -> Dict[str, Any]:
        rows = run_cooperation_sweep(self.config, workers=self.workers)
        table = write_csv(self.out / 'cooperation.csv', COOPERATION_COLUMNS,
                          ([r.n_targets, r.delta_m, r.eps_m, r.crb_m, r.rms_m, r.trials, r.failures]
                           for r in rows), self.header)
        for row in rows:
            self.say(f"   N={row.n_targets:<3} delta={row.delta_m:g} m: "
                     f"eps {row.eps_m:.3f} m, RMS {row.rms_m:.3f} m")
        return {'results': {'rows': [asdict(row) for row in rows]}, 'files': [table]}

    def sweep_missing_rss(self) -> Dict[str, Any]:
        rows = run_missing_rss_sweep(self.config, workers=self.workers)
        table = write_csv(self.out / 'missing_rss.csv', MISSING_RSS_COLUMNS,
                          ([r.n_targets, r.p_missing, r.rms_m, r.eps_m, r.trials, r.failures]
                           for r in rows), self.header)
        for row in rows:
            self.say(f"   p={row.p_missing:.2f}: RMS {row.rms_m:.3f} m")
        return {'results': {'rows': [asdict(row) for row in rows]}, 'files': [table]}

    def simulate_mobile(self) -> Dict[str, Any]:
        result = run_mobile(self.config, self.workers)
        trials = write_trial_csv(self.out / 'mobile_trials.csv', result.records, self.header)
        self.say(f"   tracking RMS {result.rms:.3f} m (bound {result.eps:.3f} m)")
        return {'results': result.summary(), 'files': [trials]}

    def sweep_area(self) -> Dict[str, Any]:
        rows = run_area_sweep(self.config)
        table = write_csv(self.out / 'area_sweep.csv', AREA_COLUMNS,
                          ([r.side_m, r.scheme, r.condition, r.crb_m, r.eps_m] for r in rows),
                          self.header)
        return {'results': {'rows': [asdict(row) for row in rows]}, 'files': [table]}

    def validate(self) -> Dict[str, Any]:
        self.say("✅ Configuration is valid")
        return {'results': {'valid': True}, 'files': []}

    def run(self, command: str):
        handlers = {
            'crb-map': self.crb_map,
            'simulate-static': self.simulate_static,
            'sweep-cooperation': self.sweep_cooperation,
            'sweep-missing-rss': self.sweep_missing_rss,
            'simulate-mobile': self.simulate_mobile,
            'validate-config': self.validate,
            'sweep-area': self.sweep_area,
        }
        self.out.mkdir(parents=True, exist_ok=True)
        outcome = handlers[command]()
        summary = self.summary(command, outcome['results'], outcome['files'])
        self.say(f"📁 Results written to {self.out} ({len(outcome['files']) + 1} files)")
        logger.info("Wrote %s", summary)


def _grid_values(row: GridRow) -> List[Any]:
    return [row.x, row.y, row.scheme, row.condition, row.metric, row.value_m]


def _map_summary(rows: Sequence[GridRow], center: float) -> Dict[str, float]:
    crb = [row for row in rows if row.metric == 'crb']
    nearest = min(crb, key=lambda row: math.hypot(row.x - center, row.y - center))
    values = [row.value_m for row in crb]
    return {'center_crb_m': nearest.value_m, 'min_crb_m': min(values), 'max_crb_m': max(values)}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main function with command line interface."""
    args = build_parser().parse_args(argv)
    setup_logging(quiet=args.quiet, verbose=args.verbose)

    if not args.quiet:
        print("=" * 60)
        print(f"📡 COOPERATIVE LOCALIZATION SIMULATOR {__version__} - {args.command}")
        print("=" * 60)

    try:
        data = read_config_data(args.config)
        problems = validate_config(data)
        if problems:
            if not args.quiet:
                print(f"❌ {len(problems)} configuration problem(s):")
                for problem in problems:
                    print(f"   {problem.field}: {problem.message}")
            raise problems[0]
        config = config_from_dict(data)
        if args.seed is not None:
            config = replace(config, seed=args.seed)
        runner = Runner(args, config, resolve_workers(args.threads))
        runner.run(args.command)
    except ConfigError as exc:
        print(error_line(exc), file=sys.stderr)
        return EXIT_CONFIG
    except (LocalizationError, OSError) as exc:
        print(error_line(exc), file=sys.stderr)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        print("\n⚠️  Program interrupted by user", file=sys.stderr)
        return EXIT_RUNTIME

    return EXIT_OK


if __name__ == "__main__":
    exit_code = main()
    sys.exit(exit_code)
