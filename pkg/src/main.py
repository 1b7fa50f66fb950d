import argparse
import os
import sys
from dataclasses import replace

# Add src to path to allow imports if running from root
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.config import OUT_DIR, log
from src.errors import GHMError, ParseError
from src.experiment import program_state, run_experiment, run_montecarlo
from src.scenario import reference_scenario, parse_scenario, validate

DEFAULT_ANALYSES = {'continuity': True, 'periodicity': True, 'defects': True}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='ghm', description='GHM sensor-network toolkit on hallway domains')
    sub = parser.add_subparsers(dest='command', required=True)
    for name, helptext in (
        ('simulate', 'run the automaton and export snapshots'),
        ('analyze', 'run and evaluate the scenario analyses'),
        ('program', 'build a programmed initial state and report its class'),
        ('evade', 'run and decide the evasion game'),
        ('montecarlo', 'Monte Carlo estimators'),
        ('replicate-paper', '16250-node hallway scenario with n = 20 and r = 1.5'),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument('--scenario', required=name != 'replicate-paper', help='scenario JSON file')
        p.add_argument('--out', default=None, help='output directory')
        p.add_argument('--seed', type=int, default=None, help='root seed override')
        p.add_argument('--ticks', type=int, default=None, help='tick count override')
        p.add_argument('--ps', type=float, default=None, help='link success probability override')
        p.add_argument('--grid', type=float, default=None, help='evasion grid resolution override')
    return parser


def load_scenario(args):
    scenario = reference_scenario() if args.scenario is None else parse_scenario(args.scenario)
    overrides = {}
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2 ** 64:
            raise ParseError('--seed', f"seed must be an unsigned 64-bit integer, got {args.seed}")
        overrides['seed'] = args.seed
    if args.ticks is not None:
        overrides['ticks'] = args.ticks
        overrides['dumps'] = [t for t in scenario.dumps if t <= args.ticks]
    if args.ps is not None:
        overrides['p_s'] = args.ps
    if args.grid is not None:
        overrides['grid'] = args.grid
    if overrides:
        scenario = replace(scenario, **overrides)
        validate(scenario)
    return scenario


def report_replication(summary: dict, n: int):
    print("\n--- Replication Checks ---")
    periodicity = summary.get('periodicity', {})
    fraction = periodicity.get('awake_fraction_after_onset')
    print(f"  Awake fraction after onset: {fraction} (band [{1 / (2 * n):.3f}, {2 / n:.3f}])")
    print(f"  Seed in initial state: {summary['seed_inventory']['initial_has_seed']}")
    barriers = summary.get('barriers', {})
    print(f"  Ticks with a barrier in every corridor: {barriers.get('all_corridors_fraction')}")
    for tick, value in summary.get('milestones', {}).items():
        print(f"  Awake fraction at t={tick}: {value}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = args.out or os.path.join(OUT_DIR, args.command)
    try:
        scenario = load_scenario(args)
        log(f"--- {args.command}: {scenario.name} -> {out_dir} ---")
        if args.command == 'simulate':
            result = run_experiment(scenario, out_dir, analyses={})
        elif args.command == 'analyze':
            result = run_experiment(scenario, out_dir, analyses=scenario.analyses or DEFAULT_ANALYSES)
        elif args.command == 'evade':
            result = run_experiment(scenario, out_dir, analyses={**scenario.analyses, 'evasion': True})
        elif args.command == 'program':
            result = program_state(scenario, out_dir)
        elif args.command == 'montecarlo':
            result = run_montecarlo(scenario, out_dir)
        else:
            result = run_experiment(scenario, out_dir)
            report_replication(result.summary, scenario.n)
    except GHMError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    print(f"Manifest: {result.manifest}")
    return result.exit_status


if __name__ == "__main__":
    sys.exit(main())
