import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from .barrier import barrier_report, wavefront_band
from .config import PLOTS_ENABLED, log
from .data_loader import DataLoader
from .domain import HallwayDomain, sample_points
from .errors import PreconditionError
from .evasion import EvasionInstance, decide, refine, verify_witness
from .forest import subordination_forest
from .ghm import ENERGY_LABELS, State, is_continuous, relabel_energy
from .initial_conditions import (AllZero, FromCSV, InitialCondition, ProgrammedClass, SmoothField,
                                 UniformRandom, WavePattern)
from .network import Augmentation, Network, augment_boundary_sensors, build_network, local_hole_check
from .periodicity_detector import PeriodicityDetector
from .scenario import Scenario
from .simulator import LinkFailure, Simulator, make_rng
from .stochastic import (MonteCarloConfig, defect_survival_curve, estimate_far_node_dieout,
                         estimate_seed_probability, global_wave_retention)
from .topology import cohomology_class, find_defect, homology_basis, seed_nodes
from .waves import WaveSpec, sever_defect_links

MILESTONES = (25, 45, 250)


@dataclass
class Setup:
    domain: HallwayDomain
    network: Network                 # network the automaton runs on
    initial: State
    base_network: Network            # network before severing
    augmentation: Optional[Augmentation] = None
    _basis: dict = field(default_factory=dict)

    def basis(self, network: Optional[Network] = None):
        network = network or self.network
        key = id(network)
        if key not in self._basis:
            self._basis[key] = homology_basis(network)
        return self._basis[key]

    def coverage(self, trace, clone_centers: bool = True) -> tuple:
        """Network, trace and disk centers for coverage analyses, lifted onto boundary clones."""
        if self.augmentation is None:
            return self.network, trace, None
        aug = self.augmentation
        return aug.network, aug.lift_trace(trace), aug.coverage_centers() if clone_centers else None


@dataclass
class ExperimentResult:
    exit_status: int
    manifest: str
    summary: dict
    outputs: list = field(default_factory=list)


def initial_condition(scenario: Scenario) -> InitialCondition:
    spec = scenario.initial
    kind = spec['kind']
    n = scenario.n
    if kind == 'zero':
        return AllZero(n)
    if kind == 'uniform':
        return UniformRandom(n, scenario.seed)
    if kind == 'csv':
        return FromCSV(scenario.resolve(spec['path']), n)
    if kind == 'class':
        return ProgrammedClass(spec['target'], n)
    if kind == 'smooth':
        return SmoothField(n, scenario.seed, spec.get('slope', 1.0), spec.get('winding', 0), spec.get('center'))
    waves = [WaveSpec(w['corridor_edge'], w['anchor'], w['direction'], n) for w in spec['waves']]
    return WavePattern(waves)


def prepare(scenario: Scenario) -> Setup:
    """Domain, network, optional augmentation and severing, and the initial state."""
    loader = DataLoader()
    log("--- Building Domain and Network ---")
    domain = scenario.build_domain()
    if scenario.positions is not None:
        positions = loader.load_positions(scenario.resolve(scenario.positions))
        if positions is None:
            raise PreconditionError(f"Positions file {scenario.positions} could not be loaded")
    else:
        positions = sample_points(domain, scenario.node_count, make_rng(scenario.seed, 0))
    network = build_network(positions, scenario.r, scenario.eps)
    log(f"  Nodes: {network.n_nodes}, links: {network.n_edges}, triangles: {len(network.triangles)}")

    log("--- Preparing Initial State ---")
    setup = Setup(domain, network, None, network)
    condition = initial_condition(scenario)
    needs_basis = scenario.initial['kind'] == 'class'
    initial = condition.generate(network, domain, setup.basis(network) if needs_basis else None)
    log(f"  {condition.name}")

    if scenario.augment:
        setup.augmentation = augment_boundary_sensors(network, domain, initial)
        clones = setup.augmentation.network.n_nodes - network.n_nodes
        log(f"  Augmented with {clones} boundary clones")
    if scenario.sever_defects:
        before = network.n_edges
        network = sever_defect_links(network, initial, scenario.sever_defects)
        log(f"  Severed {before - network.n_edges} links ({scenario.sever_defects})")
    setup.network = network
    setup.initial = initial
    return setup


def _barrier_window(setup: Setup, trace, scenario: Scenario) -> tuple:
    last = trace.final.tick
    start = max(trace.initial.tick + 2 * scenario.n, last - 100)
    aug = setup.augmentation
    cover_net = setup.network if aug is None else aug.network
    centers = None if aug is None else aug.coverage_centers()
    rows = []
    for t, values in trace.snapshots:
        if t < start:
            continue
        nodes = wavefront_band(setup.network, State(values, scenario.n, t))
        if aug is not None:
            nodes = aug.lift_nodes(nodes)
        report = barrier_report(cover_net, nodes, setup.domain, centers)
        rows.append({'tick': t, **{f'corridor_{k}': v for k, v in report.items()}})
    df = pd.DataFrame(rows)
    if df.empty:
        return df, {'window': [start, last], 'ticks': 0}
    cols = [c for c in df.columns if c.startswith('corridor_')]
    summary = {
        'window': [start, last],
        'ticks': len(df),
        'all_corridors_fraction': float(df[cols].all(axis=1).mean()),
        'per_corridor_fraction': {c: float(df[c].mean()) for c in cols},
    }
    return df, summary


def run_experiment(scenario: Scenario, out_dir: str, analyses: Optional[dict] = None) -> ExperimentResult:
    """
    Build, run and analyze one scenario, writing every artifact under out_dir.

    Args:
        scenario (Scenario): Validated scenario.
        out_dir (str): Output directory.
        analyses (dict): Optional override of the scenario's analysis flags.

    Returns:
        ExperimentResult: Exit status, manifest path and the summary dict.
    """
    flags = dict(scenario.analyses if analyses is None else analyses)
    loader = DataLoader()
    setup = prepare(scenario)
    network, initial = setup.network, setup.initial
    outputs = loader.save_network(setup.base_network, os.path.join(out_dir, 'network'))

    log(f"\n--- Running {scenario.ticks} ticks ---")
    link = None
    if scenario.p_s is not None:
        link = LinkFailure(scenario.p_s, scenario.seed, scenario.link_mode, (3,))
    sim = Simulator(network, initial, scenario.ticks, link)
    trace = sim.run()
    results = sim.get_results()
    for key, value in results.items():
        log(f"  {key}: {value}")

    dumps = sorted(set(scenario.dumps))
    for t in dumps:
        outputs.append(loader.save_state(trace.state_at(t), os.path.join(out_dir, 'snapshots', f'state_t{t:05d}.csv')))
    outputs.append(loader.save_events(trace.events, os.path.join(out_dir, 'events.jsonl')))
    awake = sim.get_awake_series()
    outputs.append(loader.save_frame(awake.reset_index(), os.path.join(out_dir, 'awake_fraction.csv')))

    initial_seeds = seed_nodes(initial, network)
    summary = {
        'scenario': scenario.name,
        'results': results,
        'awake_fraction': [round(float(v), 6) for v in awake.values],
        'milestones': {str(t): round(float(awake.loc[t]), 6) for t in MILESTONES if t in awake.index},
        'seed_inventory': {
            'initial_seed_nodes': int(len(initial_seeds)),
            'final_seed_nodes': int(len(seed_nodes(trace.final, network))),
            'initial_has_seed': bool(len(initial_seeds)),
        },
        'died_out': bool(trace.final.is_zero()),
        'degenerate_alphabet': scenario.n == 3,
    }
    trivial = True if initial.is_zero() else None

    if flags.get('continuity'):
        ok0, edge0 = is_continuous(network, initial)
        ok1, edge1 = is_continuous(network, trace.final)
        summary['continuity'] = {'initial': ok0, 'final': ok1,
                                 'first_violation_initial': list(edge0) if edge0 else None}

    if flags.get('periodicity'):
        log("\n--- Periodicity ---")
        detector = PeriodicityDetector(trace)
        periods = detector.detect()
        outputs.append(loader.save_frame(periods.reset_index(), os.path.join(out_dir, 'periodicity.csv')))
        info = detector.get_summary()
        onset = info['max_onset']
        if onset is not None:
            tail = awake[awake.index >= onset]
            info['awake_fraction_after_onset'] = round(float(tail.mean()), 6)
            info['within_duty_band'] = bool(1 / (2 * scenario.n) <= tail.mean() <= 2 / scenario.n)
        summary['periodicity'] = info

    if flags.get('defects'):
        log("\n--- Defects ---")
        report = find_defect(initial, network, setup.basis() if network.is_connected() else None)
        outputs.append(loader.save_json(report.to_dict(), os.path.join(out_dir, 'defects.json')))
        summary['defects'] = {'has_defect': report.has_defect, 'has_local': report.has_local,
                              'has_global': report.has_global, 'blocked_cycles': len(report.blocked)}
        trivial = not report.has_defect

    if flags.get('class'):
        basis = setup.basis()
        classes = {}
        for label, state in (('initial', initial), ('final', trace.final)):
            ok, _ = is_continuous(network, state)
            classes[label] = cohomology_class(state, basis).to_list() if ok else None
        outputs.append(loader.save_json({'rank': basis.rank, **classes}, os.path.join(out_dir, 'class.json')))
        summary['class'] = classes
        if classes['initial'] is not None and trivial is None:
            trivial = not any(classes['initial']) and not len(initial_seeds)

    if flags.get('local_holes'):
        hole = local_hole_check(setup.base_network, setup.domain)
        summary['local_holes'] = {'rips_h1_rank': hole.rips_h1_rank, 'domain_h1_rank': hole.domain_h1_rank,
                                  'has_local_hole': hole.has_local_hole}

    if flags.get('forest'):
        log("\n--- Subordination Forest ---")
        forest = subordination_forest(network, trace)
        outputs.append(loader.save_frame(forest.to_frame().reset_index(), os.path.join(out_dir, 'forest.csv')))
        summary['forest'] = {'roots': int(len(forest.roots)), 'max_depth': int(forest.depth.max())}

    if flags.get('barriers'):
        log("\n--- Barriers ---")
        table, info = _barrier_window(setup, trace, scenario)
        outputs.append(loader.save_frame(table, os.path.join(out_dir, 'barriers.csv')))
        summary['barriers'] = info

    if flags.get('evasion'):
        log("\n--- Evasion ---")
        opts = scenario.evasion
        cover_net, cover_trace, centers = setup.coverage(trace, opts.get('augment_centers', True))
        instance = EvasionInstance.from_trace(
            setup.domain, cover_net, cover_trace, scenario.grid or scenario.eps / 2.0,
            t0=opts.get('t0', 0), centers=centers, region=opts.get('region'),
            space=opts.get('space', 'grid'), recurrence=scenario.p_s is None or scenario.p_s == 1.0,
        )
        if opts.get('refine'):
            verdict, steps = refine(instance)
        else:
            verdict, steps = decide(instance), []
        payload = verdict.to_dict()
        payload['refinement'] = [[res, outcome] for res, outcome in steps]
        payload['witness_verified'] = verify_witness(instance, verdict) if verdict.witness else None
        outputs.append(loader.save_json(payload, os.path.join(out_dir, 'verdict.json')))
        if verdict.witness:
            outputs.append(loader.save_witness(verdict.witness, os.path.join(out_dir, 'witness.csv')))
        summary['evasion'] = {'outcome': verdict.outcome, 'tick': verdict.tick}
        log(f"  Outcome: {verdict.outcome} (tick {verdict.tick})")

    summary['cohomologically_trivial'] = trivial
    if scenario.energy_labels:
        labels = pd.Series(relabel_energy(trace.final.values)).value_counts()
        summary['energy_labels'] = {name: int(labels.get(name, 0)) for name in list(ENERGY_LABELS.values()) + ['sleeping']}

    if PLOTS_ENABLED:
        from .visualizer import plot_awake_fraction, plot_state

        for t in dumps:
            name = os.path.join(out_dir, 'plots', f'state_t{t:05d}.png')
            plot_state(network, trace.state_at(t), setup.domain, name)
            outputs.append(name)
        name = os.path.join(out_dir, 'plots', 'awake_fraction.png')
        plot_awake_fraction(awake, scenario.n, name)
        outputs.append(name)

    outputs.append(loader.save_json({'format_version': 1, 'scenario': scenario.to_dict()},
                                    os.path.join(out_dir, 'scenario_echo.json')))
    outputs.append(loader.save_json(summary, os.path.join(out_dir, 'summary.json')))
    manifest = loader.write_manifest(out_dir, outputs)
    log(f"\nManifest written to {manifest}")
    return ExperimentResult(0, manifest, summary, outputs)


def program_state(scenario: Scenario, out_dir: str) -> ExperimentResult:
    """Build the programmed initial state and export it with its class."""
    loader = DataLoader()
    setup = prepare(scenario)
    outputs = loader.save_network(setup.network, os.path.join(out_dir, 'network'))
    outputs.append(loader.save_state(setup.initial, os.path.join(out_dir, 'programmed_state.csv')))
    info = {'kind': scenario.initial['kind']}
    ok, edge = is_continuous(setup.network, setup.initial)
    info['continuous'] = ok
    if ok and setup.network.is_connected():
        info['class'] = cohomology_class(setup.initial, setup.basis()).to_list()
    outputs.append(loader.save_json(info, os.path.join(out_dir, 'class.json')))
    manifest = loader.write_manifest(out_dir, outputs)
    return ExperimentResult(0, manifest, info, outputs)


def run_montecarlo(scenario: Scenario, out_dir: str) -> ExperimentResult:
    """
    Monte Carlo estimators configured by the scenario's `montecarlo` block.
    """
    loader = DataLoader()
    opts = dict(scenario.montecarlo)
    estimators = opts.pop('estimators', ['seed_probability', 'far_node', 'survival'])
    p_s_values = opts.pop('p_s_values', [0.8, 0.9, 0.95, 1.0])
    config = MonteCarloConfig(seed=scenario.seed, n=scenario.n, r=scenario.r, eps=scenario.eps,
                              p_s=scenario.p_s or 1.0, link_mode=scenario.link_mode, **opts)
    domain = scenario.build_domain()
    outputs, results = [], {'config': config.to_dict()}

    if 'seed_probability' in estimators:
        log("\n--- Seed Probability ---")
        df = estimate_seed_probability(domain, config)
        outputs.append(loader.save_frame(df, os.path.join(out_dir, 'seed_probability.csv')))
        results['seed_probability'] = df.to_dict(orient='records')

    if 'far_node' in estimators:
        log("\n--- Far-Node Die-Out ---")
        df = estimate_far_node_dieout(domain, config)
        outputs.append(loader.save_frame(df, os.path.join(out_dir, 'far_node_dieout.csv')))
        results['far_node_dieout'] = df.to_dict(orient='records')

    if 'survival' in estimators:
        log("\n--- Defect Survival Under Link Failure ---")
        setup = prepare(scenario)
        curves = {}
        for p_s in p_s_values:
            res = defect_survival_curve(setup.network, setup.initial, p_s, config.T, config.trials,
                                        config.seed, config.link_mode)
            label = f'p_s={p_s:g}'
            curves[label] = res.curve
            outputs.append(loader.save_frame(res.curve.reset_index(),
                                             os.path.join(out_dir, 'survival', f'curve_ps{p_s:g}.csv')))
            outputs.append(loader.save_frame(res.histogram.rename('trials').reset_index(),
                                             os.path.join(out_dir, 'survival', f'deaths_ps{p_s:g}.csv')))
            log(f"  {label}: dead fraction at T={config.T}: {res.dead_fraction:.3f}")
        results['survival'] = {label: float(df['dead_fraction'].iloc[-1]) for label, df in curves.items()}
        if PLOTS_ENABLED:
            from .visualizer import plot_survival_curves

            name = os.path.join(out_dir, 'plots', 'survival_curves.png')
            plot_survival_curves(curves, name)
            outputs.append(name)

    if 'retention' in estimators:
        log("\n--- Global Wave Retention ---")
        setup = prepare(scenario)
        basis = setup.basis()
        rows = [global_wave_retention(setup.network, setup.initial, basis, p_s, config.T, config.trials, config.seed)
                for p_s in p_s_values]
        df = pd.DataFrame(rows)
        outputs.append(loader.save_frame(df, os.path.join(out_dir, 'global_wave_retention.csv')))
        results['retention'] = rows
        for row in rows:
            log(f"  p_s={row['p_s']:g}: retained in {row['retention']:.3f} of runs")

    outputs.append(loader.save_json(results, os.path.join(out_dir, 'montecarlo.json')))
    manifest = loader.write_manifest(out_dir, outputs)
    return ExperimentResult(0, manifest, results, outputs)
