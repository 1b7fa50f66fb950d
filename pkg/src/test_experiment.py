import json
from dataclasses import replace
import os
import sys

import numpy as np
import pandas as pd
import pytest

# Add src to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.conftest import LATTICE_R, wall_network
from src.errors import PreconditionError
from src.evasion import SURVIVES_FOREVER
from src.experiment import initial_condition, prepare, program_state, run_experiment, run_montecarlo
from src.initial_conditions import AllZero, ProgrammedClass, UniformRandom
from src.scenario import Scenario, scenario_from_dict, validate


def small_scenario(**overrides):
    data = {
        'name': 'small-annulus',
        'domain': {'preset': 'annulus_frame', 'params': {'outer': 5.0, 'width': 1.0}},
        'node_count': 300,
        'r': 0.6,
        'eps': 0.6,
        'n': 3,
        'seed': 1,
        'initial': {'kind': 'zero'},
        'ticks': 30,
        'dumps': [0, 30],
        'analyses': {'continuity': True, 'periodicity': True, 'defects': True},
    }
    data.update(overrides)
    return scenario_from_dict(data)


def read_json(path):
    with open(path) as f:
        return json.load(f)


def test_initial_condition_kinds():
    assert isinstance(initial_condition(small_scenario()), AllZero)
    assert isinstance(initial_condition(small_scenario(initial={'kind': 'uniform'})), UniformRandom)
    assert isinstance(initial_condition(small_scenario(initial={'kind': 'class', 'target': [1]})), ProgrammedClass)


def test_prepare_is_seeded():
    a = prepare(small_scenario(initial={'kind': 'uniform'}))
    b = prepare(small_scenario(initial={'kind': 'uniform'}))
    assert (a.network.positions == b.network.positions).all()
    assert (a.initial.values == b.initial.values).all()
    assert a.network.n_nodes == 300


def test_zero_start_dies_out(tmp_path):
    result = run_experiment(small_scenario(), str(tmp_path))
    assert result.exit_status == 0
    summary = result.summary
    assert summary['died_out']
    assert summary['cohomologically_trivial'] is True
    assert summary['continuity']['initial']
    assert summary['periodicity']['periodic_fraction'] == 1.0
    assert summary['degenerate_alphabet']
    for name in ('summary.json', 'defects.json', 'periodicity.csv', 'events.jsonl', 'awake_fraction.csv',
                 os.path.join('snapshots', 'state_t00030.csv'), os.path.join('network', 'nodes.csv')):
        assert os.path.exists(tmp_path / name), name
    manifest = read_json(result.manifest)
    paths = [e['path'] for e in manifest['files']]
    assert paths == sorted(paths)
    assert 'summary.json' in paths


def test_runs_are_byte_identical(tmp_path):
    scenario = small_scenario(initial={'kind': 'uniform'}, analyses={'defects': True})
    first = run_experiment(scenario, str(tmp_path / 'a'))
    second = run_experiment(scenario, str(tmp_path / 'b'))
    with open(first.manifest, 'rb') as f1, open(second.manifest, 'rb') as f2:
        assert f1.read() == f2.read()


def test_simulate_only_writes_core_outputs(tmp_path):
    result = run_experiment(small_scenario(), str(tmp_path), analyses={})
    assert 'defects' not in result.summary
    assert result.summary['cohomologically_trivial'] is True
    assert not os.path.exists(tmp_path / 'defects.json')
    awake = pd.read_csv(tmp_path / 'awake_fraction.csv')
    assert list(awake.columns) == ['tick', 'awake_fraction']
    assert len(awake) == 31


def test_programmed_lattice_run_hides_an_evader(tmp_path, annulus_lattice):
    _, net = annulus_lattice
    positions = pd.DataFrame({'node_id': range(net.n_nodes), 'x': net.positions[:, 0], 'y': net.positions[:, 1]})
    positions.to_csv(tmp_path / 'positions.csv', index=False)
    scenario = Scenario(
        name='lattice-wave',
        domain={'preset': 'annulus_frame', 'params': {'outer': 5.0, 'width': 1.0}},
        positions='positions.csv', r=LATTICE_R, eps=LATTICE_R, n=6, seed=0,
        initial={'kind': 'class', 'target': [1]}, ticks=200, grid=0.125,
        analyses={'class': True, 'evasion': True}, base_dir=str(tmp_path),
    )
    validate(scenario)
    result = run_experiment(scenario, str(tmp_path / 'out'))
    assert result.summary['class'] == {'initial': [1], 'final': [1]}
    assert result.summary['cohomologically_trivial'] is False
    assert result.summary['evasion']['outcome'] == SURVIVES_FOREVER
    verdict = read_json(tmp_path / 'out' / 'verdict.json')
    assert verdict['witness_verified'] is True


def test_program_state_reports_the_class(tmp_path, annulus_lattice):
    _, net = annulus_lattice
    positions = pd.DataFrame({'node_id': range(net.n_nodes), 'x': net.positions[:, 0], 'y': net.positions[:, 1]})
    positions.to_csv(tmp_path / 'positions.csv', index=False)
    scenario = Scenario(
        domain={'preset': 'annulus_frame', 'params': {'outer': 5.0, 'width': 1.0}},
        positions='positions.csv', r=LATTICE_R, eps=LATTICE_R, n=3,
        initial={'kind': 'class', 'target': [-2]}, base_dir=str(tmp_path),
    )
    result = program_state(scenario, str(tmp_path / 'out'))
    assert result.summary == {'kind': 'class', 'continuous': True, 'class': [-2]}
    assert read_json(tmp_path / 'out' / 'class.json')['class'] == [-2]


def test_missing_positions_file_is_a_precondition_error(tmp_path):
    scenario = Scenario(positions='gone.csv', base_dir=str(tmp_path))
    with pytest.raises(PreconditionError):
        prepare(scenario)


def test_lossless_retention_keeps_the_wave(tmp_path, annulus_lattice):
    _, net = annulus_lattice
    positions = pd.DataFrame({'node_id': range(net.n_nodes), 'x': net.positions[:, 0], 'y': net.positions[:, 1]})
    positions.to_csv(tmp_path / 'positions.csv', index=False)
    scenario = Scenario(
        domain={'preset': 'annulus_frame', 'params': {'outer': 5.0, 'width': 1.0}},
        positions='positions.csv', r=LATTICE_R, eps=LATTICE_R, n=6,
        initial={'kind': 'class', 'target': [1]}, base_dir=str(tmp_path),
        montecarlo={'trials': 2, 'T': 10, 'estimators': ['retention'], 'p_s_values': [1.0]},
    )
    result = run_montecarlo(scenario, str(tmp_path / 'out'))
    assert result.summary['retention'][0]['retention'] == 1.0
    assert os.path.exists(tmp_path / 'out' / 'global_wave_retention.csv')


def wall_positions(tmp_path):
    pts = wall_network().positions
    pd.DataFrame({'node_id': range(len(pts)), 'x': pts[:, 0], 'y': pts[:, 1]}).to_csv(
        tmp_path / 'positions.csv', index=False)
    return pts


def test_augmented_run_keeps_base_dynamics(tmp_path):
    pts = wall_positions(tmp_path)
    scenario = Scenario(
        name='walls', domain={'preset': 'corridor', 'params': {'length': 4.0, 'width': 1.0}},
        positions='positions.csv', r=0.45, eps=0.3, n=5, seed=2, initial={'kind': 'uniform'},
        ticks=20, grid=0.1, augment=True, analyses={'evasion': True, 'barriers': True},
        base_dir=str(tmp_path),
    )
    validate(scenario)
    setup = prepare(scenario)
    assert setup.network.n_nodes == len(pts)
    assert setup.augmentation.network.n_nodes > len(pts)
    augmented = run_experiment(scenario, str(tmp_path / 'a'))
    plain = run_experiment(replace(scenario, augment=False), str(tmp_path / 'b'))
    a = pd.read_csv(tmp_path / 'a' / 'awake_fraction.csv')
    b = pd.read_csv(tmp_path / 'b' / 'awake_fraction.csv')
    pd.testing.assert_frame_equal(a, b)
    assert augmented.summary['evasion']['outcome'] == plain.summary['evasion']['outcome']
    assert read_json(tmp_path / 'a' / 'verdict.json')['outcome'] == augmented.summary['evasion']['outcome']


def test_seeded_lattice_run_keeps_duty_band_and_barriers(tmp_path, annulus_lattice):
    _, net = annulus_lattice
    positions = pd.DataFrame({'node_id': range(net.n_nodes), 'x': net.positions[:, 0], 'y': net.positions[:, 1]})
    positions.to_csv(tmp_path / 'positions.csv', index=False)
    # Four-node seed square in the bottom corridor
    index = {tuple(np.rint(p * 8).astype(int).tolist()): i for i, p in enumerate(net.positions)}
    loop = [index[(16, 4)], index[(17, 4)], index[(17, 5)], index[(16, 5)]]
    values = np.zeros(net.n_nodes, dtype=int)
    values[loop] = [0, 1, 2, 3]
    pd.DataFrame({'tick': 0, 'node_id': range(net.n_nodes), 'state': values}).to_csv(tmp_path / 'state.csv', index=False)
    scenario = Scenario(
        name='lattice-seed',
        domain={'preset': 'annulus_frame', 'params': {'outer': 5.0, 'width': 1.0}},
        positions='positions.csv', r=LATTICE_R, eps=LATTICE_R, n=4, seed=0,
        initial={'kind': 'csv', 'path': 'state.csv'}, ticks=200,
        analyses={'periodicity': True, 'barriers': True}, base_dir=str(tmp_path),
    )
    validate(scenario)
    result = run_experiment(scenario, str(tmp_path / 'out'))
    summary = result.summary
    assert summary['seed_inventory']['final_seed_nodes'] > 0
    assert summary['periodicity']['within_duty_band']
    assert summary['periodicity']['awake_fraction_after_onset'] == pytest.approx(0.25, abs=0.02)
    assert summary['barriers']['window'] == [100, 200]
    assert summary['barriers']['all_corridors_fraction'] == 1.0
