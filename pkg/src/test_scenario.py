import json
import os
import sys

import pytest

# Add src to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.errors import ParseError, ValidationError
from src.scenario import reference_scenario, parse_scenario, scenario_from_dict


def write_scenario(tmp_path, data, name='scenario.json'):
    path = tmp_path / name
    path.write_text(json.dumps(data, indent=2))
    return str(path)


def base_data(**overrides):
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
    }
    data.update(overrides)
    return data


def test_valid_scenario_parses(tmp_path):
    scenario = parse_scenario(write_scenario(tmp_path, base_data(analyses={'defects': True})))
    assert scenario.name == 'small-annulus'
    assert scenario.node_count == 300
    assert scenario.wants('defects')
    assert not scenario.wants('forest')
    assert scenario.base_dir == str(tmp_path)
    assert scenario.resolve('pos.csv') == os.path.join(str(tmp_path), 'pos.csv')
    assert scenario.build_domain().betti == 1


def test_explicit_rectangles(tmp_path):
    data = base_data(domain={'rects': [[0, 0, 4, 1], [3, 0, 4, 4]]})
    scenario = parse_scenario(write_scenario(tmp_path, data))
    assert scenario.build_domain().betti == 0


def test_all_violations_are_reported_together(tmp_path):
    with pytest.raises(ValidationError) as exc:
        parse_scenario(write_scenario(tmp_path, base_data(n=2, r=-1.0)))
    assert len(exc.value.violations) == 2
    assert exc.value.exit_code == 2


def test_unknown_key_reports_its_line(tmp_path):
    path = write_scenario(tmp_path, {'name': 'x', 'bogus': 1})
    with pytest.raises(ParseError) as exc:
        parse_scenario(path)
    assert exc.value.line == 3
    assert exc.value.exit_code == 2


def test_malformed_json(tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('{\n  "name": "x",\n  "n": \n}\n')
    with pytest.raises(ParseError) as exc:
        parse_scenario(str(path))
    assert exc.value.line == 4


def test_missing_file():
    with pytest.raises(ParseError):
        parse_scenario('/nonexistent/scenario.json')


def test_wrong_type_is_a_parse_error():
    with pytest.raises(ParseError) as exc:
        scenario_from_dict(base_data(n='3'))
    assert exc.value.field == 'n'
    with pytest.raises(ParseError):
        scenario_from_dict(base_data(augment=1))


def test_nested_keys_are_checked():
    with pytest.raises(ParseError):
        scenario_from_dict(base_data(initial={'kind': 'zero', 'colour': 'red'}))
    with pytest.raises(ParseError):
        scenario_from_dict(base_data(analyses={'telepathy': True}))


def test_semantic_checks():
    with pytest.raises(ValidationError):
        scenario_from_dict(base_data(dumps=[10, 40]))
    with pytest.raises(ValidationError):
        scenario_from_dict(base_data(grid=0.5, analyses={'evasion': True}))
    with pytest.raises(ValidationError):
        scenario_from_dict(base_data(positions='missing.csv', node_count=None))
    with pytest.raises(ValidationError):
        scenario_from_dict(base_data(initial={'kind': 'waves', 'waves': []}))
    with pytest.raises(ValidationError):
        scenario_from_dict(base_data(p_s=1.5))


def test_reference_scenario_values():
    scenario = reference_scenario(seed=5)
    assert scenario.node_count == 16250
    assert (scenario.r, scenario.eps, scenario.n) == (1.5, 1.5, 20)
    assert scenario.seed == 5
    assert scenario.domain['preset'] == 'hallway_grid'
    assert scenario.build_domain().betti == 4
    assert max(scenario.dumps) <= scenario.ticks
