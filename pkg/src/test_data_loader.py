import hashlib
import json
import os
import sys

import numpy as np
import pytest

# Add src to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.conftest import circle_network
from src.data_loader import DataLoader
from src.errors import ParseError
from src.ghm import State
from src.simulator import run


def test_state_round_trip(tmp_path):
    loader = DataLoader()
    state = State([0, 3, 1, 2], 4, 7)
    path = loader.save_state(state, str(tmp_path / 'state.csv'))
    loaded = loader.load_state(path, 4)
    assert loaded.values.tolist() == [0, 3, 1, 2]
    assert loaded.tick == 7


def test_missing_file_returns_none(tmp_path, capsys):
    loader = DataLoader()
    assert loader.load_state(str(tmp_path / 'nope.csv'), 4) is None
    assert "does not exist" in capsys.readouterr().out


def test_incomplete_snapshot_is_rejected(tmp_path):
    (tmp_path / 'state.csv').write_text("tick,node_id,state\n0,0,1\n0,2,0\n")
    with pytest.raises(ParseError):
        DataLoader().load_state(str(tmp_path / 'state.csv'), 3)


def test_snapshots_pick_the_requested_tick(tmp_path):
    loader = DataLoader(str(tmp_path))
    loader.save_snapshots([(0, np.array([1, 0])), (5, np.array([2, 2]))], 'snaps.csv')
    assert loader.load_state('snaps.csv', 3).values.tolist() == [1, 0]
    assert loader.load_state('snaps.csv', 3, tick=5).values.tolist() == [2, 2]


def test_network_round_trip(tmp_path):
    loader = DataLoader()
    net = circle_network(6)
    loader.save_network(net, str(tmp_path / 'network'))
    again = loader.load_network(str(tmp_path / 'network'))
    assert np.array_equal(again.edges, net.edges)
    assert again.r == pytest.approx(net.r)


def test_events_file(tmp_path):
    loader = DataLoader()
    trace = run(circle_network(4), State([1, 0, 0, 0], 4), 3)
    path = loader.save_events(trace.events, str(tmp_path / 'events.jsonl'))
    events = loader.load_events(path)
    assert len(events) == 3
    assert events[0] == {'tick': 0, 'fired': [1, 3], 'stalled_count': 1}


def test_json_is_stamped_and_sorted(tmp_path):
    loader = DataLoader()
    path = loader.save_json({'b': np.int64(2), 'a': np.array([1.5])}, str(tmp_path / 'out.json'))
    data = loader.load_json(path)
    assert data == {'a': [1.5], 'b': 2, 'format_version': 1}
    text = open(path).read()
    assert text.index('"a"') < text.index('"b"')


def test_bad_json_reports_line(tmp_path):
    (tmp_path / 'bad.json').write_text('{\n  "a": 1,\n  oops\n}\n')
    with pytest.raises(ParseError) as exc:
        DataLoader().load_json(str(tmp_path / 'bad.json'))
    assert exc.value.line == 3


def test_manifest_lists_hashes(tmp_path):
    loader = DataLoader()
    b = loader.save_json({'x': 1}, str(tmp_path / 'b.json'))
    a = loader.save_state(State([0, 1, 2], 3), str(tmp_path / 'sub' / 'a.csv'))
    manifest = json.loads(open(loader.write_manifest(str(tmp_path), [b, a, b])).read())
    assert [e['path'] for e in manifest['files']] == ['b.json', os.path.join('sub', 'a.csv')]
    with open(a, 'rb') as f:
        assert manifest['files'][1]['sha256'] == hashlib.sha256(f.read()).hexdigest()
